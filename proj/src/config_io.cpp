#include "specmix/config_io.hpp"

#include <fstream>

#include "specmix/common.hpp"

using nlohmann::json;

namespace specmix::spectra {

void to_json(json& j, const MetabolitePeak& p) {
    j = json{{"name", p.name},
             {"center_index", p.center_index},
             {"width", p.width},
             {"amp_lo", p.amp_lo},
             {"amp_hi", p.amp_hi}};
}

void from_json(const json& j, MetabolitePeak& p) {
    j.at("name").get_to(p.name);
    j.at("center_index").get_to(p.center_index);
    j.at("width").get_to(p.width);
    j.at("amp_lo").get_to(p.amp_lo);
    j.at("amp_hi").get_to(p.amp_hi);
}

namespace {

std::string noise_mode_name(LabelNoiseSpec::Mode m) {
    switch (m) {
        case LabelNoiseSpec::Mode::none: return "none";
        case LabelNoiseSpec::Mode::asymmetric: return "asymmetric";
        case LabelNoiseSpec::Mode::symmetric: return "symmetric";
    }
    throw ConfigError("unknown label noise mode");
}

LabelNoiseSpec::Mode noise_mode_from_name(const std::string& s) {
    if (s == "none") return LabelNoiseSpec::Mode::none;
    if (s == "asymmetric") return LabelNoiseSpec::Mode::asymmetric;
    if (s == "symmetric") return LabelNoiseSpec::Mode::symmetric;
    throw ConfigError("unknown label noise mode \"" + s + "\"");
}

} // namespace

void to_json(json& j, const LabelNoiseSpec& s) {
    j = json{{"mode", noise_mode_name(s.mode)}, {"rate", s.rate}};
}

void from_json(const json& j, LabelNoiseSpec& s) {
    s.mode = noise_mode_from_name(j.at("mode").get<std::string>());
    j.at("rate").get_to(s.rate);
}

void to_json(json& j, const CohortConfig& c) {
    json profiles = json::object();
    for (const auto& [cls, peaks] : c.class_profiles) profiles[std::to_string(cls)] = peaks;
    j = json{{"n_patients", c.n_patients},
             {"voxels_min", c.voxels_min},
             {"voxels_max", c.voxels_max},
             {"tumor_fraction", c.tumor_fraction},
             {"class_profiles", profiles},
             {"baseline_distortion_amplitude", c.baseline_distortion_amplitude},
             {"noise_sigma", c.noise_sigma},
             {"label_noise", c.label_noise},
             {"seed", c.seed}};
}

void from_json(const json& j, CohortConfig& c) {
    j.at("n_patients").get_to(c.n_patients);
    j.at("voxels_min").get_to(c.voxels_min);
    j.at("voxels_max").get_to(c.voxels_max);
    j.at("tumor_fraction").get_to(c.tumor_fraction);
    c.class_profiles.clear();
    for (const auto& [key, peaks] : j.at("class_profiles").items())
        c.class_profiles[std::stoi(key)] = peaks.get<std::vector<MetabolitePeak>>();
    j.at("baseline_distortion_amplitude").get_to(c.baseline_distortion_amplitude);
    j.at("noise_sigma").get_to(c.noise_sigma);
    c.label_noise = j.value("label_noise", LabelNoiseSpec{});
    c.seed = j.value("seed", uint64_t{0});
}

} // namespace specmix::spectra

namespace specmix::nn {

void to_json(json& j, const NetworkConfig& c) {
    j = json{{"input_length", c.input_length},
             {"kernel_width", c.kernel_width},
             {"initial_filters", c.initial_filters},
             {"n_res_blocks", c.n_res_blocks},
             {"dropout_rate", c.dropout_rate},
             {"n_classes", c.n_classes},
             {"subsample_blocks", c.subsample_blocks},
             {"filter_double_blocks", c.filter_double_blocks}};
}

void from_json(const json& j, NetworkConfig& c) {
    const NetworkConfig defaults;
    c.input_length = j.value("input_length", defaults.input_length);
    c.kernel_width = j.value("kernel_width", defaults.kernel_width);
    c.initial_filters = j.value("initial_filters", defaults.initial_filters);
    c.n_res_blocks = j.value("n_res_blocks", defaults.n_res_blocks);
    c.dropout_rate = j.value("dropout_rate", defaults.dropout_rate);
    c.n_classes = j.value("n_classes", defaults.n_classes);
    c.subsample_blocks = j.value("subsample_blocks", defaults.subsample_blocks);
    c.filter_double_blocks = j.value("filter_double_blocks", defaults.filter_double_blocks);
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"learning_rate", c.learning_rate},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"epsilon_adam", c.epsilon_adam},
             {"batch_size", c.batch_size},
             {"epochs", c.epochs},
             {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
    const TrainConfig defaults;
    c.learning_rate = j.value("learning_rate", defaults.learning_rate);
    c.beta1 = j.value("beta1", defaults.beta1);
    c.beta2 = j.value("beta2", defaults.beta2);
    c.epsilon_adam = j.value("epsilon_adam", defaults.epsilon_adam);
    c.batch_size = j.value("batch_size", defaults.batch_size);
    c.epochs = j.value("epochs", defaults.epochs);
    c.seed = j.value("seed", defaults.seed);
}

void to_json(json& j, const EpochStats& s) {
    j = json{{"train_loss", s.train_loss}};
    if (s.has_valid) j["valid_auc"] = s.valid_auc;
}

void to_json(json& j, const TrainLog& l) {
    j = json{{"epochs", l.epochs}, {"best_epoch", l.best_epoch}};
}

} // namespace specmix::nn

namespace specmix::distill {

void to_json(json& j, const DistillConfig& c) {
    j = json{{"theta", c.theta},
             {"max_epoch", c.max_epoch},
             {"network", c.network},
             {"train", c.train}};
}

void from_json(const json& j, DistillConfig& c) {
    const DistillConfig defaults;
    c.theta = j.value("theta", defaults.theta);
    c.max_epoch = j.value("max_epoch", defaults.max_epoch);
    c.network = j.value("network", defaults.network);
    c.train = j.value("train", defaults.train);
}

} // namespace specmix::distill

namespace specmix::augment {

void to_json(json& j, const AugmentConfig& c) {
    j = json{{"strategy", strategy_name(c.strategy)},
             {"alpha", c.alpha},
             {"factor", c.factor},
             {"noise_sigma", c.noise_sigma},
             {"seed", c.seed}};
}

void from_json(const json& j, AugmentConfig& c) {
    const AugmentConfig defaults;
    c.strategy = j.contains("strategy") ? strategy_from_name(j.at("strategy").get<std::string>())
                                        : defaults.strategy;
    c.alpha = j.value("alpha", defaults.alpha);
    c.factor = j.value("factor", defaults.factor);
    c.noise_sigma = j.value("noise_sigma", defaults.noise_sigma);
    c.seed = j.value("seed", defaults.seed);
}

} // namespace specmix::augment

namespace specmix::eval {

void to_json(json& j, const ConfusionCounts& c) {
    j = json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

void to_json(json& j, const EvalReport& r) {
    j = json{{"n_samples", r.n_samples},
             {"auc", r.auc},
             {"confusion_at_half", r.at_half},
             {"sensitivity", r.sensitivity},
             {"specificity", r.specificity},
             {"accuracy", r.accuracy},
             {"youden_threshold", r.youden_threshold},
             {"youden_sensitivity", r.youden_sensitivity},
             {"youden_specificity", r.youden_specificity}};
    if (r.n_patients > 0) {
        j["n_patients"] = r.n_patients;
        j["patient_accuracy"] = r.patient_acc;
    }
}

void to_json(json& j, const CvSummary& s) {
    j = json{{"n_folds", s.n_folds},
             {"auc", {{"mean", s.mean_auc}, {"std", s.std_auc}}},
             {"sensitivity", {{"mean", s.mean_sensitivity}, {"std", s.std_sensitivity}}},
             {"specificity", {{"mean", s.mean_specificity}, {"std", s.std_specificity}}},
             {"accuracy", {{"mean", s.mean_accuracy}, {"std", s.std_accuracy}}},
             {"patient_accuracy", {{"mean", s.mean_patient_acc}, {"std", s.std_patient_acc}}}};
}

} // namespace specmix::eval

namespace specmix::pipeline {

void to_json(json& j, const SweepGrid& g) {
    j = json::object();
    if (!g.alpha.empty()) j["alpha"] = g.alpha;
    if (!g.factor.empty()) j["factor"] = g.factor;
    if (!g.max_epoch.empty()) j["max_epoch"] = g.max_epoch;
    if (!g.strategy.empty()) j["strategy"] = g.strategy;
}

void from_json(const json& j, SweepGrid& g) {
    g.alpha = j.value("alpha", std::vector<double>{});
    g.factor = j.value("factor", std::vector<int>{});
    g.max_epoch = j.value("max_epoch", std::vector<int>{});
    g.strategy = j.value("strategy", std::vector<std::string>{});
}

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"dataset_path", c.dataset_path},
             {"folds", c.folds},
             {"valid_fraction", c.valid_fraction},
             {"seeds", c.seeds},
             {"strategy", c.strategy},
             {"distill", c.distill},
             {"augment", c.augment},
             {"train", c.train},
             {"sweep", c.sweep},
             {"output_dir", c.output_dir},
             {"save_augmented", c.save_augmented},
             {"jobs", c.jobs}};
    if (c.dataset_path.empty()) j["cohort"] = c.cohort;
}

void from_json(const json& j, ExperimentConfig& c) {
    const ExperimentConfig defaults;
    if (j.contains("cohort")) c.cohort = j.at("cohort").get<spectra::CohortConfig>();
    c.dataset_path = j.value("dataset_path", defaults.dataset_path);
    c.folds = j.value("folds", defaults.folds);
    c.valid_fraction = j.value("valid_fraction", defaults.valid_fraction);
    c.seeds = j.value("seeds", defaults.seeds);
    c.strategy = j.value("strategy", defaults.strategy);
    c.distill = j.value("distill", defaults.distill);
    c.augment = j.value("augment", defaults.augment);
    c.train = j.value("train", defaults.train);
    c.sweep = j.value("sweep", defaults.sweep);
    c.output_dir = j.value("output_dir", defaults.output_dir);
    c.save_augmented = j.value("save_augmented", defaults.save_augmented);
    c.jobs = j.value("jobs", defaults.jobs);
}

} // namespace specmix::pipeline

namespace specmix {

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError(path + ": cannot open");
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void save_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("failed writing " + path);
}

} // namespace specmix

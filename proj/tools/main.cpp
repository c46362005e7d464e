// specmix command line tool: every verb reads a JSON config, writes
// machine-readable artifacts, and keeps diagnostics on stderr.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "specmix/analyze.hpp"
#include "specmix/augment.hpp"
#include "specmix/common.hpp"
#include "specmix/config_io.hpp"
#include "specmix/distill.hpp"
#include "specmix/eval.hpp"
#include "specmix/nn.hpp"
#include "specmix/pipeline.hpp"
#include "specmix/rng.hpp"
#include "specmix/spectra.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specmix;

namespace {

struct Common {
    std::string config;
    std::string out;
    uint64_t seed = 0;
    int jobs = 1;
    bool verbose = false;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c, const char* config_help) {
    sub->add_option("--config,-c", c.config, config_help)
        ->envname("SPECMIX_CONFIG")
        ->required();
    sub->add_option("--out,-o", c.out, "output file or directory")->envname("SPECMIX_OUT");
    c.seed_opt = sub->add_option("--seed", c.seed, "override the seed in the config")
                     ->envname("SPECMIX_SEED");
    c.jobs_opt = sub->add_option("--jobs", c.jobs, "parallel fold x seed cells (default 1)")
                     ->envname("SPECMIX_JOBS");
    sub->add_flag("--verbose,-v", c.verbose, "chatty progress on stderr")
        ->envname("SPECMIX_VERBOSE");
}

template <typename T>
T config_get(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

template <typename T>
T config_field(const json& j, const std::string& path, const char* key, T fallback) {
    try {
        return j.value(key, fallback);
    } catch (const json::exception& e) {
        throw ParseError(path + ": field \"" + std::string(key) + "\": " + e.what());
    }
}

std::string required_string(const json& j, const std::string& path, const char* key) {
    const std::string v = config_field<std::string>(j, path, key, "");
    if (v.empty()) throw ConfigError(path + ": \"" + std::string(key) + "\" is required");
    return v;
}

const std::string& require_out(const Common& c) {
    if (c.out.empty()) throw ConfigError("--out is required for this verb");
    return c.out;
}

fs::path out_directory(const Common& c) {
    const fs::path dir(require_out(c));
    fs::create_directories(dir);
    return dir;
}

void emit_json(const json& j, const std::string& out) {
    if (out.empty())
        std::printf("%s\n", j.dump(2).c_str());
    else
        save_json_file(j, out);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::map<std::string, int> majority_patient_labels(const spectra::Dataset& ds) {
    std::map<std::string, std::map<int, int>> votes;
    for (const auto& s : ds.spectra) ++votes[s.patient_id][s.label];
    std::map<std::string, int> out;
    for (const auto& [pid, counts] : votes) {
        int best_label = 0, best_count = -1;
        for (const auto& [label, count] : counts)
            if (count > best_count) {
                best_count = count;
                best_label = label;
            }
        out[pid] = best_label;
    }
    return out;
}

eval::EvalReport evaluate_dataset(const nn::Network& net, const spectra::Dataset& ds) {
    const Tensor probs = nn::predict_proba(net, ds);
    std::vector<double> scores(ds.size());
    std::vector<std::vector<double>> rows(ds.size());
    std::vector<int> labels(ds.size());
    std::vector<std::string> ids(ds.size());
    for (size_t i = 0; i < ds.size(); ++i) {
        scores[i] = probs.at2(static_cast<int64_t>(i), 1);
        rows[i] = {probs.at2(static_cast<int64_t>(i), 0), probs.at2(static_cast<int64_t>(i), 1)};
        labels[i] = ds.spectra[i].label;
        ids[i] = ds.spectra[i].patient_id;
    }
    return eval::evaluate(labels, scores, ids, majority_patient_labels(ds), rows);
}

// --- verbs -----------------------------------------------------------------

void cmd_generate(const Common& c) {
    const json j = load_json_file(c.config);
    auto cohort = config_get<spectra::CohortConfig>(j, c.config);
    if (c.seed_opt->count()) cohort.seed = c.seed;
    cohort.validate();
    const auto ds = spectra::generate_cohort(cohort);
    spectra::save_dataset(ds, require_out(c));
    log_info("generate: " + std::to_string(ds.size()) + " spectra from " +
             std::to_string(cohort.n_patients) + " patients -> " + c.out);
}

void cmd_split(const Common& c) {
    const json j = load_json_file(c.config);
    const auto ds = spectra::load_dataset(required_string(j, c.config, "dataset"));
    const int folds = config_field(j, c.config, "folds", 10);
    uint64_t seed = config_field<uint64_t>(j, c.config, "seed", 0);
    if (c.seed_opt->count()) seed = c.seed;

    Rng rng(seed);
    const auto splits = spectra::split_leave_subjects_out(ds, folds, rng);
    json out = json::array();
    for (size_t f = 0; f < splits.size(); ++f)
        out.push_back(json{{"fold", f},
                           {"test_patients", splits[f].test_patients},
                           {"train_indices", splits[f].train_indices},
                           {"test_indices", splits[f].test_indices}});
    emit_json(json{{"seed", seed}, {"folds", out}}, c.out);
}

void cmd_distill(const Common& c) {
    const json j = load_json_file(c.config);
    const auto ds = spectra::load_dataset(required_string(j, c.config, "dataset"));
    auto dcfg = config_field(j, c.config, "distill", distill::DistillConfig{});
    uint64_t seed = config_field<uint64_t>(j, c.config, "seed", 0);
    if (c.seed_opt->count()) seed = c.seed;

    const fs::path dir = out_directory(c);
    const auto res = distill::run_distillation(ds, dcfg, seed);
    distill::save_certain_set(res.certain, (dir / "certain_set.json").string());
    nn::save_network(res.network, (dir / "distill_net.ckpt").string());
    const auto shift = distill::distance_shift_report(ds, res.certain.member_indices);
    distill::save_distance_report_csv(shift, (dir / "distance_report.csv").string());
    log_info("distill: " + std::to_string(res.certain.member_indices.size()) + " of " +
             std::to_string(ds.size()) + " samples certain at theta " + fmt_double(dcfg.theta));
}

void cmd_augment(const Common& c) {
    const json j = load_json_file(c.config);
    const auto ds = spectra::load_dataset(required_string(j, c.config, "dataset"));
    auto acfg = config_field(j, c.config, "augment", augment::AugmentConfig{});
    if (c.seed_opt->count()) acfg.seed = c.seed;

    spectra::Dataset out;
    out.name = "augmented";
    out.spectra = augment::augment_set(ds.spectra, acfg);
    spectra::save_dataset(out, require_out(c));
    log_info("augment: " + std::to_string(out.size()) + " samples (" +
             augment::strategy_name(acfg.strategy) + ") -> " + c.out);
}

void cmd_train(const Common& c) {
    const json j = load_json_file(c.config);
    const auto train_ds = spectra::load_dataset(required_string(j, c.config, "dataset"));
    spectra::Dataset valid_ds;
    if (const auto vp = config_field<std::string>(j, c.config, "valid_dataset", ""); !vp.empty())
        valid_ds = spectra::load_dataset(vp);
    const auto ncfg = config_field(j, c.config, "network", nn::NetworkConfig{});
    auto tcfg = config_field(j, c.config, "train", nn::TrainConfig{});
    uint64_t seed = config_field<uint64_t>(j, c.config, "seed", 0);
    if (c.seed_opt->count()) seed = c.seed;
    ncfg.validate();

    const fs::path dir = out_directory(c);
    Rng init_rng = Rng(seed).child(0x817);
    nn::Network net = nn::Network::init(ncfg, init_rng);
    tcfg.seed = Rng(seed).child(0x7EA1).seed();
    const nn::TrainLog log = nn::train(net, train_ds, valid_ds, tcfg);
    nn::save_network(net, (dir / "net.ckpt").string(), nullptr, &log);
    save_json_file(json(log), (dir / "train_log.json").string());
    log_info("train: " + std::to_string(log.epochs.size()) + " epochs, best " +
             std::to_string(log.best_epoch));
}

void cmd_evaluate(const Common& c) {
    const json j = load_json_file(c.config);
    const auto ds = spectra::load_dataset(required_string(j, c.config, "dataset"));
    const auto loaded = nn::load_network(required_string(j, c.config, "checkpoint"));
    emit_json(json(evaluate_dataset(loaded.net, ds)), c.out);
}

void cmd_cam(const Common& c) {
    const json j = load_json_file(c.config);
    const auto ds = spectra::load_dataset(required_string(j, c.config, "dataset"));
    const auto loaded = nn::load_network(required_string(j, c.config, "checkpoint"));
    const auto index = config_field<int64_t>(j, c.config, "index", 0);
    const int class_index = config_field(j, c.config, "class_index", 1);
    const bool linear = config_field(j, c.config, "linear", false);
    if (index < 0 || index >= static_cast<int64_t>(ds.size()))
        throw ConfigError(c.config + ": \"index\" outside the dataset (size " +
                          std::to_string(ds.size()) + ")");

    const auto& spectrum = ds.spectra[index];
    const auto cam = analyze::class_activation_map(loaded.net, spectrum, class_index, linear);
    analyze::save_cam_csv(cam, spectrum, require_out(c));
    log_info("cam: sample " + std::to_string(index) + " class " + std::to_string(class_index) +
             " logit " + fmt_double(cam.logit));
}

void cmd_cluster(const Common& c) {
    const json j = load_json_file(c.config);
    const auto ds = spectra::load_dataset(required_string(j, c.config, "dataset"));
    const int k = config_field(j, c.config, "k", 0);
    const auto k_scan = config_field(j, c.config, "k_scan", std::vector<int>{});
    const int restarts = config_field(j, c.config, "restarts", 10);
    const int max_iter = config_field(j, c.config, "max_iter", 100);
    const double tol = config_field(j, c.config, "tol", 1e-6);
    uint64_t seed = config_field<uint64_t>(j, c.config, "seed", 0);
    if (c.seed_opt->count()) seed = c.seed;
    if (k < 1 && k_scan.empty())
        throw ConfigError(c.config + ": set \"k\" and/or a \"k_scan\" list");
    if (restarts < 1) throw ConfigError(c.config + ": restarts must be >= 1");

    const fs::path dir = out_directory(c);
    const auto points = analyze::dataset_points(ds);

    if (!k_scan.empty()) {
        const auto curve = analyze::elbow_scan(points, k_scan, seed, restarts, max_iter, tol);
        std::ofstream csv(dir / "elbow.csv", std::ios::binary);
        if (!csv) throw ParseError((dir / "elbow.csv").string() + ": cannot open for writing");
        csv << "k,inertia\n";
        for (const auto& p : curve) csv << p.k << "," << fmt_double(p.inertia) << "\n";
    }

    if (k >= 1) {
        Rng rng(seed);
        analyze::ClusterResult best;
        bool have = false;
        for (int r = 0; r < restarts; ++r) {
            auto res = analyze::kmeans(points, k,
                                       rng.child(static_cast<uint64_t>(k) * 1000003ull +
                                                 static_cast<uint64_t>(r))
                                           .seed(),
                                       max_iter, tol);
            if (!have || res.inertia < best.inertia) {
                best = std::move(res);
                have = true;
            }
        }
        analyze::save_cluster_result(best, (dir / "clusters.json").string());
        std::vector<int> labels(ds.size());
        for (size_t i = 0; i < ds.size(); ++i) labels[i] = ds.spectra[i].label;
        analyze::save_crosstab_csv(analyze::crosstab(best.assignments, labels, k),
                                   (dir / "crosstab.csv").string());

        const auto profiles = analyze::cluster_profiles(points, best);
        std::ofstream csv(dir / "profiles.csv", std::ios::binary);
        if (!csv) throw ParseError((dir / "profiles.csv").string() + ": cannot open for writing");
        csv << "cluster,count,position,mean,stddev\n";
        for (int cl = 0; cl < k; ++cl)
            for (size_t d = 0; d < profiles[cl].mean.size(); ++d)
                csv << cl << "," << profiles[cl].count << "," << d << ","
                    << fmt_double(profiles[cl].mean[d]) << ","
                    << fmt_double(profiles[cl].stddev[d]) << "\n";
        log_info("cluster: k " + std::to_string(k) + " inertia " + fmt_double(best.inertia));
    }
}

void cmd_sweep(const Common& c, const std::vector<std::string>& axes) {
    const json j = load_json_file(c.config);
    auto cfg = config_get<pipeline::ExperimentConfig>(j, c.config);
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.seed_opt->count()) cfg.seeds = {c.seed};
    if (c.jobs_opt->count()) cfg.jobs = c.jobs;

    if (!axes.empty()) {  // keep only the named axes of the configured grid
        pipeline::SweepGrid g;
        for (const auto& axis : axes) {
            if (axis == "alpha")
                g.alpha = cfg.sweep.alpha;
            else if (axis == "factor")
                g.factor = cfg.sweep.factor;
            else if (axis == "max_epoch")
                g.max_epoch = cfg.sweep.max_epoch;
            else if (axis == "strategy")
                g.strategy = cfg.sweep.strategy;
            else
                throw ConfigError("--axis must be alpha, factor, max_epoch, or strategy (got \"" +
                                  axis + "\")");
        }
        cfg.sweep = g;
    }
    // no grid at all: run the configured arm as a one-point sweep
    if (cfg.sweep.empty()) cfg.sweep.strategy = {cfg.strategy};

    const auto sweep = pipeline::run_sweep(cfg);
    for (const auto& p : sweep.points)
        log_info("sweep point " + p.strategy + " alpha " + fmt_double(p.alpha) + " factor " +
                 std::to_string(p.factor) + " E " + std::to_string(p.max_epoch) +
                 (p.ok ? ": mean AUC " + fmt_double(p.result.summary.mean_auc)
                       : ": FAILED " + p.error));
    std::printf("%s\n", sweep.sweep_dir.c_str());
}

void report_single_run(const fs::path& run_dir, const fs::path& out_dir) {
    const json summary = load_json_file((run_dir / "summary.json").string());

    {
        std::ofstream csv(out_dir / "cells.csv", std::ios::binary);
        if (!csv)
            throw ParseError((out_dir / "cells.csv").string() + ": cannot open for writing");
        csv << "fold,seed,ok,auc,sensitivity,specificity,accuracy,patient_accuracy,"
               "n_certain,n_augmented,truth_auc,error\n";
        for (const auto& cell : summary.at("cells")) {
            csv << cell.at("fold").get<int>() << "," << cell.at("seed").get<uint64_t>() << ","
                << (cell.at("ok").get<bool>() ? 1 : 0) << ",";
            if (cell.at("ok").get<bool>()) {
                const json& obs = cell.at("observed");
                csv << fmt_double(obs.at("auc").get<double>()) << ","
                    << fmt_double(obs.at("sensitivity").get<double>()) << ","
                    << fmt_double(obs.at("specificity").get<double>()) << ","
                    << fmt_double(obs.at("accuracy").get<double>()) << ","
                    << fmt_double(obs.value("patient_accuracy", 0.0)) << ","
                    << cell.at("n_certain").get<int64_t>() << ","
                    << cell.at("n_augmented").get<int64_t>() << ",";
                if (cell.contains("against_truth"))
                    csv << fmt_double(cell.at("against_truth").at("auc").get<double>());
                csv << ",";
            } else {
                csv << ",,,,,,,," << cell.at("error").get<std::string>();
            }
            csv << "\n";
        }
    }

    {
        std::ofstream csv(out_dir / "summary.csv", std::ios::binary);
        if (!csv)
            throw ParseError((out_dir / "summary.csv").string() + ": cannot open for writing");
        csv << "set,metric,mean,std\n";
        auto rows = [&csv](const char* set, const json& s) {
            for (const char* metric :
                 {"auc", "sensitivity", "specificity", "accuracy", "patient_accuracy"})
                csv << set << "," << metric << ","
                    << fmt_double(s.at(metric).at("mean").get<double>()) << ","
                    << fmt_double(s.at(metric).at("std").get<double>()) << "\n";
        };
        rows("observed", summary.at("summary"));
        if (summary.contains("summary_truth")) rows("truth", summary.at("summary_truth"));
    }

    const auto audit = pipeline::audit_no_leakage(run_dir.string());
    log_info("report: leakage audit clean over " + std::to_string(audit.cells_checked) +
             " cells in " + run_dir.string());
}

void cmd_report(const Common& c) {
    const fs::path dir(c.config);
    if (!fs::is_directory(dir)) throw ParseError(c.config + ": not a run directory");
    const fs::path out_dir = c.out.empty() ? dir : fs::path(c.out);
    fs::create_directories(out_dir);

    if (fs::exists(dir / "summary.json")) {
        report_single_run(dir, out_dir);
        return;
    }

    // sweep directory: one row per nested run
    std::vector<fs::path> runs;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && fs::exists(entry.path() / "summary.json"))
            runs.push_back(entry.path());
    std::sort(runs.begin(), runs.end());
    if (runs.empty()) throw ParseError(c.config + ": no summary.json here or in subdirectories");

    std::ofstream csv(out_dir / "sweep_report.csv", std::ios::binary);
    if (!csv)
        throw ParseError((out_dir / "sweep_report.csv").string() + ": cannot open for writing");
    csv << "strategy,alpha,factor,max_epoch,run_dir,n_cells,n_failed,mean_auc,std_auc,"
           "truth_mean_auc,truth_std_auc\n";
    for (const auto& run : runs) {
        const json cfg = load_json_file((run / "config.json").string());
        const json summary = load_json_file((run / "summary.json").string());
        csv << cfg.at("strategy").get<std::string>() << ","
            << fmt_double(cfg.at("augment").at("alpha").get<double>()) << ","
            << cfg.at("augment").at("factor").get<int>() << ","
            << cfg.at("distill").at("max_epoch").get<int>() << "," << run.filename().string()
            << "," << summary.at("cells").size() << "," << summary.at("n_failed").get<int>()
            << "," << fmt_double(summary.at("summary").at("auc").at("mean").get<double>()) << ","
            << fmt_double(summary.at("summary").at("auc").at("std").get<double>()) << ",";
        if (summary.contains("summary_truth"))
            csv << fmt_double(summary.at("summary_truth").at("auc").at("mean").get<double>())
                << ","
                << fmt_double(summary.at("summary_truth").at("auc").at("std").get<double>());
        else
            csv << ",";
        csv << "\n";
        report_single_run(run, run);
    }
    log_info("report: " + std::to_string(runs.size()) + " runs tabulated");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"specmix: noisy-label spectra pipeline (generate, distill, augment, train, "
                 "evaluate, analyze)"};
    app.require_subcommand(1);

    Common c_generate, c_split, c_distill, c_augment, c_train, c_evaluate, c_cam, c_cluster,
        c_sweep, c_report;
    std::vector<std::string> sweep_axes;

    add_common(app.add_subcommand("generate", "synthesize a labeled cohort CSV"), c_generate,
               "cohort config (JSON)");
    add_common(app.add_subcommand("split", "patient-wise cross-validation folds"), c_split,
               "JSON with dataset, folds, seed");
    add_common(app.add_subcommand("distill", "confidence-threshold distillation"), c_distill,
               "JSON with dataset, distill, seed");
    add_common(app.add_subcommand("augment", "mix new samples from a certain set"), c_augment,
               "JSON with dataset, augment");
    add_common(app.add_subcommand("train", "train a residual 1D CNN"), c_train,
               "JSON with dataset, valid_dataset, network, train, seed");
    add_common(app.add_subcommand("evaluate", "score a checkpoint on a dataset"), c_evaluate,
               "JSON with dataset, checkpoint");
    add_common(app.add_subcommand("cam", "class activation map for one spectrum"), c_cam,
               "JSON with checkpoint, dataset, index, class_index, linear");
    add_common(app.add_subcommand("cluster", "k-means, elbow curve, cross tabs"), c_cluster,
               "JSON with dataset, k, k_scan, restarts, seed");
    auto* sweep_cmd = app.add_subcommand("sweep", "cross-validated experiment grid");
    add_common(sweep_cmd, c_sweep, "experiment config (JSON)");
    sweep_cmd->add_option("--axis", sweep_axes,
                          "restrict the sweep to these grid axes (repeatable)");
    add_common(app.add_subcommand("report", "regenerate tables from a run directory"), c_report,
               "run or sweep directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const auto run = [&](const char* verb, const Common& c, auto&& fn) -> int {
        if (!app.get_subcommand(verb)->parsed()) return -1;
        set_verbose(c.verbose);
        try {
            fn();
            return 0;
        } catch (const ConfigError& e) {
            std::fprintf(stderr, "[specmix] config error: %s\n", e.what());
            return 2;
        } catch (const ParseError& e) {
            std::fprintf(stderr, "[specmix] input error: %s\n", e.what());
            return 2;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "[specmix] error: %s\n", e.what());
            return 1;
        }
    };

    int code;
    if ((code = run("generate", c_generate, [&] { cmd_generate(c_generate); })) >= 0) return code;
    if ((code = run("split", c_split, [&] { cmd_split(c_split); })) >= 0) return code;
    if ((code = run("distill", c_distill, [&] { cmd_distill(c_distill); })) >= 0) return code;
    if ((code = run("augment", c_augment, [&] { cmd_augment(c_augment); })) >= 0) return code;
    if ((code = run("train", c_train, [&] { cmd_train(c_train); })) >= 0) return code;
    if ((code = run("evaluate", c_evaluate, [&] { cmd_evaluate(c_evaluate); })) >= 0) return code;
    if ((code = run("cam", c_cam, [&] { cmd_cam(c_cam); })) >= 0) return code;
    if ((code = run("cluster", c_cluster, [&] { cmd_cluster(c_cluster); })) >= 0) return code;
    if ((code = run("sweep", c_sweep, [&] { cmd_sweep(c_sweep, sweep_axes); })) >= 0) return code;
    if ((code = run("report", c_report, [&] { cmd_report(c_report); })) >= 0) return code;
    return 2;  // unreachable: require_subcommand guarantees one verb parsed
}

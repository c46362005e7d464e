#include "specmix/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

#include "specmix/common.hpp"
#include "specmix/config_io.hpp"
#include "specmix/rng.hpp"
#include "json.hpp"

namespace specmix::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using spectra::Dataset;

namespace {

// seed-derivation labels, one per independent stream
constexpr uint64_t kFoldStream = 0xF01D;
constexpr uint64_t kValidStream = 0x5A11D;
constexpr uint64_t kSmoteStream = 0x53075;
constexpr uint64_t kDistillStream = 0xD157;
constexpr uint64_t kInitStream = 0x817;
constexpr uint64_t kTrainStream = 0x7EA1;
constexpr uint64_t kAugmentStream = 0xA76;

bool known_strategy(const std::string& s) {
    return s == "none" || s == "same" || s == "other" || s == "both" || s == "noise";
}

std::map<std::string, int> majority_patient_labels(const Dataset& ds, bool use_true) {
    std::map<std::string, std::map<int, int>> votes;
    for (const auto& s : ds.spectra) ++votes[s.patient_id][use_true ? s.true_label : s.label];
    std::map<std::string, int> out;
    for (const auto& [pid, counts] : votes) {
        int best_label = 0, best_count = -1;
        for (const auto& [label, count] : counts) {
            if (count > best_count) {  // ties resolve to the lower label
                best_count = count;
                best_label = label;
            }
        }
        out[pid] = best_label;
    }
    return out;
}

eval::EvalReport evaluate_fold(const nn::Network& net, const Dataset& test, bool use_true) {
    const Tensor probs = nn::predict_proba(net, test);
    std::vector<double> scores(test.size());
    std::vector<std::vector<double>> rows(test.size());
    std::vector<int> labels(test.size());
    std::vector<std::string> ids(test.size());
    for (size_t i = 0; i < test.size(); ++i) {
        scores[i] = probs.at2(static_cast<int64_t>(i), 1);
        rows[i] = {probs.at2(static_cast<int64_t>(i), 0), probs.at2(static_cast<int64_t>(i), 1)};
        labels[i] = use_true ? test.spectra[i].true_label : test.spectra[i].label;
        ids[i] = test.spectra[i].patient_id;
    }
    return eval::evaluate(labels, scores, ids, majority_patient_labels(test, use_true), rows);
}

std::vector<std::string> sorted_unique_patients(const Dataset& ds) {
    auto ids = ds.patient_ids();
    std::sort(ids.begin(), ids.end());
    return ids;
}

void write_json(const json& j, const fs::path& path) { save_json_file(j, path.string()); }

struct CellArtifacts {
    std::vector<std::string> pool_patients;     // every patient the model trained on
    std::vector<std::string> certain_patients;  // subset that came through distillation
    std::vector<int> fallback_classes;
};

CellResult run_cell(const ExperimentConfig& cfg, const Dataset& dataset,
                    const spectra::FoldSplit& split,
                    const std::vector<std::string>& valid_patients, int fold, uint64_t seed,
                    const fs::path& cell_dir) {
    CellResult cell;
    cell.fold = fold;
    cell.seed = seed;

    const std::set<std::string> valid_lookup(valid_patients.begin(), valid_patients.end());
    std::vector<size_t> train_idx, valid_idx;
    for (size_t i : split.train_indices) {
        if (valid_lookup.count(dataset.spectra[i].patient_id))
            valid_idx.push_back(i);
        else
            train_idx.push_back(i);
    }
    Dataset train_ds = dataset.subset(train_idx);
    train_ds.name = "train";
    Dataset valid_ds = dataset.subset(valid_idx);
    valid_ds.name = "valid";
    Dataset test_ds = dataset.subset(split.test_indices);
    test_ds.name = "test";
    if (train_ds.empty() || test_ds.empty())
        throw std::runtime_error("empty train or test split");

    Rng cell_rng(seed);
    Rng smote_rng = cell_rng.child(kSmoteStream);
    Dataset pool = spectra::oversample_minority(train_ds, smote_rng);

    CellArtifacts art;
    Dataset train_pool;
    train_pool.name = "train_pool";

    if (cfg.strategy == "none") {
        train_pool = pool;
    } else {
        distill::DistillResult dres =
            distill::run_distillation(pool, cfg.distill, cell_rng.child(kDistillStream).seed());
        distill::save_certain_set(dres.certain, (cell_dir / "certain_set.json").string());
        nn::save_network(dres.network, (cell_dir / "distill_net.ckpt").string());

        // Algorithm semantics run over the real data: SMOTE synthetics are
        // never promoted into the certain set
        std::map<int, std::vector<size_t>> certain_by_class;
        for (int64_t idx : dres.certain.member_indices)
            if (!pool.spectra[idx].synthetic)
                certain_by_class[pool.spectra[idx].label].push_back(static_cast<size_t>(idx));

        std::map<int, std::vector<size_t>> real_by_class;
        for (size_t i = 0; i < pool.size(); ++i)
            if (!pool.spectra[i].synthetic) real_by_class[pool.spectra[i].label].push_back(i);

        std::vector<size_t> members;
        for (const auto& [cls, all_members] : real_by_class) {
            auto it = certain_by_class.find(cls);
            if (it == certain_by_class.end() || it->second.empty()) {
                log_warn("fold " + std::to_string(fold) + " seed " + std::to_string(seed) +
                         ": certain set missing class " + std::to_string(cls) +
                         ", falling back to the full training pool for it");
                art.fallback_classes.push_back(cls);
                members.insert(members.end(), all_members.begin(), all_members.end());
            } else {
                members.insert(members.end(), it->second.begin(), it->second.end());
            }
        }
        std::sort(members.begin(), members.end());
        Dataset certain_ds = pool.subset(members);
        certain_ds.name = "certain";
        cell.n_certain = static_cast<int64_t>(certain_ds.size());
        art.certain_patients = sorted_unique_patients(certain_ds);

        augment::AugmentConfig acfg = cfg.augment;
        acfg.strategy = augment::strategy_from_name(cfg.strategy);
        acfg.seed = cell_rng.child(kAugmentStream).seed();
        std::vector<spectra::Spectrum> augmented;
        if (acfg.factor > 0) augmented = augment::augment_set(certain_ds.spectra, acfg);
        cell.n_augmented = static_cast<int64_t>(augmented.size());

        if (cfg.save_augmented && !augmented.empty()) {
            Dataset aug_ds;
            aug_ds.spectra = augmented;
            aug_ds.name = "augmented";
            spectra::save_dataset(aug_ds, (cell_dir / "augmented.csv").string());
        }

        train_pool = certain_ds;
        for (auto& s : augmented) train_pool.spectra.push_back(std::move(s));
    }
    art.pool_patients = sorted_unique_patients(train_pool);

    nn::TrainConfig tcfg = cfg.train;
    tcfg.seed = cell_rng.child(kTrainStream).seed();
    Rng init_rng = cell_rng.child(kInitStream);
    nn::Network net = nn::Network::init(cfg.distill.network, init_rng);
    nn::TrainLog train_log = nn::train(net, train_pool, valid_ds, tcfg);
    nn::save_network(net, (cell_dir / "primary_net.ckpt").string(), nullptr, &train_log);

    cell.observed = evaluate_fold(net, test_ds, false);
    cell.has_truth = std::all_of(test_ds.spectra.begin(), test_ds.spectra.end(),
                                 [](const spectra::Spectrum& s) { return s.true_label >= 0; });
    if (cell.has_truth) cell.against_truth = evaluate_fold(net, test_ds, true);

    // split manifest: the leakage audit replays these files
    json split_j{{"fold", fold},
                 {"seed", seed},
                 {"train_patients", sorted_unique_patients(train_ds)},
                 {"valid_patients", valid_patients},
                 {"test_patients", sorted_unique_patients(test_ds)},
                 {"pool_patients", art.pool_patients},
                 {"certain_patients", art.certain_patients},
                 {"n_train_spectra", train_ds.size()},
                 {"n_valid_spectra", valid_ds.size()},
                 {"n_test_spectra", test_ds.size()}};
    write_json(split_j, cell_dir / "split.json");

    json report{{"fold", fold},
                {"seed", seed},
                {"strategy", cfg.strategy},
                {"observed", cell.observed},
                {"train_log", train_log},
                {"n_certain", cell.n_certain},
                {"n_augmented", cell.n_augmented},
                {"fallback_classes", art.fallback_classes}};
    if (cell.has_truth) report["against_truth"] = cell.against_truth;
    write_json(report, cell_dir / "report.json");

    cell.ok = true;
    return cell;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (folds < 2) throw ConfigError("ExperimentConfig: folds must be >= 2");
    if (seeds.empty()) throw ConfigError("ExperimentConfig: seeds must be nonempty");
    if (!(valid_fraction >= 0.0 && valid_fraction < 1.0))
        throw ConfigError("ExperimentConfig: valid_fraction must lie in [0, 1)");
    if (!known_strategy(strategy))
        throw ConfigError("ExperimentConfig: unknown strategy \"" + strategy + "\"");
    for (const std::string& s : sweep.strategy)
        if (!known_strategy(s)) throw ConfigError("ExperimentConfig: unknown sweep strategy \"" + s + "\"");
    if (output_dir.empty()) throw ConfigError("ExperimentConfig: output_dir must be nonempty");
    if (jobs < 1) throw ConfigError("ExperimentConfig: jobs must be >= 1");
    distill.validate();
    augment.validate();
    if (dataset_path.empty()) cohort.validate();
}

double clean_label_fraction(const spectra::Dataset& dataset) {
    if (dataset.empty()) return std::numeric_limits<double>::quiet_NaN();
    int64_t clean = 0;
    for (const auto& s : dataset.spectra) {
        if (s.true_label < 0) return std::numeric_limits<double>::quiet_NaN();
        if (s.label == s.true_label) ++clean;
    }
    return static_cast<double>(clean) / static_cast<double>(dataset.size());
}

uint64_t config_hash(const ExperimentConfig& config) {
    // identity excludes artifact destinations
    json j{{"dataset_path", config.dataset_path},
           {"folds", config.folds},
           {"valid_fraction", config.valid_fraction},
           {"seeds", config.seeds},
           {"strategy", config.strategy},
           {"distill", config.distill},
           {"augment", config.augment},
           {"train", config.train},
           {"sweep", config.sweep}};
    if (config.dataset_path.empty()) j["cohort"] = config.cohort;
    const std::string text = j.dump();
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a 64
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();

    Dataset dataset = config.dataset_path.empty() ? spectra::generate_cohort(config.cohort)
                                                  : spectra::load_dataset(config.dataset_path);
    if (dataset.label_counts().size() < 2)
        throw std::invalid_argument("run_experiment: dataset must contain both classes");

    const uint64_t master = config.seeds.front();
    Rng fold_rng = Rng(master).child(kFoldStream);
    const auto splits = spectra::split_leave_subjects_out(dataset, config.folds, fold_rng);

    // per-fold validation patients, fixed across run seeds and sweep points
    std::vector<std::vector<std::string>> valid_patients(splits.size());
    for (size_t f = 0; f < splits.size(); ++f) {
        Dataset train_view = dataset.subset(splits[f].train_indices);
        std::vector<std::string> patients = train_view.patient_ids();
        const auto n_patients = static_cast<int64_t>(patients.size());
        int64_t n_valid =
            static_cast<int64_t>(std::floor(config.valid_fraction * static_cast<double>(n_patients)));
        n_valid = std::min(n_valid, n_patients - 2);
        if (n_valid > 0) {
            Rng vrng = Rng(master).child(kValidStream + f);
            vrng.shuffle(patients);
            valid_patients[f].assign(patients.begin(), patients.begin() + n_valid);
            std::sort(valid_patients[f].begin(), valid_patients[f].end());
        }
    }

    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    ExperimentResult result;
    const fs::path run_dir = fs::path(config.output_dir) / ("run_" + std::string(hash_hex));
    result.run_dir = run_dir.string();
    fs::create_directories(run_dir);
    // identity fields only: reruns of the same config byte-match even when
    // their artifacts land elsewhere
    json config_j(config);
    config_j.erase("output_dir");
    config_j.erase("save_augmented");
    config_j.erase("jobs");
    write_json(config_j, run_dir / "config.json");

    struct CellSpec {
        size_t fold;
        uint64_t seed;
        fs::path dir;
    };
    std::vector<CellSpec> grid;
    for (size_t f = 0; f < splits.size(); ++f)
        for (uint64_t seed : config.seeds)
            grid.push_back({f, seed,
                            run_dir / ("fold" + std::to_string(f) + "_seed" +
                                       std::to_string(seed))});
    for (const auto& spec : grid) fs::create_directories(spec.dir);

    result.cells.resize(grid.size());
    auto work_one = [&](size_t i) {
        const CellSpec& spec = grid[i];
        CellResult cell;
        try {
            cell = run_cell(config, dataset, splits[spec.fold], valid_patients[spec.fold],
                            static_cast<int>(spec.fold), spec.seed, spec.dir);
        } catch (const std::exception& e) {
            cell.fold = static_cast<int>(spec.fold);
            cell.seed = spec.seed;
            cell.ok = false;
            cell.error = e.what();
            log_warn("cell fold " + std::to_string(spec.fold) + " seed " +
                     std::to_string(spec.seed) + " failed: " + cell.error);
        }
        result.cells[i] = std::move(cell);
    };

    const size_t n_workers = std::min<size_t>(static_cast<size_t>(config.jobs), grid.size());
    if (n_workers <= 1) {
        for (size_t i = 0; i < grid.size(); ++i) work_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(n_workers);
        for (size_t w = 0; w < n_workers; ++w)
            workers.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1))
                    work_one(i);
            });
        for (auto& t : workers) t.join();
    }

    std::vector<eval::EvalReport> observed_ok, truth_ok;
    bool all_truth = true;
    for (const auto& cell : result.cells) {
        if (!cell.ok) {
            ++result.n_failed;
            continue;
        }
        observed_ok.push_back(cell.observed);
        if (cell.has_truth)
            truth_ok.push_back(cell.against_truth);
        else
            all_truth = false;
    }

    if (observed_ok.empty())
        throw std::runtime_error("run_experiment: every fold x seed cell failed");
    result.summary = eval::summarize(observed_ok);
    result.has_truth = all_truth && !truth_ok.empty();
    if (result.has_truth) result.summary_truth = eval::summarize(truth_ok);

    json cells_j = json::array();
    for (const auto& cell : result.cells) {
        json cj{{"fold", cell.fold}, {"seed", cell.seed}, {"ok", cell.ok}};
        if (cell.ok) {
            cj["observed"] = cell.observed;
            cj["n_certain"] = cell.n_certain;
            cj["n_augmented"] = cell.n_augmented;
            if (cell.has_truth) cj["against_truth"] = cell.against_truth;
        } else {
            cj["error"] = cell.error;
        }
        cells_j.push_back(std::move(cj));
    }
    json summary_j{{"config_hash", std::string(hash_hex)},
                   {"strategy", config.strategy},
                   {"folds", config.folds},
                   {"seeds", config.seeds},
                   {"n_failed", result.n_failed},
                   {"cells", cells_j},
                   {"summary", result.summary}};
    if (result.has_truth) summary_j["summary_truth"] = result.summary_truth;
    write_json(summary_j, run_dir / "summary.json");
    return result;
}

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    if (config.sweep.empty()) throw ConfigError("run_sweep: the sweep grid is empty");

    const SweepGrid& g = config.sweep;
    const std::vector<std::string> strategies =
        g.strategy.empty() ? std::vector<std::string>{config.strategy} : g.strategy;
    const std::vector<double> alphas =
        g.alpha.empty() ? std::vector<double>{config.augment.alpha} : g.alpha;
    const std::vector<int> factors =
        g.factor.empty() ? std::vector<int>{config.augment.factor} : g.factor;
    const std::vector<int> epochs =
        g.max_epoch.empty() ? std::vector<int>{config.distill.max_epoch} : g.max_epoch;

    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    SweepResult sweep;
    const fs::path sweep_dir = fs::path(config.output_dir) / ("sweep_" + std::string(hash_hex));
    sweep.sweep_dir = sweep_dir.string();
    fs::create_directories(sweep_dir);

    for (const std::string& strategy : strategies) {
        for (double alpha : alphas) {
            for (int factor : factors) {
                for (int max_epoch : epochs) {
                    SweepPoint point;
                    point.strategy = strategy;
                    point.alpha = alpha;
                    point.factor = factor;
                    point.max_epoch = max_epoch;

                    ExperimentConfig pt_cfg = config;
                    pt_cfg.sweep = SweepGrid{};
                    pt_cfg.strategy = strategy;
                    pt_cfg.augment.alpha = alpha;
                    pt_cfg.augment.factor = factor;
                    pt_cfg.distill.max_epoch = max_epoch;
                    pt_cfg.output_dir = sweep_dir.string();
                    try {
                        point.result = run_experiment(pt_cfg);
                        point.ok = true;
                    } catch (const std::exception& e) {
                        point.error = e.what();
                        log_warn("sweep point (" + strategy + ", alpha " + std::to_string(alpha) +
                                 ", factor " + std::to_string(factor) + ", E " +
                                 std::to_string(max_epoch) + ") failed: " + point.error);
                    }
                    sweep.points.push_back(std::move(point));
                }
            }
        }
    }

    std::ofstream csv(sweep_dir / "sweep.csv", std::ios::binary);
    if (!csv) throw ParseError((sweep_dir / "sweep.csv").string() + ": cannot open for writing");
    csv << "strategy,alpha,factor,max_epoch,ok,n_cells,n_failed,mean_auc,std_auc,"
           "truth_mean_auc,truth_std_auc\n";
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& p : sweep.points) {
        csv << p.strategy << "," << fmt(p.alpha) << "," << p.factor << "," << p.max_epoch << ","
            << (p.ok ? 1 : 0) << ",";
        if (p.ok) {
            csv << p.result.summary.n_folds << "," << p.result.n_failed << ","
                << fmt(p.result.summary.mean_auc) << "," << fmt(p.result.summary.std_auc) << ",";
            if (p.result.has_truth)
                csv << fmt(p.result.summary_truth.mean_auc) << ","
                    << fmt(p.result.summary_truth.std_auc);
            else
                csv << ",";
        } else {
            csv << "0,0,,,,";
        }
        csv << "\n";
    }
    if (!csv) throw ParseError((sweep_dir / "sweep.csv").string() + ": write failed");
    return sweep;
}

eval::EvalReport baseline_logistic(const Dataset& train, const Dataset& test) {
    if (train.empty() || test.empty())
        throw std::invalid_argument("baseline_logistic: empty train or test set");
    const int dim = spectra::kSpectrumSamples;
    const auto n = static_cast<int64_t>(train.size());

    std::vector<double> mean(dim, 0.0), scale(dim, 0.0);
    for (const auto& s : train.spectra)
        for (int d = 0; d < dim; ++d) mean[d] += s.values[d];
    for (double& v : mean) v /= static_cast<double>(n);
    for (const auto& s : train.spectra)
        for (int d = 0; d < dim; ++d) {
            const double diff = s.values[d] - mean[d];
            scale[d] += diff * diff;
        }
    for (double& v : scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (v < 1e-12) v = 1.0;
    }

    auto standardized = [&](const spectra::Spectrum& s, std::vector<double>& x) {
        for (int d = 0; d < dim; ++d) x[d] = (s.values[d] - mean[d]) / scale[d];
    };

    std::vector<int> y(train.size());
    for (size_t i = 0; i < train.size(); ++i) {
        y[i] = train.spectra[i].label;
        if (y[i] != 0 && y[i] != 1)
            throw std::invalid_argument("baseline_logistic: labels must be 0/1");
    }

    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    std::vector<double> x(dim);
    const double lr = 0.5;
    const double lambda = 1e-3;
    const int iters = 300;
    std::vector<double> grad(dim);
    for (int it = 0; it < iters; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (size_t i = 0; i < train.size(); ++i) {
            standardized(train.spectra[i], x);
            double z = b;
            for (int d = 0; d < dim; ++d) z += w[d] * x[d];
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double err = p - static_cast<double>(y[i]);
            for (int d = 0; d < dim; ++d) grad[d] += err * x[d];
            grad_b += err;
        }
        for (int d = 0; d < dim; ++d)
            w[d] -= lr * (grad[d] / static_cast<double>(n) + lambda * w[d]);
        b -= lr * grad_b / static_cast<double>(n);
    }

    std::vector<double> scores(test.size());
    std::vector<std::vector<double>> rows(test.size());
    std::vector<int> labels(test.size());
    std::vector<std::string> ids(test.size());
    for (size_t i = 0; i < test.size(); ++i) {
        standardized(test.spectra[i], x);
        double z = b;
        for (int d = 0; d < dim; ++d) z += w[d] * x[d];
        const double p = 1.0 / (1.0 + std::exp(-z));
        scores[i] = p;
        rows[i] = {1.0 - p, p};
        labels[i] = test.spectra[i].label;
        ids[i] = test.spectra[i].patient_id;
    }
    return eval::evaluate(labels, scores, ids, majority_patient_labels(test, false), rows);
}

LeakageAudit audit_no_leakage(const std::string& run_dir) {
    LeakageAudit audit;
    if (!fs::is_directory(run_dir))
        throw std::runtime_error("audit_no_leakage: " + run_dir + " is not a directory");

    auto as_set = [](const json& j) {
        return std::set<std::string>(j.begin(), j.end());
    };
    auto disjoint = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        for (const auto& v : a)
            if (b.count(v)) return false;
        return true;
    };
    auto subset_of = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        for (const auto& v : a)
            if (!b.count(v)) return false;
        return true;
    };

    std::vector<fs::path> cell_dirs;
    for (const auto& entry : fs::directory_iterator(run_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "split.json"))
            cell_dirs.push_back(entry.path());
    std::sort(cell_dirs.begin(), cell_dirs.end());

    for (const auto& dir : cell_dirs) {
        const json split = load_json_file((dir / "split.json").string());
        const auto train = as_set(split.at("train_patients"));
        const auto valid = as_set(split.at("valid_patients"));
        const auto test = as_set(split.at("test_patients"));
        const auto pool = as_set(split.at("pool_patients"));
        const auto certain = as_set(split.at("certain_patients"));
        const std::string where = dir.filename().string();

        if (!disjoint(train, test) || !disjoint(valid, test))
            throw std::runtime_error("leakage: test patients overlap train/valid in " + where);
        if (!disjoint(train, valid))
            throw std::runtime_error("leakage: validation patients overlap train in " + where);
        if (!subset_of(pool, train))
            throw std::runtime_error("leakage: training pool reaches beyond train patients in " +
                                     where);
        if (!subset_of(certain, train))
            throw std::runtime_error("leakage: certain set reaches beyond train patients in " +
                                     where);
        if (fs::exists(dir / "augmented.csv")) {
            const Dataset aug = spectra::load_dataset((dir / "augmented.csv").string());
            std::set<std::string> aug_patients;
            for (const auto& s : aug.spectra) aug_patients.insert(s.patient_id);
            if (!subset_of(aug_patients, train))
                throw std::runtime_error("leakage: augmented samples cite non-train patients in " +
                                         where);
        }
        ++audit.cells_checked;
    }
    if (audit.cells_checked == 0)
        throw std::runtime_error("audit_no_leakage: no cell manifests under " + run_dir);
    return audit;
}

}  // namespace specmix::pipeline

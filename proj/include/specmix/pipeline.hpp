#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specmix/augment.hpp"
#include "specmix/distill.hpp"
#include "specmix/eval.hpp"
#include "specmix/nn.hpp"
#include "specmix/spectra.hpp"

namespace specmix::pipeline {

// Grid axes for run_sweep; an empty axis means "use the base config value".
struct SweepGrid {
    std::vector<double> alpha;
    std::vector<int> factor;
    std::vector<int> max_epoch;
    std::vector<std::string> strategy;

    bool empty() const {
        return alpha.empty() && factor.empty() && max_epoch.empty() && strategy.empty();
    }
};

struct ExperimentConfig {
    spectra::CohortConfig cohort;
    std::string dataset_path;  // when nonempty, load this CSV instead of generating
    int folds = 10;
    double valid_fraction = 0.2;  // share of training patients held out for epoch selection
    std::vector<uint64_t> seeds{1, 2};
    // experiment arm: none (plain classifier), same, other, both, or noise
    std::string strategy = "both";
    distill::DistillConfig distill;  // distill.network is also the primary architecture
    augment::AugmentConfig augment;
    nn::TrainConfig train;  // primary model training
    SweepGrid sweep;
    std::string output_dir = "runs";
    bool save_augmented = true;
    // parallel fold x seed cells; results are identical at any value, only
    // log interleaving changes
    int jobs = 1;

    void validate() const;  // throws ConfigError
};

struct CellResult {
    int fold = 0;
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    eval::EvalReport observed;  // against the labels the model was shown
    eval::EvalReport against_truth;
    bool has_truth = false;  // true labels known for every test spectrum
    int64_t n_certain = 0;   // real members of the certain set
    int64_t n_augmented = 0;
};

struct ExperimentResult {
    std::string run_dir;
    eval::CvSummary summary;        // observed-label metrics over completed cells
    eval::CvSummary summary_truth;  // hidden-true-label metrics, when available
    bool has_truth = false;
    std::vector<CellResult> cells;
    int n_failed = 0;
};

// Fraction of spectra whose observed label matches the generator's hidden
// true label; NaN when any true label is unknown.
double clean_label_fraction(const spectra::Dataset& dataset);

// Hash of the experiment-defining fields (not output paths); keys the run
// directory so identical configs land in identical locations.
uint64_t config_hash(const ExperimentConfig& config);

// Full fold x seed grid: split by patient, oversample, distill, augment,
// train, evaluate; every intermediate artifact lands under the run directory.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SweepPoint {
    std::string strategy;
    double alpha = 0.0;
    int factor = 0;
    int max_epoch = 0;
    bool ok = false;
    std::string error;
    ExperimentResult result;
};

struct SweepResult {
    std::string sweep_dir;
    std::vector<SweepPoint> points;
};

// One run_experiment per grid point; fold splits are shared across points
// (fixed master seed), so comparisons are paired. Emits sweep.csv.
SweepResult run_sweep(const ExperimentConfig& config);

// L2-regularized logistic regression on the raw spectra; a deterministic
// sanity floor for synthetic cohorts.
eval::EvalReport baseline_logistic(const spectra::Dataset& train, const spectra::Dataset& test);

struct LeakageAudit {
    int cells_checked = 0;
};

// Re-reads persisted artifacts and verifies no test-fold patient reached
// training, distillation, or augmentation. Throws on violation.
LeakageAudit audit_no_leakage(const std::string& run_dir);

}  // namespace specmix::pipeline

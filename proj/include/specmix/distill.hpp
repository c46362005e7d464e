#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "specmix/nn.hpp"
#include "specmix/spectra.hpp"

namespace specmix::distill {

struct DistillConfig {
    double theta = 0.99;
    int max_epoch = 5;
    nn::NetworkConfig network;
    nn::TrainConfig train;

    void validate() const;  // throws ConfigError
};

// The certain-sample set C = C_1 ∪ ... ∪ C_E with per-epoch provenance.
struct CertainSet {
    std::vector<int64_t> member_indices;          // sorted, deduplicated
    std::map<int64_t, int> first_certain_epoch;   // index -> 1-based epoch of first inclusion
    std::vector<int64_t> per_epoch_counts;        // |C_e| for e = 1..max_epoch
};

// Rows of a [N, n_classes] probability table whose max entry is >= theta
// (inclusive boundary).
std::vector<int64_t> certain_from_probs(const Tensor& probs, double theta);

// Indices whose max predicted class probability is >= theta (inclusive).
// Label-blind: only the model outputs matter. Empty dataset -> empty result.
std::vector<int64_t> collect_certain(const nn::Network& model, const spectra::Dataset& dataset,
                                     double theta);

// Called after each epoch's sweep with the post-update network and that
// epoch's collection; used for checkpointing and replay tests.
using EpochObserver =
    std::function<void(int epoch, const nn::Network& net, const std::vector<int64_t>& certain)>;

struct DistillResult {
    CertainSet certain;
    nn::Network network;  // state after the final epoch
};

// Train a fresh network on the (noisy) observed labels for max_epoch epochs,
// sweeping the full dataset in eval mode after each epoch's updates.
DistillResult run_distillation(const spectra::Dataset& dataset, const DistillConfig& config, uint64_t seed,
                               const EpochObserver& observer = {});

struct ClassDistanceShift {
    int class_label = 0;
    std::vector<double> bin_edges;        // shared between full and distilled histograms
    std::vector<int64_t> full_counts;
    std::vector<int64_t> distilled_counts;
    double full_median = 0.0;
    double distilled_median = 0.0;        // NaN when the distilled side is empty
    bool distilled_empty = false;
};

struct DistanceShiftReport {
    std::vector<ClassDistanceShift> classes;  // ascending class label
};

// Per-class Euclidean distance to the opposite class centroid, full training
// set vs. certain subset. Centroids always come from the full set.
DistanceShiftReport distance_shift_report(const spectra::Dataset& dataset,
                                          const std::vector<int64_t>& certain_indices,
                                          int n_bins = 30);

void save_certain_set(const CertainSet& set, const std::string& path);
CertainSet load_certain_set(const std::string& path);
void save_distance_report_csv(const DistanceShiftReport& report, const std::string& path);

}  // namespace specmix::distill

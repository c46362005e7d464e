#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specmix/nn.hpp"
#include "specmix/spectra.hpp"

namespace specmix::analyze {

struct ClusterResult {
    int k = 0;
    std::vector<int> assignments;                // one per point, in [0, k)
    std::vector<std::vector<double>> centroids;  // k x dim
    double inertia = 0.0;                        // sum of squared distances to assigned centroid
    int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Stops at assignment fixpoint,
// centroid movement < tol, or max_iter. Empty clusters are re-seeded at the
// point currently farthest from its assigned centroid.
ClusterResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed,
                     int max_iter = 100, double tol = 1e-6);

struct ElbowPoint {
    int k = 0;
    double inertia = 0.0;           // best of the restarts
    double inertia_monotone = 0.0;  // running minimum over ascending k
};

std::vector<ElbowPoint> elbow_scan(const std::vector<std::vector<double>>& points,
                                   const std::vector<int>& k_values, uint64_t seed,
                                   int restarts = 10, int max_iter = 100, double tol = 1e-6);

struct CrossTab {
    std::vector<int> class_labels;              // ascending distinct labels
    std::vector<std::vector<int64_t>> counts;   // k x n_classes
    std::vector<std::vector<double>> percent;   // 100 * count / class total; NaN if class absent
};

// Column c of `percent` answers: what share of class c's members sit in each
// cluster? Present-class columns sum to 100.
CrossTab crosstab(const std::vector<int>& assignments, const std::vector<int>& labels, int k);

struct ClusterProfile {
    int64_t count = 0;
    std::vector<double> mean;
    std::vector<double> stddev;  // population std per coordinate
};

std::vector<ClusterProfile> cluster_profiles(const std::vector<std::vector<double>>& points,
                                             const ClusterResult& result);

struct Cam {
    int class_index = 0;
    double logit = 0.0;
    double bias = 0.0;
    std::vector<double> raw;        // final feature-map length
    std::vector<double> upsampled;  // input length
};

// raw[t] = sum_d w[d, class] * F[t, d] over the final pre-GAP feature map;
// mean(raw) + bias reproduces the class logit. Upsampling repeats each
// position (nearest neighbor) or linearly interpolates between bin centers.
Cam class_activation_map(const nn::Network& net, const spectra::Spectrum& spectrum,
                         int class_index, bool linear_upsample = false);

std::vector<double> spectrum_values(const spectra::Spectrum& s);
std::vector<std::vector<double>> dataset_points(const spectra::Dataset& dataset);

void save_cluster_result(const ClusterResult& result, const std::string& path);  // JSON
void save_crosstab_csv(const CrossTab& tab, const std::string& path);
void save_cam_csv(const Cam& cam, const spectra::Spectrum& spectrum, const std::string& path);

}  // namespace specmix::analyze

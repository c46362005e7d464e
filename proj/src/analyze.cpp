#include "specmix/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "specmix/common.hpp"
#include "specmix/rng.hpp"
#include "json.hpp"

namespace specmix::analyze {

using nlohmann::json;

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

// k-means++: each next centroid drawn with probability proportional to the
// squared distance to the nearest one chosen so far
std::vector<std::vector<double>> seed_centroids(const std::vector<std::vector<double>>& points,
                                                int k, Rng& rng) {
    std::vector<std::vector<double>> centroids;
    centroids.push_back(points[rng.index(points.size())]);
    std::vector<double> d2(points.size());
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(points[i], c));
            d2[i] = best;
            total += best;
        }
        size_t pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            for (size_t i = 0; i < points.size(); ++i) {
                r -= d2[i];
                if (r <= 0.0) {
                    pick = i;
                    break;
                }
                pick = i;  // numeric tail: fall through to the last point
            }
        } else {
            pick = rng.index(points.size());  // all points coincide with a centroid
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

double assign_all(const std::vector<std::vector<double>>& points,
                  const std::vector<std::vector<double>>& centroids,
                  std::vector<int>& assignments) {
    double inertia = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (size_t c = 0; c < centroids.size(); ++c) {
            const double d = sq_dist(points[i], centroids[c]);
            if (d < best) {
                best = d;
                best_c = static_cast<int>(c);
            }
        }
        assignments[i] = best_c;
        inertia += best;
    }
    return inertia;
}

}  // namespace

ClusterResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed,
                     int max_iter, double tol) {
    if (points.empty()) throw std::invalid_argument("kmeans: no points");
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");
    const size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw ShapeError("kmeans: points have mixed dimensions");
    {
        std::set<std::vector<double>> distinct(points.begin(), points.end());
        if (static_cast<size_t>(k) > distinct.size())
            throw std::invalid_argument("kmeans: k exceeds the number of distinct points");
    }

    Rng rng(seed);
    ClusterResult result;
    result.k = k;
    result.centroids = seed_centroids(points, k, rng);
    result.assignments.assign(points.size(), -1);

    double prev_inertia = std::numeric_limits<double>::infinity();
    std::vector<int> prev_assign;
    for (int iter = 1; iter <= max_iter; ++iter) {
        result.iterations = iter;
        double inertia = assign_all(points, result.centroids, result.assignments);

        // lloyd guarantee; tolerate only round-off
        if (inertia > prev_inertia * (1.0 + 1e-12) + 1e-12)
            throw std::logic_error("kmeans: inertia increased across an iteration");
        prev_inertia = inertia;

        // recompute centroids
        std::vector<std::vector<double>> next(static_cast<size_t>(k),
                                              std::vector<double>(dim, 0.0));
        std::vector<int64_t> counts(static_cast<size_t>(k), 0);
        for (size_t i = 0; i < points.size(); ++i) {
            auto& c = next[result.assignments[i]];
            for (size_t d = 0; d < dim; ++d) c[d] += points[i][d];
            ++counts[result.assignments[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (size_t d = 0; d < dim; ++d) next[c][d] /= static_cast<double>(counts[c]);
            } else {
                // re-seed at the point farthest from its assigned centroid
                size_t far = 0;
                double far_d = -1.0;
                for (size_t i = 0; i < points.size(); ++i) {
                    const double d = sq_dist(points[i], result.centroids[result.assignments[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                next[c] = points[far];
                result.assignments[far] = c;  // claim it so a second empty cluster picks elsewhere
                log_warn("kmeans: empty cluster " + std::to_string(c) + " re-seeded");
            }
        }

        double movement = 0.0;
        for (int c = 0; c < k; ++c) movement = std::max(movement, sq_dist(next[c], result.centroids[c]));
        const bool fixpoint = result.assignments == prev_assign;
        prev_assign = result.assignments;
        result.centroids = std::move(next);
        if (fixpoint || std::sqrt(movement) < tol) break;
    }

    result.inertia = assign_all(points, result.centroids, result.assignments);
    return result;
}

std::vector<ElbowPoint> elbow_scan(const std::vector<std::vector<double>>& points,
                                   const std::vector<int>& k_values, uint64_t seed,
                                   int restarts, int max_iter, double tol) {
    if (k_values.empty()) throw std::invalid_argument("elbow_scan: empty k range");
    if (restarts < 1) throw std::invalid_argument("elbow_scan: restarts must be >= 1");
    Rng rng(seed);
    std::vector<ElbowPoint> curve;
    for (int k : k_values) {
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < restarts; ++r) {
            const uint64_t run_seed =
                rng.child(static_cast<uint64_t>(k) * 1000003ull + static_cast<uint64_t>(r)).seed();
            best = std::min(best, kmeans(points, k, run_seed, max_iter, tol).inertia);
        }
        ElbowPoint pt;
        pt.k = k;
        pt.inertia = best;
        curve.push_back(pt);
    }
    std::vector<size_t> order(curve.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return curve[a].k < curve[b].k; });
    double running = std::numeric_limits<double>::infinity();
    for (size_t i : order) {
        running = std::min(running, curve[i].inertia);
        curve[i].inertia_monotone = running;
    }
    return curve;
}

CrossTab crosstab(const std::vector<int>& assignments, const std::vector<int>& labels, int k) {
    if (assignments.size() != labels.size())
        throw std::invalid_argument("crosstab: assignments and labels differ in length");
    if (k < 1) throw std::invalid_argument("crosstab: k must be >= 1");
    for (int a : assignments)
        if (a < 0 || a >= k) throw std::invalid_argument("crosstab: assignment out of range");

    CrossTab tab;
    {
        std::set<int> distinct(labels.begin(), labels.end());
        tab.class_labels.assign(distinct.begin(), distinct.end());
    }
    const size_t n_classes = tab.class_labels.size();
    tab.counts.assign(static_cast<size_t>(k), std::vector<int64_t>(n_classes, 0));
    std::vector<int64_t> totals(n_classes, 0);
    for (size_t i = 0; i < assignments.size(); ++i) {
        const size_t col = static_cast<size_t>(
            std::lower_bound(tab.class_labels.begin(), tab.class_labels.end(), labels[i]) -
            tab.class_labels.begin());
        ++tab.counts[assignments[i]][col];
        ++totals[col];
    }
    tab.percent.assign(static_cast<size_t>(k), std::vector<double>(n_classes, 0.0));
    for (int c = 0; c < k; ++c)
        for (size_t col = 0; col < n_classes; ++col)
            tab.percent[c][col] = totals[col] > 0
                                      ? 100.0 * static_cast<double>(tab.counts[c][col]) /
                                            static_cast<double>(totals[col])
                                      : std::numeric_limits<double>::quiet_NaN();
    return tab;
}

std::vector<ClusterProfile> cluster_profiles(const std::vector<std::vector<double>>& points,
                                             const ClusterResult& result) {
    if (points.size() != result.assignments.size())
        throw std::invalid_argument("cluster_profiles: points and assignments differ in length");
    const size_t dim = points.empty() ? 0 : points[0].size();
    std::vector<ClusterProfile> profiles(static_cast<size_t>(result.k));
    for (auto& p : profiles) {
        p.mean.assign(dim, 0.0);
        p.stddev.assign(dim, 0.0);
    }
    for (size_t i = 0; i < points.size(); ++i) {
        auto& p = profiles[result.assignments[i]];
        ++p.count;
        for (size_t d = 0; d < dim; ++d) p.mean[d] += points[i][d];
    }
    for (auto& p : profiles)
        if (p.count > 0)
            for (double& v : p.mean) v /= static_cast<double>(p.count);
    for (size_t i = 0; i < points.size(); ++i) {
        auto& p = profiles[result.assignments[i]];
        for (size_t d = 0; d < dim; ++d) {
            const double diff = points[i][d] - p.mean[d];
            p.stddev[d] += diff * diff;
        }
    }
    for (auto& p : profiles)
        if (p.count > 0)
            for (double& v : p.stddev) v = std::sqrt(v / static_cast<double>(p.count));
    return profiles;
}

Cam class_activation_map(const nn::Network& net, const spectra::Spectrum& spectrum,
                         int class_index, bool linear_upsample) {
    if (class_index < 0 || class_index >= net.config.n_classes)
        throw std::invalid_argument("class_activation_map: class index out of range");
    if (static_cast<int>(spectrum.values.size()) != net.config.input_length)
        throw ShapeError("class_activation_map: spectrum length does not match the network input");

    Tensor batch({1, net.config.input_length, 1});
    std::copy(spectrum.values.begin(), spectrum.values.end(), batch.data.begin());
    Tensor features;  // [1, L, C]
    net.forward_eval(batch, nullptr, &features);

    const int64_t L = features.shape[1];
    const int64_t C = features.shape[2];
    const Tensor& w = net.params.at("dense.weight");  // [C, n_classes]
    const Tensor& b = net.params.at("dense.bias");

    Cam cam;
    cam.class_index = class_index;
    cam.bias = b.data[class_index];
    cam.raw.assign(static_cast<size_t>(L), 0.0);
    for (int64_t t = 0; t < L; ++t) {
        double acc = 0.0;
        for (int64_t d = 0; d < C; ++d)
            acc += features.data[t * C + d] * w.at2(d, class_index);
        cam.raw[t] = acc;
    }
    double mean = 0.0;
    for (double v : cam.raw) mean += v;
    mean /= static_cast<double>(L);
    cam.logit = mean + cam.bias;

    const int64_t input_len = net.config.input_length;
    const int64_t repeat = input_len / L;
    if (repeat * L != input_len)
        throw ShapeError("class_activation_map: input length is not a multiple of the map length");
    cam.upsampled.assign(static_cast<size_t>(input_len), 0.0);
    if (!linear_upsample) {
        for (int64_t i = 0; i < input_len; ++i) cam.upsampled[i] = cam.raw[i / repeat];
    } else {
        // bin centers at repeat*t + (repeat-1)/2, clamped extrapolation
        for (int64_t i = 0; i < input_len; ++i) {
            const double pos =
                (static_cast<double>(i) - (static_cast<double>(repeat) - 1.0) / 2.0) /
                static_cast<double>(repeat);
            const double lo = std::clamp(std::floor(pos), 0.0, static_cast<double>(L - 1));
            const double hi = std::clamp(lo + 1.0, 0.0, static_cast<double>(L - 1));
            const double frac = std::clamp(pos - lo, 0.0, 1.0);
            cam.upsampled[i] = (1.0 - frac) * cam.raw[static_cast<size_t>(lo)] +
                               frac * cam.raw[static_cast<size_t>(hi)];
        }
    }
    return cam;
}

std::vector<double> spectrum_values(const spectra::Spectrum& s) { return s.values; }

std::vector<std::vector<double>> dataset_points(const spectra::Dataset& dataset) {
    std::vector<std::vector<double>> points;
    points.reserve(dataset.size());
    for (const auto& s : dataset.spectra) points.push_back(s.values);
    return points;
}

void save_cluster_result(const ClusterResult& result, const std::string& path) {
    json j;
    j["k"] = result.k;
    j["assignments"] = result.assignments;
    j["centroids"] = result.centroids;
    j["inertia"] = result.inertia;
    j["iterations"] = result.iterations;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
    if (!out) throw ParseError(path + ": write failed");
}

void save_crosstab_csv(const CrossTab& tab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << "cluster";
    for (int cls : tab.class_labels) out << ",class_" << cls << "_count,class_" << cls << "_pct";
    out << "\n";
    char buf[64];
    for (size_t c = 0; c < tab.counts.size(); ++c) {
        out << c;
        for (size_t col = 0; col < tab.class_labels.size(); ++col) {
            std::snprintf(buf, sizeof(buf), "%.6f", tab.percent[c][col]);
            out << "," << tab.counts[c][col] << "," << buf;
        }
        out << "\n";
    }
    if (!out) throw ParseError(path + ": write failed");
}

void save_cam_csv(const Cam& cam, const spectra::Spectrum& spectrum, const std::string& path) {
    if (spectrum.values.size() != cam.upsampled.size())
        throw ShapeError("save_cam_csv: spectrum and CAM lengths differ");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << "position,spectrum,cam_upsampled,cam_raw\n";
    char buf[256];
    const size_t repeat = cam.upsampled.size() / cam.raw.size();
    for (size_t i = 0; i < cam.upsampled.size(); ++i) {
        // raw value repeats over its 16-sample footprint for overlay plotting
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i, spectrum.values[i],
                      cam.upsampled[i], cam.raw[i / repeat]);
        out << buf;
    }
    if (!out) throw ParseError(path + ": write failed");
}

}  // namespace specmix::analyze

#include "specmix/distill.hpp"

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

namespace specmix::distill {

using nlohmann::json;

void DistillConfig::validate() const {
    if (!(theta > 0.5) || !(theta <= 1.0))
        throw ConfigError("DistillConfig: theta must lie in (0.5, 1]");
    if (max_epoch < 1) throw ConfigError("DistillConfig: max_epoch must be >= 1");
    network.validate();
}

std::vector<int64_t> certain_from_probs(const Tensor& probs, double theta) {
    if (probs.shape.size() != 2)
        throw ShapeError("certain_from_probs: expected a [N, n_classes] table");
    std::vector<int64_t> out;
    const int64_t n = probs.shape[0];
    const int64_t c = probs.shape[1];
    for (int64_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < c; ++j) best = std::max(best, probs.data[i * c + j]);
        if (best >= theta) out.push_back(i);
    }
    return out;
}

std::vector<int64_t> collect_certain(const nn::Network& model, const spectra::Dataset& dataset,
                                     double theta) {
    if (dataset.empty()) return {};
    return certain_from_probs(nn::predict_proba(model, dataset), theta);
}

DistillResult run_distillation(const spectra::Dataset& dataset, const DistillConfig& config, uint64_t seed,
                               const EpochObserver& observer) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("run_distillation: dataset is empty");
    {
        const auto counts = dataset.label_counts();
        if (counts.size() < 2)
            throw std::invalid_argument("run_distillation: dataset must contain both classes");
    }

    Rng rng(seed);
    nn::Network net = nn::Network::init(config.network, rng);
    const Tensor inputs = nn::to_input_tensor(dataset, config.network.input_length);
    const std::vector<int> labels = nn::observed_labels(dataset);

    nn::AdamState adam;
    int64_t step = 0;
    CertainSet certain;
    std::set<int64_t> members;

    for (int epoch = 1; epoch <= config.max_epoch; ++epoch) {
        const double loss =
            nn::train_one_epoch(net, inputs, labels, config.train, rng, adam, &step);
        if (!std::isfinite(loss))
            throw std::runtime_error("run_distillation: training diverged (non-finite loss) at epoch " +
                                     std::to_string(epoch));
        const std::vector<int64_t> picked = collect_certain(net, dataset, config.theta);
        certain.per_epoch_counts.push_back(static_cast<int64_t>(picked.size()));
        for (int64_t idx : picked) {
            if (members.insert(idx).second) certain.first_certain_epoch[idx] = epoch;
        }
        if (observer) observer(epoch, net, picked);
    }
    certain.member_indices.assign(members.begin(), members.end());
    return DistillResult{std::move(certain), std::move(net)};
}

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<int64_t> histogram(const std::vector<double>& values,
                               const std::vector<double>& edges) {
    const size_t n_bins = edges.size() - 1;
    std::vector<int64_t> counts(n_bins, 0);
    const double lo = edges.front();
    const double hi = edges.back();
    const double width = (hi - lo) / static_cast<double>(n_bins);
    for (double v : values) {
        auto bin = static_cast<int64_t>((v - lo) / width);
        bin = std::clamp<int64_t>(bin, 0, static_cast<int64_t>(n_bins) - 1);  // right edge inclusive
        ++counts[bin];
    }
    return counts;
}

}  // namespace

DistanceShiftReport distance_shift_report(const spectra::Dataset& dataset,
                                          const std::vector<int64_t>& certain_indices,
                                          int n_bins) {
    if (n_bins < 1) throw std::invalid_argument("distance_shift_report: n_bins must be >= 1");
    const auto counts = dataset.label_counts();
    if (counts.size() != 2)
        throw std::invalid_argument("distance_shift_report: dataset must contain exactly two classes");
    for (int64_t idx : certain_indices)
        if (idx < 0 || idx >= static_cast<int64_t>(dataset.size()))
            throw std::invalid_argument("distance_shift_report: certain index out of range");

    const int class_a = counts.begin()->first;
    const int class_b = std::next(counts.begin())->first;

    // centroids over the full set
    std::map<int, std::vector<double>> centroid;
    std::map<int, int64_t> n_class;
    for (int c : {class_a, class_b}) {
        centroid[c].assign(spectra::kSpectrumSamples, 0.0);
        n_class[c] = 0;
    }
    for (const spectra::Spectrum& s : dataset.spectra) {
        auto& acc = centroid[s.label];
        for (int i = 0; i < spectra::kSpectrumSamples; ++i) acc[i] += s.values[i];
        ++n_class[s.label];
    }
    for (int c : {class_a, class_b})
        for (double& v : centroid[c]) v /= static_cast<double>(n_class[c]);

    auto dist_to = [](const spectra::Spectrum& s, const std::vector<double>& ctr) {
        double acc = 0.0;
        for (int i = 0; i < spectra::kSpectrumSamples; ++i) {
            const double d = s.values[i] - ctr[i];
            acc += d * d;
        }
        return std::sqrt(acc);
    };

    std::set<int64_t> member_set(certain_indices.begin(), certain_indices.end());

    DistanceShiftReport report;
    for (int c : {class_a, class_b}) {
        const int other = (c == class_a) ? class_b : class_a;
        std::vector<double> full_d, dist_d;
        for (size_t i = 0; i < dataset.size(); ++i) {
            const spectra::Spectrum& s = dataset.spectra[i];
            if (s.label != c) continue;
            const double d = dist_to(s, centroid[other]);
            full_d.push_back(d);
            if (member_set.count(static_cast<int64_t>(i))) dist_d.push_back(d);
        }

        ClassDistanceShift shift;
        shift.class_label = c;
        double lo = *std::min_element(full_d.begin(), full_d.end());
        double hi = *std::max_element(full_d.begin(), full_d.end());
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        shift.bin_edges.resize(static_cast<size_t>(n_bins) + 1);
        for (int i = 0; i <= n_bins; ++i)
            shift.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / n_bins;
        shift.full_counts = histogram(full_d, shift.bin_edges);
        shift.distilled_counts = histogram(dist_d, shift.bin_edges);
        shift.full_median = median_of(full_d);
        shift.distilled_median = median_of(dist_d);
        shift.distilled_empty = dist_d.empty();
        if (shift.distilled_empty)
            log_warn("distance_shift_report: certain set has no samples of class " +
                     std::to_string(c));
        report.classes.push_back(std::move(shift));
    }
    return report;
}

void save_certain_set(const CertainSet& set, const std::string& path) {
    json j;
    j["member_indices"] = set.member_indices;
    json fce = json::object();
    for (const auto& [idx, epoch] : set.first_certain_epoch) fce[std::to_string(idx)] = epoch;
    j["first_certain_epoch"] = fce;
    j["per_epoch_counts"] = set.per_epoch_counts;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
    if (!out) throw ParseError(path + ": write failed");
}

CertainSet load_certain_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    CertainSet set;
    try {
        json j = json::parse(in);
        set.member_indices = j.at("member_indices").get<std::vector<int64_t>>();
        for (const auto& [key, val] : j.at("first_certain_epoch").items())
            set.first_certain_epoch[std::stoll(key)] = val.get<int>();
        set.per_epoch_counts = j.at("per_epoch_counts").get<std::vector<int64_t>>();
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return set;
}

void save_distance_report_csv(const DistanceShiftReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << "class,set,bin_lo,bin_hi,count\n";
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& shift : report.classes) {
        for (size_t i = 0; i + 1 < shift.bin_edges.size(); ++i) {
            out << shift.class_label << ",full," << fmt(shift.bin_edges[i]) << ","
                << fmt(shift.bin_edges[i + 1]) << "," << shift.full_counts[i] << "\n";
        }
        for (size_t i = 0; i + 1 < shift.bin_edges.size(); ++i) {
            out << shift.class_label << ",distilled," << fmt(shift.bin_edges[i]) << ","
                << fmt(shift.bin_edges[i + 1]) << "," << shift.distilled_counts[i] << "\n";
        }
    }
    if (!out) throw ParseError(path + ": write failed");
}

}  // namespace specmix::distill

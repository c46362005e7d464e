#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "specmix/common.hpp"
#include "specmix/distill.hpp"
#include "specmix/nn.hpp"
#include "specmix/rng.hpp"
#include "specmix/spectra.hpp"

using namespace specmix;
using namespace specmix::distill;

namespace {

Tensor prob_table(const std::vector<std::vector<double>>& rows) {
    Tensor t({static_cast<int64_t>(rows.size()), static_cast<int64_t>(rows[0].size())});
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            t.data[i * rows[i].size() + j] = rows[i][j];
    return t;
}

spectra::Dataset two_peak_cohort(int copies_per_class, double noise, uint64_t seed) {
    using namespace spectra;
    std::vector<MetabolitePeak> low{{"a", 60, 6.0, 2.0, 2.0}};
    std::vector<MetabolitePeak> high{{"b", 200, 3.0, 2.5, 2.5}, {"lip", 250, 8.0, 1.2, 1.2}};
    Rng rng(seed);
    Dataset d;
    for (int i = 0; i < copies_per_class; ++i) {
        Spectrum s0 = generate_spectrum(0, low, 0.0, noise, rng);
        s0.patient_id = "L" + std::to_string(i);
        s0.label = 0;
        d.spectra.push_back(std::move(s0));
        Spectrum s1 = generate_spectrum(1, high, 0.0, noise, rng);
        s1.patient_id = "H" + std::to_string(i);
        s1.label = 1;
        d.spectra.push_back(std::move(s1));
    }
    return d;
}

DistillConfig small_distill_config() {
    DistillConfig cfg;
    cfg.network.kernel_width = 8;
    cfg.network.initial_filters = 2;
    cfg.network.n_res_blocks = 1;
    cfg.network.dropout_rate = 0.2;
    cfg.network.subsample_blocks = {1};
    cfg.network.filter_double_blocks = {};
    cfg.train.batch_size = 16;
    cfg.train.learning_rate = 3e-3;
    return cfg;
}

spectra::Dataset constant_dataset(int per_class, double lo, double hi) {
    spectra::Dataset d;
    for (int i = 0; i < per_class; ++i) {
        spectra::Spectrum a;
        a.values.assign(spectra::kSpectrumSamples, lo);
        a.patient_id = "A" + std::to_string(i);
        a.label = 0;
        d.spectra.push_back(a);
        spectra::Spectrum b;
        b.values.assign(spectra::kSpectrumSamples, hi);
        b.patient_id = "B" + std::to_string(i);
        b.label = 1;
        d.spectra.push_back(b);
    }
    return d;
}

} // namespace

TEST_CASE("distill config bounds") {
    DistillConfig cfg = small_distill_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.theta = 1.0;
    CHECK_NOTHROW(cfg.validate());
    cfg.theta = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.theta = 1.0001;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.theta = 0.99;
    cfg.max_epoch = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("certainty boundary is inclusive") {
    Tensor probs = prob_table({{0.995, 0.005},
                               {0.9899, 0.0101},
                               {0.99, 0.01},
                               {0.01, 0.99},
                               {0.5, 0.5}});
    CHECK(certain_from_probs(probs, 0.99) == std::vector<int64_t>{0, 2, 3});
    // max of two probabilities is always >= 0.5
    CHECK(certain_from_probs(probs, 0.5) == std::vector<int64_t>{0, 1, 2, 3, 4});
    CHECK(certain_from_probs(probs, 1.0).empty());
}

TEST_CASE("theta monotonicity on a probability table") {
    Rng rng(77);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 200; ++i) {
        const double p = rng.uniform();
        rows.push_back({p, 1.0 - p});
    }
    Tensor probs = prob_table(rows);
    std::vector<double> thetas{0.55, 0.7, 0.9, 0.99, 1.0};
    for (size_t i = 0; i + 1 < thetas.size(); ++i) {
        auto loose = certain_from_probs(probs, thetas[i]);
        auto tight = certain_from_probs(probs, thetas[i + 1]);
        CHECK(std::includes(loose.begin(), loose.end(), tight.begin(), tight.end()));
    }
}

TEST_CASE("collect_certain ignores labels") {
    spectra::Dataset data = two_peak_cohort(12, 0.05, 5);
    DistillConfig cfg = small_distill_config();
    Rng rng(3);
    nn::Network net = nn::Network::init(cfg.network, rng);

    auto base = collect_certain(net, data, 0.6);
    spectra::Dataset permuted = data;
    for (auto& s : permuted.spectra) s.label = 1 - s.label;
    CHECK(collect_certain(net, permuted, 0.6) == base);
    CHECK(collect_certain(net, spectra::Dataset{}, 0.6).empty());
}

TEST_CASE("distillation unions per-epoch collections with provenance") {
    spectra::Dataset data = two_peak_cohort(20, 0.08, 11);
    DistillConfig cfg = small_distill_config();
    cfg.theta = 0.8;
    cfg.max_epoch = 4;

    struct Snapshot {
        nn::Network net;
        std::vector<int64_t> picked;
    };
    std::vector<Snapshot> snaps;
    DistillResult result = run_distillation(
        data, cfg, 42, [&](int epoch, const nn::Network& net, const std::vector<int64_t>& picked) {
            CHECK(epoch == static_cast<int>(snaps.size()) + 1);
            snaps.push_back({net, picked});
        });

    REQUIRE(snaps.size() == 4);
    REQUIRE(result.certain.per_epoch_counts.size() == 4);

    std::set<int64_t> uni;
    std::map<int64_t, int> first;
    for (size_t e = 0; e < snaps.size(); ++e) {
        CHECK(result.certain.per_epoch_counts[e] ==
              static_cast<int64_t>(snaps[e].picked.size()));
        // replaying collection from the epoch checkpoint reproduces the log
        CHECK(collect_certain(snaps[e].net, data, cfg.theta) == snaps[e].picked);
        for (int64_t idx : snaps[e].picked) {
            if (uni.insert(idx).second) first[idx] = static_cast<int>(e) + 1;
        }
    }
    CHECK(result.certain.member_indices ==
          std::vector<int64_t>(uni.begin(), uni.end()));
    CHECK(result.certain.first_certain_epoch == first);
    for (int64_t idx : result.certain.member_indices) {
        CHECK(idx >= 0);
        CHECK(idx < static_cast<int64_t>(data.size()));
    }

    // the returned network is the final epoch's state
    CHECK(collect_certain(result.network, data, cfg.theta) == snaps.back().picked);

    // same seed, same outcome
    DistillResult again = run_distillation(data, cfg, 42);
    CHECK(again.certain.member_indices == result.certain.member_indices);
    CHECK(again.certain.per_epoch_counts == result.certain.per_epoch_counts);
}

TEST_CASE("distillation input validation") {
    DistillConfig cfg = small_distill_config();
    CHECK_THROWS_AS(run_distillation(spectra::Dataset{}, cfg, 1), std::invalid_argument);

    spectra::Dataset single = two_peak_cohort(4, 0.05, 2);
    for (auto& s : single.spectra) s.label = 0;
    CHECK_THROWS_AS(run_distillation(single, cfg, 1), std::invalid_argument);

    cfg.max_epoch = 0;
    spectra::Dataset data = two_peak_cohort(4, 0.05, 2);
    CHECK_THROWS_AS(run_distillation(data, cfg, 1), ConfigError);
}

TEST_CASE("theta 1.0 may select nothing and that is fine") {
    spectra::Dataset data = two_peak_cohort(4, 0.05, 9);
    DistillConfig cfg = small_distill_config();
    cfg.theta = 1.0;
    cfg.max_epoch = 1;
    DistillResult result = run_distillation(data, cfg, 7);
    CHECK(result.certain.per_epoch_counts.size() == 1);  // ran, possibly empty
}

TEST_CASE("distance report on analytic constant spectra") {
    spectra::Dataset data = constant_dataset(5, 0.0, 10.0);
    std::vector<int64_t> all(data.size());
    for (size_t i = 0; i < data.size(); ++i) all[i] = static_cast<int64_t>(i);

    DistanceShiftReport rep = distance_shift_report(data, all, 10);
    REQUIRE(rep.classes.size() == 2);
    const double expect = 10.0 * std::sqrt(288.0);
    for (const auto& shift : rep.classes) {
        CHECK(shift.full_median == doctest::Approx(expect).epsilon(1e-12));
        CHECK(shift.distilled_median == doctest::Approx(expect).epsilon(1e-12));
        CHECK_FALSE(shift.distilled_empty);
        // certain set == full set -> identical histograms
        CHECK(shift.full_counts == shift.distilled_counts);
        int64_t total = 0;
        for (int64_t c : shift.full_counts) total += c;
        CHECK(total == 5);
    }
}

TEST_CASE("distance report flags a class missing from the certain set") {
    spectra::Dataset data = constant_dataset(3, 0.0, 10.0);
    // keep only class-0 members (even indices)
    std::vector<int64_t> certain{0, 2, 4};
    DistanceShiftReport rep = distance_shift_report(data, certain, 4);
    REQUIRE(rep.classes.size() == 2);
    CHECK_FALSE(rep.classes[0].distilled_empty);
    CHECK(rep.classes[1].distilled_empty);
    CHECK(std::isnan(rep.classes[1].distilled_median));
    for (int64_t c : rep.classes[1].distilled_counts) CHECK(c == 0);
}

TEST_CASE("distance report medians respond to which members are kept") {
    // class 0 samples sit at distance 10*sqrt(288) from the class-1 centroid,
    // except three that are pulled halfway toward it
    spectra::Dataset data = constant_dataset(6, 0.0, 10.0);
    for (int i : {0, 2, 4}) {
        for (auto& v : data.spectra[i].values) v = 5.0;
        data.spectra[i].label = 0;
    }
    std::vector<int64_t> keep_far;
    for (size_t i = 0; i < data.size(); ++i)
        if (i != 0 && i != 2 && i != 4) keep_far.push_back(static_cast<int64_t>(i));

    DistanceShiftReport rep = distance_shift_report(data, keep_far, 8);
    const auto& c0 = rep.classes[0];
    CHECK(c0.distilled_median > c0.full_median);

    std::vector<int64_t> bad_index{static_cast<int64_t>(data.size())};
    CHECK_THROWS_AS(distance_shift_report(data, bad_index, 8), std::invalid_argument);
    spectra::Dataset one_class = constant_dataset(3, 0.0, 10.0);
    for (auto& s : one_class.spectra) s.label = 0;
    CHECK_THROWS_AS(distance_shift_report(one_class, {}, 8), std::invalid_argument);
}

TEST_CASE("certain set json round trip") {
    CertainSet set;
    set.member_indices = {1, 4, 9, 10};
    set.first_certain_epoch = {{1, 1}, {4, 1}, {9, 2}, {10, 3}};
    set.per_epoch_counts = {2, 1, 2};

    const std::string path = "test_certain_set.json";
    save_certain_set(set, path);
    CertainSet loaded = load_certain_set(path);
    CHECK(loaded.member_indices == set.member_indices);
    CHECK(loaded.first_certain_epoch == set.first_certain_epoch);
    CHECK(loaded.per_epoch_counts == set.per_epoch_counts);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_certain_set("does_not_exist_xyz.json"), ParseError);
}

TEST_CASE("distance report csv lists both sets per class") {
    spectra::Dataset data = constant_dataset(4, 0.0, 10.0);
    std::vector<int64_t> all(data.size());
    for (size_t i = 0; i < data.size(); ++i) all[i] = static_cast<int64_t>(i);
    DistanceShiftReport rep = distance_shift_report(data, all, 5);

    const std::string path = "test_distance_report.csv";
    save_distance_report_csv(rep, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "class,set,bin_lo,bin_hi,count");
    int rows = 0;
    int distilled_rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.find(",distilled,") != std::string::npos) ++distilled_rows;
    }
    CHECK(rows == 2 * 2 * 5);  // classes x sets x bins
    CHECK(distilled_rows == 2 * 5);
    in.close();
    std::remove(path.c_str());
}

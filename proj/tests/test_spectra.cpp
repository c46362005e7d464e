#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "specmix/common.hpp"
#include "specmix/rng.hpp"
#include "specmix/spectra.hpp"

using namespace specmix;
using namespace specmix::spectra;

namespace {

std::vector<MetabolitePeak> peak_at(int center, double amp) {
    return {{"peak", center, 4.0, amp, amp}};
}

CohortConfig small_config() {
    CohortConfig c;
    c.n_patients = 4;
    c.voxels_min = 5;
    c.voxels_max = 5;
    c.class_profiles[0] = peak_at(60, 1.0);
    c.class_profiles[1] = peak_at(200, 1.5);
    c.noise_sigma = 0.01;
    c.seed = 42;
    return c;
}

std::string temp_path(const char* name) {
    return std::string("/tmp/specmix_test_") + name;
}

} // namespace

TEST_CASE("single fixed-amplitude peak reproduces the bump") {
    Rng rng(1);
    Spectrum s = generate_spectrum(0, peak_at(100, 2.0), 0.0, 0.0, rng);
    CHECK(s.values.size() == kSpectrumSamples);
    auto it = std::max_element(s.values.begin(), s.values.end());
    CHECK(it - s.values.begin() == 100);
    CHECK(*it == doctest::Approx(2.0));
    // pure Gaussian: value at center +- 4 samples is amp*exp(-0.5)
    CHECK(s.values[104] == doctest::Approx(2.0 * std::exp(-0.5)));
}

TEST_CASE("generation is deterministic under the seed") {
    Rng a(9), b(9);
    Spectrum s1 = generate_spectrum(1, peak_at(50, 1.0), 0.1, 0.05, a);
    Spectrum s2 = generate_spectrum(1, peak_at(50, 1.0), 0.1, 0.05, b);
    CHECK(s1.values == s2.values);
}

TEST_CASE("cohort counts are forced by the config") {
    Dataset d = generate_cohort(small_config());
    CHECK(d.size() == 20);
    CHECK(d.patient_ids().size() == 4);
    for (const auto& s : d.spectra) CHECK(s.label == s.true_label);
}

TEST_CASE("tumor_fraction fixes the patient class split") {
    CohortConfig c = small_config();
    c.n_patients = 10;
    c.tumor_fraction = 0.4;
    Dataset d = generate_cohort(c);
    std::set<std::string> tumor_patients;
    for (const auto& s : d.spectra)
        if (s.true_label == 1) tumor_patients.insert(s.patient_id);
    CHECK(tumor_patients.size() == 4);
}

TEST_CASE("asymmetric noise at rate 1 flips every healthy label") {
    CohortConfig c = small_config();
    c.n_patients = 10;
    c.label_noise.mode = LabelNoiseSpec::Mode::asymmetric;
    c.label_noise.rate = 1.0;
    Dataset d = generate_cohort(c);
    for (const auto& s : d.spectra) {
        if (s.true_label == 0) CHECK(s.label == 1);
        if (s.true_label == 1) CHECK(s.label == 1);
    }
}

TEST_CASE("asymmetric noise flips roughly the configured fraction") {
    CohortConfig c = small_config();
    c.n_patients = 80;
    c.voxels_min = 5;
    c.voxels_max = 5;
    c.tumor_fraction = 0.0;        // all healthy -> every spectrum is a flip candidate
    c.class_profiles[1] = peak_at(200, 1.5);
    c.label_noise.mode = LabelNoiseSpec::Mode::asymmetric;
    c.label_noise.rate = 0.2;
    Dataset d = generate_cohort(c);
    int flips = 0;
    for (const auto& s : d.spectra) flips += s.label != s.true_label;
    // 400 candidates, sd = sqrt(400*0.2*0.8) = 8; allow 4 sd
    CHECK(flips > 80 - 32);
    CHECK(flips < 80 + 32);
}

TEST_CASE("cohort generation is reproducible") {
    Dataset a = generate_cohort(small_config());
    Dataset b = generate_cohort(small_config());
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.spectra[i].values == b.spectra[i].values);
        CHECK(a.spectra[i].patient_id == b.spectra[i].patient_id);
        CHECK(a.spectra[i].label == b.spectra[i].label);
    }
}

TEST_CASE("leave-subjects-out folds partition patients") {
    CohortConfig c = small_config();
    c.n_patients = 11;
    c.voxels_min = 3;
    c.voxels_max = 7;
    Dataset d = generate_cohort(c);
    Rng rng(5);
    auto folds = split_leave_subjects_out(d, 3, rng);
    REQUIRE(folds.size() == 3);

    std::set<std::string> seen;
    size_t test_total = 0;
    for (const auto& f : folds) {
        for (const auto& p : f.test_patients) {
            CHECK(seen.count(p) == 0);   // disjoint
            seen.insert(p);
        }
        test_total += f.test_indices.size();
        // no spectrum in both halves, and no test patient in train
        std::set<std::string> test_pat(f.test_patients.begin(), f.test_patients.end());
        std::set<size_t> test_idx(f.test_indices.begin(), f.test_indices.end());
        for (size_t i : f.train_indices) {
            CHECK(test_idx.count(i) == 0);
            CHECK(test_pat.count(d.spectra[i].patient_id) == 0);
        }
        CHECK(f.train_indices.size() + f.test_indices.size() == d.size());
    }
    CHECK(seen.size() == 11);
    CHECK(test_total == d.size());
}

TEST_CASE("degenerate fold counts are rejected") {
    Dataset d = generate_cohort(small_config());
    Rng rng(1);
    CHECK_THROWS_AS(split_leave_subjects_out(d, 1, rng), std::invalid_argument);
    CHECK_THROWS_AS(split_leave_subjects_out(d, 5, rng), std::invalid_argument);  // 4 patients
}

TEST_CASE("balanced input is returned unchanged") {
    CohortConfig c = small_config();
    c.tumor_fraction = 0.5;
    Dataset d = generate_cohort(c);
    Rng rng(2);
    Dataset out = oversample_minority(d, rng);
    REQUIRE(out.size() == d.size());
    for (size_t i = 0; i < d.size(); ++i) CHECK(out.spectra[i].values == d.spectra[i].values);
}

TEST_CASE("oversampling balances 30/70 to 70/70") {
    CohortConfig c = small_config();
    c.n_patients = 10;
    c.voxels_min = 10;
    c.voxels_max = 10;
    c.tumor_fraction = 0.3;
    Dataset d = generate_cohort(c);
    auto counts = d.label_counts();
    REQUIRE(counts[1] == 30);
    REQUIRE(counts[0] == 70);

    Rng rng(3);
    Dataset out = oversample_minority(d, rng);
    auto balanced = out.label_counts();
    CHECK(balanced[0] == 70);
    CHECK(balanced[1] == 70);
    int synth = 0;
    for (const auto& s : out.spectra) {
        if (s.synthetic) {
            ++synth;
            CHECK(s.true_label == -1);
            CHECK(s.label == 1);
        }
    }
    CHECK(synth == 40);
}

TEST_CASE("synthetic minority points lie on segments between members") {
    // two constant minority spectra: every interpolate is a constant vector
    Dataset d;
    for (int i = 0; i < 2; ++i) {
        Spectrum s;
        s.values.assign(kSpectrumSamples, i == 0 ? 0.0 : 1.0);
        s.patient_id = i == 0 ? "A" : "B";
        s.label = 1;
        s.true_label = 1;
        d.spectra.push_back(s);
    }
    for (int i = 0; i < 6; ++i) {
        Spectrum s;
        s.values.assign(kSpectrumSamples, 5.0);
        s.patient_id = "C";
        s.label = 0;
        s.true_label = 0;
        d.spectra.push_back(s);
    }
    Rng rng(4);
    Dataset out = oversample_minority(d, rng);
    CHECK(out.label_counts()[1] == 6);
    for (const auto& s : out.spectra) {
        if (!s.synthetic) continue;
        const double v0 = s.values[0];
        CHECK(v0 >= 0.0);
        CHECK(v0 <= 1.0);
        for (double v : s.values) CHECK(v == v0);   // constant endpoints -> constant mix
    }
}

TEST_CASE("dataset csv round-trips exactly") {
    CohortConfig c = small_config();
    c.baseline_distortion_amplitude = 0.05;
    c.label_noise.mode = LabelNoiseSpec::Mode::asymmetric;
    c.label_noise.rate = 0.3;
    Dataset d = generate_cohort(c);
    const std::string path = temp_path("roundtrip.csv");
    save_dataset(d, path);
    Dataset back = load_dataset(path);
    REQUIRE(back.size() == d.size());
    for (size_t i = 0; i < d.size(); ++i) {
        CHECK(back.spectra[i].values == d.spectra[i].values);   // bitwise via %.17g
        CHECK(back.spectra[i].patient_id == d.spectra[i].patient_id);
        CHECK(back.spectra[i].label == d.spectra[i].label);
        CHECK(back.spectra[i].true_label == d.spectra[i].true_label);
        CHECK(back.spectra[i].synthetic == d.spectra[i].synthetic);
    }
    std::remove(path.c_str());
}

TEST_CASE("short rows are reported with their line number") {
    const std::string path = temp_path("short.csv");
    {
        Dataset d = generate_cohort(small_config());
        save_dataset(d, path);
        // drop the last field of the third record
        std::ifstream in(path);
        std::string all, line;
        int n = 0;
        while (std::getline(in, line)) {
            if (++n == 4) line = line.substr(0, line.rfind(','));
            all += line + "\n";
        }
        in.close();
        std::ofstream(path) << all;
    }
    try {
        load_dataset(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("empty file is rejected") {
    const std::string path = temp_path("empty.csv");
    std::ofstream(path).close();
    try {
        load_dataset(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("no records") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("invalid configs are named") {
    CohortConfig c = small_config();
    c.n_patients = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.class_profiles.erase(1);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.class_profiles[0][0].center_index = 400;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specmix/common.hpp"
#include "specmix/rng.hpp"

namespace specmix::spectra {

/// Samples per spectrum. Cohort generation and serialization are fixed to
/// this length; the network itself reads lengths from its config.
inline constexpr int kSpectrumSamples = 288;

/// One voxel's spectrum. `label` is the observed (possibly noisy) class,
/// `true_label` the generator's ground truth (-1 when unknown, e.g. for
/// synthetic samples). The implied chemical-shift axis runs 4.3 ppm at
/// index 0 down to 0.5 ppm at index 287.
struct Spectrum {
    std::vector<double> values;
    std::string patient_id;
    int label = 0;
    int true_label = 0;
    bool synthetic = false;
};

struct MetabolitePeak {
    std::string name;
    int center_index = 0;
    double width = 1.0;       // Gaussian sigma, in samples
    double amp_lo = 0.0;
    double amp_hi = 0.0;
};

struct LabelNoiseSpec {
    enum class Mode { none, asymmetric, symmetric };
    Mode mode = Mode::none;
    double rate = 0.0;
};

struct CohortConfig {
    int n_patients = 40;
    int voxels_min = 4;
    int voxels_max = 12;
    /// Fraction of patients whose true class is tumor.
    double tumor_fraction = 0.5;
    /// class (0 healthy / 1 tumor) -> metabolite profile
    std::map<int, std::vector<MetabolitePeak>> class_profiles;
    double baseline_distortion_amplitude = 0.0;
    double noise_sigma = 0.0;
    LabelNoiseSpec label_noise;
    uint64_t seed = 0;

    void validate() const;
};

struct Dataset {
    std::vector<Spectrum> spectra;
    std::string name;

    size_t size() const { return spectra.size(); }
    bool empty() const { return spectra.empty(); }
    /// Distinct patient ids in order of first appearance.
    std::vector<std::string> patient_ids() const;
    /// Count of spectra carrying each observed label.
    std::map<int, size_t> label_counts() const;
    Dataset subset(const std::vector<size_t>& indices) const;
};

/// One sum-of-Gaussian-peaks spectrum plus a random degree-<=3 polynomial
/// baseline and i.i.d. Gaussian noise. Draw order per call: one amplitude per
/// peak in profile order, four baseline coefficients, then one noise value
/// per sample.
Spectrum generate_spectrum(int true_class, const std::vector<MetabolitePeak>& profile,
                           double baseline_amp, double noise_sigma, Rng& rng);

Dataset generate_cohort(const CohortConfig& config);

struct FoldSplit {
    std::vector<size_t> train_indices;
    std::vector<size_t> test_indices;
    std::vector<std::string> test_patients;
};

/// Partition patients (not spectra) into k near-equal groups; fold i tests on
/// group i and trains on the rest. Requires 2 <= k <= #patients.
std::vector<FoldSplit> split_leave_subjects_out(const Dataset& dataset, int k, Rng& rng);

/// SMOTE-style balancing: synthesize minority-class samples on segments
/// between a minority sample and one of its k nearest minority neighbours.
/// Already-balanced input is returned unchanged.
Dataset oversample_minority(const Dataset& train, Rng& rng, int k_neighbors = 5);

/// CSV with header patient_id,label,true_label,v0,...,v287 (plus a trailing
/// `synthetic` column when the dataset contains synthetic samples).
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

} // namespace specmix::spectra

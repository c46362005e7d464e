#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specmix/spectra.hpp"

namespace specmix::augment {

enum class Strategy { same, other, both, noise };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct AugmentConfig {
    Strategy strategy = Strategy::both;
    double alpha = 0.5;       // mixing weight in Eq. 1
    int factor = 5;           // |A| / |C|
    double noise_sigma = -1;  // noise strategy only; negative -> derived from the data
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// Eq. 1: (1 - alpha) * target + alpha * partner. The result keeps the
// target's label and patient_id, is flagged synthetic, true_label unknown.
spectra::Spectrum mix_samples(const spectra::Spectrum& target, const spectra::Spectrum& partner,
                              double alpha);

// factor * |certain| synthetic samples; each certain member is the target
// exactly factor times (cycling), partners drawn uniformly with replacement
// from the strategy's pool. strategy == noise delegates to noise_augment.
std::vector<spectra::Spectrum> augment_set(const std::vector<spectra::Spectrum>& certain,
                                           const AugmentConfig& config);

// Baseline: source + i.i.d. Gaussian noise, labels preserved.
std::vector<spectra::Spectrum> noise_augment(const std::vector<spectra::Spectrum>& certain,
                                             double noise_sigma, int factor, uint64_t seed);

// 5% of the mean per-coordinate standard deviation.
double default_noise_sigma(const std::vector<spectra::Spectrum>& certain);

}  // namespace specmix::augment

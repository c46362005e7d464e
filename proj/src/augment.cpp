#include "specmix/augment.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "specmix/common.hpp"
#include "specmix/rng.hpp"

namespace specmix::augment {

using spectra::Spectrum;

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::same: return "same";
        case Strategy::other: return "other";
        case Strategy::both: return "both";
        case Strategy::noise: return "noise";
    }
    throw ConfigError("unknown augmentation strategy");
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "same") return Strategy::same;
    if (name == "other") return Strategy::other;
    if (name == "both") return Strategy::both;
    if (name == "noise") return Strategy::noise;
    throw ConfigError("unknown augmentation strategy \"" + name + "\"");
}

void AugmentConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("AugmentConfig: alpha must lie in [0, 1]");
    if (factor < 0) throw ConfigError("AugmentConfig: factor must be >= 0");
    strategy_name(strategy);  // rejects out-of-range enum values
}

Spectrum mix_samples(const Spectrum& target, const Spectrum& partner, double alpha) {
    if (target.values.size() != partner.values.size())
        throw ShapeError("mix_samples: spectra lengths differ");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("mix_samples: alpha must lie in [0, 1]");
    Spectrum out;
    out.values.resize(target.values.size());
    for (size_t i = 0; i < target.values.size(); ++i)
        out.values[i] = (1.0 - alpha) * target.values[i] + alpha * partner.values[i];
    out.label = target.label;
    out.patient_id = target.patient_id;
    out.true_label = -1;
    out.synthetic = true;
    return out;
}

std::vector<Spectrum> augment_set(const std::vector<Spectrum>& certain,
                                  const AugmentConfig& config) {
    config.validate();
    if (certain.empty()) throw ConfigError("augment_set: certain set is empty");

    if (config.strategy == Strategy::noise) {
        const double sigma =
            config.noise_sigma >= 0.0 ? config.noise_sigma : default_noise_sigma(certain);
        return noise_augment(certain, sigma, config.factor, config.seed);
    }

    const size_t n = certain.size();
    // partner index pools by target class
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < n; ++i) by_class[certain[i].label].push_back(i);
    std::map<int, std::vector<size_t>> others;
    for (const auto& [cls, members] : by_class) {
        auto& pool = others[cls];
        for (size_t i = 0; i < n; ++i)
            if (certain[i].label != cls) pool.push_back(i);
    }

    // fail fast when any target has no partner pool
    for (const auto& [cls, members] : by_class) {
        switch (config.strategy) {
            case Strategy::same:
                if (members.size() < 2)
                    throw ConfigError("augment_set: class " + std::to_string(cls) +
                                      " has no same-class partner");
                break;
            case Strategy::other:
                if (members.size() == n)
                    throw ConfigError("augment_set: class " + std::to_string(cls) +
                                      " has no opposite-class partner");
                break;
            case Strategy::both:
                if (n < 2) throw ConfigError("augment_set: need at least two samples to mix");
                break;
            case Strategy::noise: break;  // handled above
        }
    }

    Rng rng(config.seed);
    std::vector<Spectrum> out;
    out.reserve(static_cast<size_t>(config.factor) * n);
    for (size_t e = 0; e < static_cast<size_t>(config.factor) * n; ++e) {
        const size_t t = e % n;
        const Spectrum& target = certain[t];
        size_t p = t;
        switch (config.strategy) {
            case Strategy::same: {
                const auto& pool = by_class[target.label];
                do {
                    p = pool[rng.index(pool.size())];
                } while (p == t);
                break;
            }
            case Strategy::other: {
                const auto& pool = others[target.label];
                p = pool[rng.index(pool.size())];
                break;
            }
            case Strategy::both: {
                do {
                    p = rng.index(n);
                } while (p == t);
                break;
            }
            case Strategy::noise: break;
        }
        out.push_back(mix_samples(target, certain[p], config.alpha));
    }
    return out;
}

std::vector<Spectrum> noise_augment(const std::vector<Spectrum>& certain, double noise_sigma,
                                    int factor, uint64_t seed) {
    if (noise_sigma < 0.0)
        throw std::invalid_argument("noise_augment: noise_sigma must be >= 0");
    if (factor < 0) throw std::invalid_argument("noise_augment: factor must be >= 0");
    Rng rng(seed);
    std::vector<Spectrum> out;
    out.reserve(static_cast<size_t>(factor) * certain.size());
    for (size_t e = 0; e < static_cast<size_t>(factor) * certain.size(); ++e) {
        const Spectrum& src = certain[e % certain.size()];
        Spectrum s;
        s.values.resize(src.values.size());
        for (size_t i = 0; i < src.values.size(); ++i)
            s.values[i] = src.values[i] + noise_sigma * rng.normal();
        s.label = src.label;
        s.patient_id = src.patient_id;
        s.true_label = -1;
        s.synthetic = true;
        out.push_back(std::move(s));
    }
    return out;
}

double default_noise_sigma(const std::vector<Spectrum>& certain) {
    if (certain.empty()) throw ConfigError("default_noise_sigma: empty set");
    const size_t len = certain[0].values.size();
    const double n = static_cast<double>(certain.size());
    double mean_std = 0.0;
    for (size_t i = 0; i < len; ++i) {
        double mean = 0.0;
        for (const Spectrum& s : certain) mean += s.values[i];
        mean /= n;
        double var = 0.0;
        for (const Spectrum& s : certain) {
            const double d = s.values[i] - mean;
            var += d * d;
        }
        mean_std += std::sqrt(var / n);
    }
    return 0.05 * mean_std / static_cast<double>(len);
}

}  // namespace specmix::augment

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace specmix {

uint64_t splitmix64(uint64_t x);

/// Deterministic random stream. Child streams are derived from the seed and a
/// label, not from the generator state, so a task's stream does not depend on
/// how many draws its parent has made.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

    uint64_t seed() const { return seed_; }

    uint64_t next() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() { return (next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one value per call, no cached pair).
    double normal();

    /// Uniform integer in [0, n), unbiased. n must be > 0.
    size_t index(size_t n);

    /// Independent stream derived from (seed, label).
    Rng child(uint64_t label) const { return Rng(splitmix64(seed_ ^ splitmix64(label ^ 0x9e3779b97f4a7c15ull))); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

/// Seed for a derived task, mixed from a base seed and up to two tags.
uint64_t derive_seed(uint64_t base, uint64_t tag1, uint64_t tag2 = 0);

} // namespace specmix

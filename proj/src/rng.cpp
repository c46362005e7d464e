#include "specmix/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace specmix {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double Rng::normal() {
    // u1 in (0, 1] so the log is finite
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

size_t Rng::index(size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be > 0");
    uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next();
    } while (x >= bound);
    return static_cast<size_t>(x % n);
}

uint64_t derive_seed(uint64_t base, uint64_t tag1, uint64_t tag2) {
    return splitmix64(splitmix64(base ^ splitmix64(tag1)) ^ splitmix64(tag2 ^ 0x5851f42d4c957f2dull));
}

} // namespace specmix

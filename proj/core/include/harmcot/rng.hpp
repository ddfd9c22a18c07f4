#pragma once

// Deterministic random primitives. Everything trainable or sampled in this
// project goes through these so that runs are byte-reproducible across
// compilers; the standard <random> distributions are implementation-defined
// and are deliberately not used.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace harmcot {

// splitmix64, the usual seed mixer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return splitmix64(s);
}

// FNV-1a, stable across platforms (std::hash is not).
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro-free minimal generator: splitmix64 applied to a counter is
// statistically fine at this scale and trivially reproducible.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), rejection-sampled for exact uniformity.
    std::uint64_t next_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    // Standard normal via Box-Muller.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    }

  private:
    std::uint64_t state_;
};

// In-place Fisher-Yates shuffle using Rng (std::shuffle draws are
// implementation-defined, so we roll our own).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    if (v.empty()) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
        std::swap(v[i], v[j]);
    }
}

}  // namespace harmcot

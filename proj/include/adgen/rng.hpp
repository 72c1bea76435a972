// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace adgen {

// Counter-based deterministic RNG (splitmix64 output function). A draw is a
// pure function of (seed, counter), so any stochastic op can be replayed
// exactly, and independent streams are derived by hashing a label into a
// child seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }
    void set_counter(std::uint64_t c) { counter_ = c; }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in (0, 1): never returns 0 or 1, safe for log().
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two uniforms per call (no cached spare, so the
    // stream position stays a simple function of the call count).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double gumbel() { return -std::log(-std::log(uniform())); }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Index draw from unnormalized non-negative weights; caller guarantees
    // a positive total.
    size_t weighted_pick(const std::vector<double>& w) {
        double total = 0;
        for (double x : w) total += x;
        double r = uniform() * total;
        double acc = 0;
        for (size_t i = 0; i + 1 < w.size(); ++i) {
            acc += w[i];
            if (r < acc) return i;
        }
        return w.empty() ? 0 : w.size() - 1;
    }

    // Derive an independent child stream from a label and index.
    Rng child(std::string_view label, std::uint64_t index = 0) const {
        std::uint64_t h = 0xCBF29CE484222325ull ^ seed_;
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ull;
        }
        h ^= 0x9E3779B97F4A7C15ull + index;
        h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
        h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
        return Rng(h ^ (h >> 31));
    }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace adgen

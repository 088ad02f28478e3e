#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ztafl {

// Stable seed derivation: FNV-1a over the tag folded through splitmix64.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index);

// Deterministic RNG used throughout the simulator.
//
// std::mt19937_64 output is pinned by the standard, but the standard
// distributions and std::shuffle are not, so every sampling primitive here is
// hand-rolled. Two builds on different stdlibs produce identical streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), base_seed_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
    std::uint64_t uniform_u64(std::uint64_t n);

    // Uniform double in [0, 1) with 53 random bits.
    double uniform();

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (second value cached).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates shuffle with this generator.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_u64(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices drawn from [0, n) (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    // Child generator for a named substream. Derivation uses the seed this
    // generator was constructed with, so children do not depend on how much
    // the parent has been consumed.
    Rng child(std::string_view tag) const { return Rng(derive_seed(base_seed_, tag)); }
    Rng child(std::string_view tag, std::uint64_t index) const {
        return Rng(derive_seed(base_seed_, tag, index));
    }

    std::uint64_t base_seed() const { return base_seed_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t base_seed_;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace ztafl

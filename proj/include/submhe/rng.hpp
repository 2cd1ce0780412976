#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

#include "submhe/box_set.hpp"

namespace submhe {

/// Deterministic counter-based generator. Every draw is a pure hash of
/// (master_seed, replicate, channel, t, component), so parallel and
/// sequential execution produce bit-identical streams and any draw can be
/// reproduced in isolation.
class CounterRng {
public:
    enum Channel : std::uint64_t {
        process_disturbance = 1,
        measurement_noise = 2,
        multistart = 3,
        scratch = 4,
    };

    explicit CounterRng(std::uint64_t master_seed, std::uint64_t replicate = 0)
        : master_seed_(master_seed), replicate_(replicate) {}

    /// Uniform double in [0, 1) from the 53 top bits of the mixed counter.
    double uniform01(std::uint64_t channel, std::uint64_t t, std::uint64_t component) const {
        std::uint64_t h = mix(master_seed_ ^ 0x243f6a8885a308d3ull);
        h = mix(h ^ replicate_);
        h = mix(h ^ channel);
        h = mix(h ^ t);
        h = mix(h ^ component);
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi, std::uint64_t channel, std::uint64_t t,
                   std::uint64_t component) const {
        return lo + uniform01(channel, t, component) * (hi - lo);
    }

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t replicate() const { return replicate_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t master_seed_ = 0;
    std::uint64_t replicate_ = 0;
};

/// Componentwise uniform draw from a bounded box, one counter slot per
/// component.
inline Eigen::VectorXd sample_box_uniform(const BoxSet& set, const CounterRng& rng,
                                          std::uint64_t channel, std::uint64_t t) {
    if (!set.bounded())
        throw std::invalid_argument("sample_box_uniform: set must be bounded");
    Eigen::VectorXd x(set.dim());
    for (Eigen::Index i = 0; i < set.dim(); ++i)
        x[i] = rng.uniform(set.lower[i], set.upper[i], channel, t, static_cast<std::uint64_t>(i));
    return x;
}

}  // namespace submhe

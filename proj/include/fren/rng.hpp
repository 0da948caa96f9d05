#pragma once

#include "fren/ndiff.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace fren {

/// Named substreams. A master seed expands into one independent stream per
/// purpose so that, e.g., changing the number of noise draws leaves the data
/// shuffling untouched.
enum class Stream : std::uint64_t {
    Data = 1,
    Init,
    Epsilon,
    Eta,
    Xi,
    Zeta,
    Permutation,
    Shuffle,
    Rounding,
    Sampling,
    Replication,
};

/// Deterministic random source. split() derives children from the seed alone
/// (a counter-based split), never from the current engine state.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }
    Rng split(std::uint64_t stream) const;
    Rng split(Stream stream) const { return split(static_cast<std::uint64_t>(stream)); }
    Rng split(Stream stream, std::uint64_t index) const;

    double normal();
    double uniform();  // [0, 1)
    std::size_t uniform_index(std::size_t n);
    bool bernoulli(double p);
    double exponential(double rate);

    Matrix normal_matrix(std::size_t rows, std::size_t cols);
    std::vector<std::size_t> permutation(std::size_t n);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace fren

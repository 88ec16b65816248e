// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tensorvault/dtype.hpp"

namespace tv {

// Deterministic counter-based Gaussian sampler: sample i is derived from
// splitmix64(seed, i) uniforms through Box-Muller, so a (seed, index) pair
// fully determines the value regardless of evaluation order or thread
// count. See docs/cli.md for the exact construction.
struct GaussianPair {
    double z0;
    double z1;
};

GaussianPair gaussian_pair(std::uint64_t seed, std::uint64_t index);

// Expected bit distance between w ~ N(0, sigma_w^2) and w + delta,
// delta ~ N(0, sigma_delta^2), both encoded in `dtype`.
struct MonteCarloEstimate {
    double sigma_w = 0.0;
    double sigma_delta = 0.0;
    std::uint64_t n_samples = 0;
    double expected_distance = 0.0;
    double std_error = 0.0;
};

inline constexpr std::uint64_t kDefaultMcSamples = 100000;

MonteCarloEstimate mc_expected_distance(double sigma_w, double sigma_delta,
                                        std::uint64_t n_samples, const DType& dtype,
                                        std::uint64_t seed, unsigned threads = 0);

// Full Cartesian grid, row-major over sigma_w then sigma_delta.
std::vector<MonteCarloEstimate> mc_sweep(const std::vector<double>& sigma_w_grid,
                                         const std::vector<double>& sigma_delta_grid,
                                         std::uint64_t n_samples, const DType& dtype,
                                         std::uint64_t seed, unsigned threads = 0);

} // namespace tv

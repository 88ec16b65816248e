// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/montecarlo.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <vector>

#include "tensorvault/bitdist.hpp"
#include "tensorvault/errors.hpp"
#include "tensorvault/parallel.hpp"

namespace tv {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// uniform in (0, 1]: never 0, so log() below stays finite
double u01_open(std::uint64_t bits) {
    return double((bits >> 11) + 1) * 0x1.0p-53;
}

constexpr std::uint64_t kMcBlock = 1 << 14;

} // namespace

GaussianPair gaussian_pair(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t s = splitmix64(seed);
    const std::uint64_t x1 = splitmix64(s ^ splitmix64(2 * index));
    const std::uint64_t x2 = splitmix64(s ^ splitmix64(2 * index + 1));
    const double u1 = u01_open(x1);
    const double u2 = double(x2 >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

MonteCarloEstimate mc_expected_distance(double sigma_w, double sigma_delta,
                                        std::uint64_t n_samples, const DType& dtype,
                                        std::uint64_t seed, unsigned threads) {
    if (!(sigma_w > 0.0) || !(sigma_delta >= 0.0))
        fail(ErrorCode::InvalidSigma, "require sigma_w > 0 and sigma_delta >= 0");
    if (n_samples == 0) fail(ErrorCode::InvalidSigma, "n_samples must be >= 1");
    if (!dtype.is_bitdist_float())
        fail(ErrorCode::UnsupportedDType, "'" + dtype.label + "'");

    const std::uint64_t blocks = (n_samples + kMcBlock - 1) / kMcBlock;
    std::vector<std::uint64_t> block_sum(blocks, 0);
    std::vector<std::uint64_t> block_sumsq(blocks, 0);

    parallel_for(blocks, threads, [&](std::size_t bi) {
        const std::uint64_t begin = bi * kMcBlock;
        const std::uint64_t end = std::min(begin + kMcBlock, n_samples);
        std::uint64_t sum = 0, sumsq = 0;
        for (std::uint64_t i = begin; i < end; ++i) {
            auto [z0, z1] = gaussian_pair(seed, i);
            const double w = z0 * sigma_w;
            const double delta = z1 * sigma_delta;
            const std::uint32_t ea = encode_element_bits(w, dtype);
            const std::uint32_t eb = encode_element_bits(w + delta, dtype);
            const std::uint64_t bits = std::popcount(ea ^ eb);
            sum += bits;
            sumsq += bits * bits;
        }
        block_sum[bi] = sum;
        block_sumsq[bi] = sumsq;
    });

    std::uint64_t sum = 0, sumsq = 0;
    for (std::uint64_t bi = 0; bi < blocks; ++bi) {
        sum += block_sum[bi];
        sumsq += block_sumsq[bi];
    }

    MonteCarloEstimate est;
    est.sigma_w = sigma_w;
    est.sigma_delta = sigma_delta;
    est.n_samples = n_samples;
    est.expected_distance = double(sum) / double(n_samples);
    const double mean_sq = double(sumsq) / double(n_samples);
    const double var = mean_sq - est.expected_distance * est.expected_distance;
    est.std_error = var > 0 ? std::sqrt(var / double(n_samples)) : 0.0;
    return est;
}

std::vector<MonteCarloEstimate> mc_sweep(const std::vector<double>& sigma_w_grid,
                                         const std::vector<double>& sigma_delta_grid,
                                         std::uint64_t n_samples, const DType& dtype,
                                         std::uint64_t seed, unsigned threads) {
    if (sigma_w_grid.empty() || sigma_delta_grid.empty())
        fail(ErrorCode::InvalidSigma, "sigma grids must be non-empty");
    std::vector<MonteCarloEstimate> grid;
    grid.reserve(sigma_w_grid.size() * sigma_delta_grid.size());
    // Same seed for every cell: common random numbers keep the grid smooth
    // and make the monotonicity-in-sigma_delta property statistically tight.
    for (double sw : sigma_w_grid)
        for (double sd : sigma_delta_grid)
            grid.push_back(mc_expected_distance(sw, sd, n_samples, dtype, seed, threads));
    return grid;
}

} // namespace tv

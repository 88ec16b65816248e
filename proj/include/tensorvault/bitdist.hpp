// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tensorvault/bytes.hpp"
#include "tensorvault/dtype.hpp"
#include "tensorvault/safetensors.hpp"

namespace tv {

// Zero filter for the bit-distance metric. Pruning zeroes the same positions
// across related models; excluding both-zero pairs removes that artifact
// while keeping genuine zero-vs-nonzero flips. Negative zero counts as zero.
enum class ZeroPolicy {
    ExcludeBothZero,
    ExcludeEitherZero,
    IncludeAll,
};

ZeroPolicy zero_policy_from_string(const std::string& s);
const char* to_string(ZeroPolicy p);

struct SamplingPolicy {
    std::uint64_t stride = 1; // every k-th element per tensor
};

// Average differing bits per element over the pairs passing the zero filter,
// with a per-bit-position breakdown. Bit 0 is the least significant bit of
// the element encoding; for BF16 the sign bit is position 15, the exponent
// positions 7..14 and the mantissa positions 0..6.
struct BitDistanceReport {
    double distance = 0.0;
    std::uint64_t n_total = 0; // element pairs visited
    std::uint64_t n_used = 0;  // pairs surviving the zero filter
    std::vector<std::uint64_t> bit_counts; // per position, length = bit width
    std::vector<double> bit_fractions;     // counts / sum(counts)
    unsigned bit_width = 0;
    double coverage = 1.0;          // contributing elements / total elements
    std::uint64_t sample_stride = 1;

    // Distance restricted to the top 16 bit positions of each element.
    // Equals `distance` for 16-bit dtypes; used to apply the BF16-calibrated
    // clustering threshold to FP32 pairs.
    double threshold_distance = 0.0;

    std::uint64_t total_diff_bits() const;
    std::string to_json() const;
};

BitDistanceReport bit_distance(ByteView a, ByteView b, const DType& dtype,
                               ZeroPolicy policy = ZeroPolicy::ExcludeBothZero);

// One named tensor of a (possibly multi-file) model.
struct NamedTensorView {
    std::string name;
    DType dtype;
    std::vector<std::uint64_t> shape;
    ByteView bytes;
};

std::vector<NamedTensorView> tensor_views(const ParsedModelFile& parsed);

// Pairs tensors by name; only pairs with identical dtype and shape (and a
// float dtype the metric supports) contribute. Aggregates element counts
// across contributing tensors with a fixed reduction order.
BitDistanceReport model_bit_distance(std::span<const NamedTensorView> a,
                                     std::span<const NamedTensorView> b,
                                     SamplingPolicy sampling = {},
                                     ZeroPolicy policy = ZeroPolicy::ExcludeBothZero,
                                     unsigned threads = 0);

BitDistanceReport model_bit_distance(const ParsedModelFile& a, const ParsedModelFile& b,
                                     SamplingPolicy sampling = {},
                                     ZeroPolicy policy = ZeroPolicy::ExcludeBothZero);

struct DeltaHistogram {
    std::vector<double> bin_edges; // bins + 1
    std::vector<std::uint64_t> counts;
    double mean = 0.0;
    double stddev = 0.0;
    std::uint64_t n = 0;           // finite deltas binned
    std::uint64_t n_nonfinite = 0; // skipped (NaN/Inf operands)
};

DeltaHistogram delta_histogram(ByteView a, ByteView b, const DType& dtype,
                               std::size_t bins);

// Element decode/encode helpers shared with the Monte Carlo estimator and
// test oracles. Encoding rounds to nearest even.
double decode_element(const std::uint8_t* p, const DType& dtype);
std::uint32_t encode_element_bits(double value, const DType& dtype);

} // namespace tv

// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/bitdist.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include <json.hpp>

#include "tensorvault/errors.hpp"
#include "tensorvault/parallel.hpp"

namespace tv {

namespace {

float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = (h & 0x8000u) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1f;
    const std::uint32_t mant = h & 0x3ff;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            // subnormal: normalize into the float32 exponent range
            int e = -1;
            std::uint32_t m = mant;
            do {
                ++e;
                m <<= 1;
            } while ((m & 0x400) == 0);
            bits = sign | ((127 - 15 - e) << 23) | ((m & 0x3ff) << 13);
        }
    } else if (exp == 0x1f) {
        bits = sign | 0x7f800000u | (mant << 13);
    } else {
        bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

std::uint16_t float_to_half(float f) {
    std::uint32_t x;
    std::memcpy(&x, &f, 4);
    const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000);
    const std::uint32_t abs = x & 0x7fffffffu;
    if (abs >= 0x7f800000u) { // inf / nan
        std::uint16_t mant = abs > 0x7f800000u ? 0x0200 : 0;
        return sign | 0x7c00 | mant | static_cast<std::uint16_t>((abs >> 13) & 0x3ff);
    }
    if (abs >= 0x47800000u) // overflow -> inf
        return sign | 0x7c00;
    if (abs < 0x33000001u) // underflows to zero even after rounding
        return sign;
    std::uint32_t exp = abs >> 23;
    std::uint32_t mant = abs & 0x7fffffu;
    std::uint32_t shift;
    if (exp >= 113) { // normal half
        shift = 13;
        mant |= 0x800000u; // implicit bit, dropped again below
    } else { // subnormal half
        shift = 126 - exp;
        mant |= 0x800000u;
    }
    // round to nearest even at the dropped-bit boundary
    std::uint32_t kept = mant >> shift;
    std::uint32_t rem = mant & ((1u << shift) - 1);
    std::uint32_t half = 1u << (shift - 1);
    if (rem > half || (rem == half && (kept & 1)))
        ++kept;
    std::uint16_t out;
    if (exp >= 113) {
        kept &= 0x3ff * 2 + 1; // keep 11 bits incl. implicit, may carry into exponent
        std::uint32_t he = exp - 112;
        out = static_cast<std::uint16_t>((he << 10) + kept - 0x400);
    } else {
        out = static_cast<std::uint16_t>(kept);
    }
    return sign | out;
}

std::uint16_t float_to_bf16(float f) {
    std::uint32_t x;
    std::memcpy(&x, &f, 4);
    if ((x & 0x7fffffffu) > 0x7f800000u) // nan: keep it quiet after truncation
        return static_cast<std::uint16_t>((x >> 16) | 0x0040);
    std::uint32_t lsb = (x >> 16) & 1;
    return static_cast<std::uint16_t>((x + 0x7fffu + lsb) >> 16);
}

float bf16_to_float(std::uint16_t b) {
    std::uint32_t bits = static_cast<std::uint32_t>(b) << 16;
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

struct Accum {
    std::uint64_t n_total = 0;
    std::uint64_t n_used = 0;
    std::uint64_t diff_bits = 0;
    std::uint64_t high16_bits = 0; // set bits in the top 16 positions
    std::array<std::uint64_t, 32> counts{};

    void merge(const Accum& other) {
        n_total += other.n_total;
        n_used += other.n_used;
        diff_bits += other.diff_bits;
        high16_bits += other.high16_bits;
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    }
};

template <typename U>
void accumulate_pairs(const std::uint8_t* a, const std::uint8_t* b, std::uint64_t n,
                      std::uint64_t stride, ZeroPolicy policy, Accum& acc) {
    constexpr U sign_mask = U(1) << (sizeof(U) * 8 - 1);
    constexpr U magnitude_mask = static_cast<U>(~sign_mask);
    constexpr unsigned high16_shift = sizeof(U) * 8 - 16;
    for (std::uint64_t i = 0; i < n; i += stride) {
        U ua, ub;
        std::memcpy(&ua, a + i * sizeof(U), sizeof(U));
        std::memcpy(&ub, b + i * sizeof(U), sizeof(U));
        acc.n_total += 1;
        // +-0 both count as zero; pruning emits either encoding
        const bool za = (ua & magnitude_mask) == 0;
        const bool zb = (ub & magnitude_mask) == 0;
        if (policy == ZeroPolicy::ExcludeBothZero && za && zb) continue;
        if (policy == ZeroPolicy::ExcludeEitherZero && (za || zb)) continue;
        acc.n_used += 1;
        U x = ua ^ ub;
        acc.diff_bits += std::popcount(x);
        acc.high16_bits += std::popcount(static_cast<U>(x >> high16_shift));
        while (x) {
            acc.counts[std::countr_zero(x)] += 1;
            x &= x - 1;
        }
    }
}

void accumulate_dtype(ByteView a, ByteView b, const DType& dtype, std::uint64_t stride,
                      ZeroPolicy policy, Accum& acc) {
    const std::uint64_t n = a.size() / dtype.width;
    if (dtype.width == 2)
        accumulate_pairs<std::uint16_t>(a.data(), b.data(), n, stride, policy, acc);
    else
        accumulate_pairs<std::uint32_t>(a.data(), b.data(), n, stride, policy, acc);
}

BitDistanceReport report_from_accum(const Accum& acc, unsigned bit_width,
                                    std::uint64_t stride) {
    BitDistanceReport r;
    r.bit_width = bit_width;
    r.n_total = acc.n_total;
    r.n_used = acc.n_used;
    r.sample_stride = stride;
    r.bit_counts.assign(acc.counts.begin(), acc.counts.begin() + bit_width);
    r.bit_fractions.assign(bit_width, 0.0);
    std::uint64_t total = acc.diff_bits;
    if (total > 0)
        for (unsigned i = 0; i < bit_width; ++i)
            r.bit_fractions[i] = double(acc.counts[i]) / double(total);
    if (acc.n_used > 0) {
        r.distance = double(total) / double(acc.n_used);
        r.threshold_distance = double(acc.high16_bits) / double(acc.n_used);
    }
    return r;
}

} // namespace

ZeroPolicy zero_policy_from_string(const std::string& s) {
    if (s == "exclude-both-zero" || s == "exclude_both_zero") return ZeroPolicy::ExcludeBothZero;
    if (s == "exclude-either-zero" || s == "exclude_either_zero")
        return ZeroPolicy::ExcludeEitherZero;
    if (s == "include-all" || s == "include_all") return ZeroPolicy::IncludeAll;
    fail(ErrorCode::InvalidArgument, "unknown zero policy '" + s + "'");
}

const char* to_string(ZeroPolicy p) {
    switch (p) {
        case ZeroPolicy::ExcludeBothZero: return "exclude-both-zero";
        case ZeroPolicy::ExcludeEitherZero: return "exclude-either-zero";
        case ZeroPolicy::IncludeAll: return "include-all";
    }
    return "unknown";
}

std::uint64_t BitDistanceReport::total_diff_bits() const {
    std::uint64_t total = 0;
    for (auto c : bit_counts) total += c;
    return total;
}

std::string BitDistanceReport::to_json() const {
    nlohmann::json j{
        {"distance", distance},
        {"threshold_distance", threshold_distance},
        {"n_total", n_total},
        {"n_used", n_used},
        {"bit_width", bit_width},
        {"bit_counts", bit_counts},
        {"bit_fractions", bit_fractions},
        {"coverage", coverage},
        {"sample_stride", sample_stride},
    };
    return j.dump();
}

BitDistanceReport bit_distance(ByteView a, ByteView b, const DType& dtype,
                               ZeroPolicy policy) {
    if (!dtype.is_bitdist_float())
        fail(ErrorCode::UnsupportedDType,
             "bit distance requires BF16, F16 or F32, got '" + dtype.label + "'");
    if (a.size() != b.size())
        fail(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()) + " bytes");
    if (a.size() % dtype.width != 0)
        fail(ErrorCode::LengthMismatch, "buffer is not a whole number of elements");

    Accum acc;
    accumulate_dtype(a, b, dtype, 1, policy, acc);
    return report_from_accum(acc, dtype.bit_width(), 1);
}

std::vector<NamedTensorView> tensor_views(const ParsedModelFile& parsed) {
    std::vector<NamedTensorView> views;
    views.reserve(parsed.tensors.size());
    for (const auto& t : parsed.tensors)
        views.push_back({t.name, t.dtype, t.shape, parsed.tensor_bytes(t)});
    return views;
}

BitDistanceReport model_bit_distance(std::span<const NamedTensorView> a,
                                     std::span<const NamedTensorView> b,
                                     SamplingPolicy sampling, ZeroPolicy policy,
                                     unsigned threads) {
    if (sampling.stride == 0) fail(ErrorCode::InvalidArgument, "sample stride must be >= 1");

    std::unordered_map<std::string_view, const NamedTensorView*> by_name;
    by_name.reserve(b.size());
    for (const auto& t : b) by_name.emplace(t.name, &t);

    struct Job {
        const NamedTensorView* ta;
        const NamedTensorView* tb;
    };
    std::vector<Job> jobs;
    std::uint64_t total_elements = 0;
    std::uint64_t contributing_elements = 0;
    unsigned bit_width = 0;
    for (const auto& t : a) {
        std::uint64_t numel = 1;
        for (auto d : t.shape) numel *= d;
        total_elements += numel;
        auto it = by_name.find(t.name);
        if (it == by_name.end()) continue;
        const auto* tb = it->second;
        // only pairs with identical dtype and shape contribute
        if (!(t.dtype == tb->dtype) || t.shape != tb->shape) continue;
        if (!t.dtype.is_bitdist_float()) continue;
        jobs.push_back({&t, tb});
        contributing_elements += numel;
        bit_width = std::max(bit_width, t.dtype.bit_width());
    }
    if (contributing_elements == 0)
        fail(ErrorCode::NoComparableTensors, "no tensor pairs share name, dtype and shape");

    std::vector<Accum> partials(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        accumulate_dtype(jobs[i].ta->bytes, jobs[i].tb->bytes, jobs[i].ta->dtype,
                         sampling.stride, policy, partials[i]);
    });

    Accum acc;
    for (const auto& p : partials) acc.merge(p); // fixed reduction order
    auto report = report_from_accum(acc, bit_width, sampling.stride);
    report.coverage = total_elements ? double(contributing_elements) / double(total_elements) : 0.0;
    return report;
}

BitDistanceReport model_bit_distance(const ParsedModelFile& a, const ParsedModelFile& b,
                                     SamplingPolicy sampling, ZeroPolicy policy) {
    auto va = tensor_views(a);
    auto vb = tensor_views(b);
    return model_bit_distance(va, vb, sampling, policy);
}

double decode_element(const std::uint8_t* p, const DType& dtype) {
    switch (dtype.tag) {
        case DTypeTag::BF16: {
            std::uint16_t u;
            std::memcpy(&u, p, 2);
            return bf16_to_float(u);
        }
        case DTypeTag::FP16: {
            std::uint16_t u;
            std::memcpy(&u, p, 2);
            return half_to_float(u);
        }
        case DTypeTag::FP32: {
            float f;
            std::memcpy(&f, p, 4);
            return f;
        }
        case DTypeTag::FP64: {
            double d;
            std::memcpy(&d, p, 8);
            return d;
        }
        default:
            fail(ErrorCode::UnsupportedDType, "decode of non-float dtype");
    }
}

std::uint32_t encode_element_bits(double value, const DType& dtype) {
    const float f = static_cast<float>(value);
    switch (dtype.tag) {
        case DTypeTag::BF16: return float_to_bf16(f);
        case DTypeTag::FP16: return float_to_half(f);
        case DTypeTag::FP32: {
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            return u;
        }
        default:
            fail(ErrorCode::UnsupportedDType, "encode supports BF16, F16 and F32 only");
    }
}

DeltaHistogram delta_histogram(ByteView a, ByteView b, const DType& dtype,
                               std::size_t bins) {
    if (!dtype.is_float()) fail(ErrorCode::UnsupportedDType, "'" + dtype.label + "'");
    if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "buffers differ in length");
    if (bins == 0) fail(ErrorCode::InvalidArgument, "bins must be >= 1");
    const std::uint64_t n = a.size() / dtype.width;

    std::vector<double> deltas;
    deltas.reserve(n);
    DeltaHistogram h;
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        double da = decode_element(a.data() + i * dtype.width, dtype);
        double db = decode_element(b.data() + i * dtype.width, dtype);
        double d = da - db;
        if (!std::isfinite(d)) {
            h.n_nonfinite += 1;
            continue;
        }
        deltas.push_back(d);
        sum += d;
        sumsq += d * d;
    }
    h.n = deltas.size();
    if (h.n > 0) {
        h.mean = sum / double(h.n);
        double var = sumsq / double(h.n) - h.mean * h.mean;
        h.stddev = var > 0 ? std::sqrt(var) : 0.0;
    }

    double lo = 0.0, hi = 0.0;
    if (!deltas.empty()) {
        auto [mn, mx] = std::minmax_element(deltas.begin(), deltas.end());
        lo = *mn;
        hi = *mx;
    }
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    h.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.bin_edges[i] = lo + (hi - lo) * double(i) / double(bins);
    h.counts.assign(bins, 0);
    const double scale = double(bins) / (hi - lo);
    for (double d : deltas) {
        auto idx = static_cast<std::size_t>((d - lo) * scale);
        if (idx >= bins) idx = bins - 1; // d == hi lands in the last bin
        h.counts[idx] += 1;
    }
    return h;
}

} // namespace tv

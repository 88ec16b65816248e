// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/cdc.hpp"

#include <array>
#include <bit>

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

std::array<std::uint64_t, 256> gear_table(std::uint64_t seed) {
    std::array<std::uint64_t, 256> g;
    for (std::size_t i = 0; i < 256; ++i) g[i] = splitmix64(seed + i);
    return g;
}

// Judgement masks on the high hash bits; with h = (h << 1) + gear[b] the
// high bits carry the longest byte history, giving an effective 64-byte
// rolling window. Normalization level 2: two extra bits below the target
// size, two fewer above it.
std::uint64_t high_mask(unsigned bits) {
    if (bits == 0) return 0;
    if (bits >= 64) return ~0ULL;
    return ~0ULL << (64 - bits);
}

} // namespace

void ChunkParams::validate() const {
    if (min_size == 0 || min_size > avg_size || avg_size > max_size)
        fail(ErrorCode::InvalidArgument, "chunk sizes must satisfy 0 < min <= avg <= max");
    if (!std::has_single_bit(avg_size))
        fail(ErrorCode::InvalidArgument, "avg_size must be a power of two");
}

std::vector<std::uint64_t> chunk_boundaries(ByteView data, const ChunkParams& params) {
    params.validate();
    const auto gear = gear_table(params.gear_seed);
    const unsigned bits = static_cast<unsigned>(std::countr_zero(params.avg_size));
    const std::uint64_t mask_s = high_mask(bits + 2);
    const std::uint64_t mask_l = high_mask(bits >= 2 ? bits - 2 : 0);

    std::vector<std::uint64_t> cuts;
    const std::uint64_t n = data.size();
    std::uint64_t start = 0;
    while (start < n) {
        if (n - start <= params.min_size) {
            cuts.push_back(n);
            break;
        }
        const std::uint64_t end = std::min(start + params.max_size, n);
        const std::uint64_t center = std::min(start + params.avg_size, end);
        std::uint64_t h = 0;
        std::uint64_t i = start + params.min_size;
        std::uint64_t cut = end;
        for (; i < center; ++i) {
            h = (h << 1) + gear[data[i]];
            if ((h & mask_s) == 0) {
                cut = i + 1;
                break;
            }
        }
        if (cut == end) {
            for (; i < end; ++i) {
                h = (h << 1) + gear[data[i]];
                if ((h & mask_l) == 0) {
                    cut = i + 1;
                    break;
                }
            }
        }
        cuts.push_back(cut);
        start = cut;
    }
    return cuts;
}

std::vector<ChunkRecord> chunk_stream(ByteView data, const ChunkParams& params) {
    auto cuts = chunk_boundaries(data, params);
    std::vector<ChunkRecord> records;
    records.reserve(cuts.size());
    std::uint64_t start = 0;
    for (auto cut : cuts) {
        ChunkRecord r;
        r.offset = start;
        r.length = cut - start;
        r.id = sha256(data.subspan(start, r.length));
        records.push_back(r);
        start = cut;
    }
    return records;
}

DedupReport dedup_chunks(const std::vector<Bytes>& corpus, const ChunkParams& params) {
    return dedup_chunks(corpus, params, nullptr);
}

DedupReport dedup_chunks(const std::vector<Bytes>& corpus, const ChunkParams& params,
                         const StreamTransform& transform) {
    params.validate();
    // Streams chunk in parallel; the tracker merges per-stream results in
    // corpus order so the report is deterministic.
    std::vector<std::vector<ChunkRecord>> per_stream(corpus.size());
    parallel_for(corpus.size(), 0, [&](std::size_t i) {
        if (transform) {
            Bytes transformed = transform(as_view(corpus[i]));
            per_stream[i] = chunk_stream(as_view(transformed), params);
        } else {
            per_stream[i] = chunk_stream(as_view(corpus[i]), params);
        }
    });

    DedupTracker tracker(Granularity::Chunk);
    for (const auto& records : per_stream)
        for (const auto& r : records) tracker.add_unit(r.id, r.length);
    return tracker.report();
}

} // namespace tv

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tensorvault/bytes.hpp"
#include "tensorvault/dedup.hpp"
#include "tensorvault/hash.hpp"

namespace tv {

// FastCDC-style content-defined chunking: rolling Gear hash with two-stage
// normalized masks around the target size. The gear table is derived
// deterministically from gear_seed so boundaries are reproducible across
// platforms and runs.
struct ChunkParams {
    std::uint64_t min_size = 16 << 10;
    std::uint64_t avg_size = 64 << 10; // must be a power of two
    std::uint64_t max_size = 256 << 10;
    std::uint64_t gear_seed = 0x5a1ad5;

    void validate() const;
};

struct ChunkRecord {
    ContentId id;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
};

// Boundaries only (no per-chunk hashing); returns cut offsets excluding 0,
// including data.size() for a non-empty stream.
std::vector<std::uint64_t> chunk_boundaries(ByteView data, const ChunkParams& params);

std::vector<ChunkRecord> chunk_stream(ByteView data, const ChunkParams& params);

// Optional per-stream preprocessing (e.g. compress-then-chunk experiments).
using StreamTransform = std::function<Bytes(ByteView)>;

DedupReport dedup_chunks(const std::vector<Bytes>& corpus, const ChunkParams& params);
DedupReport dedup_chunks(const std::vector<Bytes>& corpus, const ChunkParams& params,
                         const StreamTransform& transform);

} // namespace tv

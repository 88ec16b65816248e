// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

#include "tensorvault/bytes.hpp"
#include "tensorvault/hash.hpp"

namespace tv {

enum class Codec : std::uint8_t {
    ZstdFrame = 1,
};

inline constexpr int kDefaultCompressionLevel = 3;

// Delta frame: the fine tensor XORed against its equal-length base tensor,
// compressed with a generic lossless backend. XOR operates on raw bytes;
// dtype is irrelevant to correctness.
//
// Wire layout: [magic "BX01"][codec u8][level u8][raw_len u64 LE]
//              [base_id 32 bytes][compressed payload]
struct BitxDelta {
    ContentId base_id;
    Bytes compressed;
    std::uint64_t raw_len = 0;
    Codec codec = Codec::ZstdFrame;
    int codec_level = kDefaultCompressionLevel;
};

// Self-contained compressed blob for tensors without a usable base.
// Wire layout: [magic "BS01"][codec u8][level u8][raw_len u64 LE][payload]
struct StandaloneBlob {
    Bytes compressed;
    std::uint64_t raw_len = 0;
    Codec codec = Codec::ZstdFrame;
    int codec_level = kDefaultCompressionLevel;
};

BitxDelta bitx_encode(ByteView fine, ByteView base, int level = kDefaultCompressionLevel);

// Verifies sha256(base) == delta.base_id before emitting any bytes.
Bytes bitx_decode(const BitxDelta& delta, ByteView base);

StandaloneBlob standalone_encode(ByteView data, int level = kDefaultCompressionLevel);
Bytes standalone_decode(const StandaloneBlob& blob);

Bytes serialize_frame(const BitxDelta& delta);
Bytes serialize_frame(const StandaloneBlob& blob);
BitxDelta parse_bitx_frame(ByteView frame);
StandaloneBlob parse_standalone_frame(ByteView frame);

bool is_bitx_frame(ByteView frame);
bool is_standalone_frame(ByteView frame);

void xor_bytes(ByteView a, ByteView b, std::span<std::uint8_t> out);

// zstd backend (exposed for the compress-then-dedup experiment and tests).
Bytes zstd_compress(ByteView data, int level);
Bytes zstd_decompress(ByteView data, std::uint64_t raw_len);

} // namespace tv

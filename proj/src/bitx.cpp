// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/bitx.hpp"

#include <cstring>

#include "tensorvault/errors.hpp"

// Public one-shot zstd API, ABI-stable since 1.0. Declared locally because
// this environment ships the runtime library without development headers.
extern "C" {
size_t ZSTD_compress(void* dst, size_t dstCapacity, const void* src, size_t srcSize,
                     int compressionLevel);
size_t ZSTD_decompress(void* dst, size_t dstCapacity, const void* src, size_t srcSize);
size_t ZSTD_compressBound(size_t srcSize);
unsigned ZSTD_isError(size_t code);
const char* ZSTD_getErrorName(size_t code);
int ZSTD_maxCLevel(void);
}

namespace tv {

namespace {

constexpr std::uint8_t kBitxMagic[4] = {'B', 'X', '0', '1'};
constexpr std::uint8_t kStandaloneMagic[4] = {'B', 'S', '0', '1'};
constexpr std::size_t kBitxHeaderSize = 4 + 1 + 1 + 8 + 32;
constexpr std::size_t kStandaloneHeaderSize = 4 + 1 + 1 + 8;

void check_level(int level) {
    if (level < 1 || level > ZSTD_maxCLevel() || level > 255)
        fail(ErrorCode::InvalidArgument, "compression level " + std::to_string(level) +
                                             " out of range");
}

Codec codec_from_byte(std::uint8_t b) {
    if (b == static_cast<std::uint8_t>(Codec::ZstdFrame)) return Codec::ZstdFrame;
    fail(ErrorCode::CorruptFrame, "unknown codec tag " + std::to_string(b));
}

} // namespace

Bytes zstd_compress(ByteView data, int level) {
    check_level(level);
    Bytes out(ZSTD_compressBound(data.size()));
    size_t n = ZSTD_compress(out.data(), out.size(), data.data(), data.size(), level);
    if (ZSTD_isError(n))
        fail(ErrorCode::IoFailure, std::string("zstd compress: ") + ZSTD_getErrorName(n));
    out.resize(n);
    return out;
}

Bytes zstd_decompress(ByteView data, std::uint64_t raw_len) {
    Bytes out(raw_len);
    size_t n = ZSTD_decompress(out.data(), out.size(), data.data(), data.size());
    if (ZSTD_isError(n))
        fail(ErrorCode::CorruptFrame, std::string("zstd decompress: ") + ZSTD_getErrorName(n));
    if (n != raw_len)
        fail(ErrorCode::CorruptFrame, "decompressed to " + std::to_string(n) +
                                          " bytes, expected " + std::to_string(raw_len));
    return out;
}

void xor_bytes(ByteView a, ByteView b, std::span<std::uint8_t> out) {
    if (a.size() != b.size() || out.size() != a.size())
        fail(ErrorCode::LengthMismatch, "xor operands differ in length");
    std::size_t i = 0;
    const std::size_t words = a.size() / 8;
    for (std::size_t w = 0; w < words; ++w, i += 8) {
        std::uint64_t x, y;
        std::memcpy(&x, a.data() + i, 8);
        std::memcpy(&y, b.data() + i, 8);
        x ^= y;
        std::memcpy(out.data() + i, &x, 8);
    }
    for (; i < a.size(); ++i) out[i] = a[i] ^ b[i];
}

BitxDelta bitx_encode(ByteView fine, ByteView base, int level) {
    if (fine.size() != base.size())
        fail(ErrorCode::LengthMismatch, "fine tensor is " + std::to_string(fine.size()) +
                                            " bytes, base is " + std::to_string(base.size()));
    check_level(level);
    Bytes xored(fine.size());
    xor_bytes(fine, base, xored);

    BitxDelta delta;
    delta.base_id = sha256(base);
    delta.raw_len = fine.size();
    delta.codec = Codec::ZstdFrame;
    delta.codec_level = level;
    delta.compressed = zstd_compress(as_view(xored), level);
    return delta;
}

Bytes bitx_decode(const BitxDelta& delta, ByteView base) {
    // gate on the base before emitting any bytes
    if (base.size() != delta.raw_len)
        fail(ErrorCode::BaseMismatch, "base is " + std::to_string(base.size()) +
                                          " bytes, delta encodes " +
                                          std::to_string(delta.raw_len));
    if (sha256(base) != delta.base_id)
        fail(ErrorCode::BaseMismatch, "base hash does not match " + delta.base_id.hex());

    Bytes xored = zstd_decompress(as_view(delta.compressed), delta.raw_len);
    Bytes fine(delta.raw_len);
    xor_bytes(as_view(xored), base, fine);
    return fine;
}

StandaloneBlob standalone_encode(ByteView data, int level) {
    check_level(level);
    StandaloneBlob blob;
    blob.raw_len = data.size();
    blob.codec = Codec::ZstdFrame;
    blob.codec_level = level;
    blob.compressed = zstd_compress(data, level);
    return blob;
}

Bytes standalone_decode(const StandaloneBlob& blob) {
    return zstd_decompress(as_view(blob.compressed), blob.raw_len);
}

Bytes serialize_frame(const BitxDelta& delta) {
    Bytes out(kBitxHeaderSize + delta.compressed.size());
    std::memcpy(out.data(), kBitxMagic, 4);
    out[4] = static_cast<std::uint8_t>(delta.codec);
    out[5] = static_cast<std::uint8_t>(delta.codec_level);
    store_le64(out.data() + 6, delta.raw_len);
    std::memcpy(out.data() + 14, delta.base_id.digest.data(), 32);
    std::memcpy(out.data() + kBitxHeaderSize, delta.compressed.data(),
                delta.compressed.size());
    return out;
}

Bytes serialize_frame(const StandaloneBlob& blob) {
    Bytes out(kStandaloneHeaderSize + blob.compressed.size());
    std::memcpy(out.data(), kStandaloneMagic, 4);
    out[4] = static_cast<std::uint8_t>(blob.codec);
    out[5] = static_cast<std::uint8_t>(blob.codec_level);
    store_le64(out.data() + 6, blob.raw_len);
    std::memcpy(out.data() + kStandaloneHeaderSize, blob.compressed.data(),
                blob.compressed.size());
    return out;
}

bool is_bitx_frame(ByteView frame) {
    return frame.size() >= 4 && std::memcmp(frame.data(), kBitxMagic, 4) == 0;
}

bool is_standalone_frame(ByteView frame) {
    return frame.size() >= 4 && std::memcmp(frame.data(), kStandaloneMagic, 4) == 0;
}

BitxDelta parse_bitx_frame(ByteView frame) {
    if (frame.size() < kBitxHeaderSize || !is_bitx_frame(frame))
        fail(ErrorCode::CorruptFrame, "not a delta frame");
    BitxDelta delta;
    delta.codec = codec_from_byte(frame[4]);
    delta.codec_level = frame[5];
    delta.raw_len = load_le64(frame.data() + 6);
    std::memcpy(delta.base_id.digest.data(), frame.data() + 14, 32);
    delta.compressed.assign(frame.begin() + kBitxHeaderSize, frame.end());
    return delta;
}

StandaloneBlob parse_standalone_frame(ByteView frame) {
    if (frame.size() < kStandaloneHeaderSize || !is_standalone_frame(frame))
        fail(ErrorCode::CorruptFrame, "not a standalone frame");
    StandaloneBlob blob;
    blob.codec = codec_from_byte(frame[4]);
    blob.codec_level = frame[5];
    blob.raw_len = load_le64(frame.data() + 6);
    blob.compressed.assign(frame.begin() + kStandaloneHeaderSize, frame.end());
    return blob;
}

} // namespace tv

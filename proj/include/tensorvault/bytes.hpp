// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace tv {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_view(const Bytes& b) { return {b.data(), b.size()}; }

inline ByteView as_view(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::uint64_t load_le64(const std::uint8_t* p) {
    std::uint64_t v;
    std::memcpy(&v, p, 8); // little-endian host assumed (x86_64 / aarch64)
    return v;
}

inline void store_le64(std::uint8_t* p, std::uint64_t v) {
    std::memcpy(p, &v, 8);
}

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView data);

// Writes to a sibling temp file and renames into place, so a crash never
// leaves a partially written file at `path`.
void write_file_atomic(const std::filesystem::path& path, ByteView data);

Bytes read_file_range(const std::filesystem::path& path, std::uint64_t offset,
                      std::uint64_t length);

} // namespace tv

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>

#include "tensorvault/bytes.hpp"

namespace tv {

// SHA-256 digest identifying a blob (file, layer, tensor, chunk or frame).
struct ContentId {
    std::array<std::uint8_t, 32> digest{};

    std::string hex() const;
    static ContentId from_hex(const std::string& hex);

    auto operator<=>(const ContentId&) const = default;
};

ContentId sha256(ByteView data);

// Incremental hasher for multi-buffer units (layers, whole files).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(ByteView data);
    ContentId finish();

private:
    void* ctx_;
};

} // namespace tv

template <>
struct std::hash<tv::ContentId> {
    std::size_t operator()(const tv::ContentId& id) const noexcept {
        std::size_t h;
        std::memcpy(&h, id.digest.data(), sizeof(h));
        return h;
    }
};

// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/hash.hpp"

#include <openssl/evp.h>

#include "tensorvault/errors.hpp"

namespace tv {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

std::string ContentId::hex() const {
    std::string out(64, '0');
    for (std::size_t i = 0; i < digest.size(); ++i) {
        out[2 * i] = kHexDigits[digest[i] >> 4];
        out[2 * i + 1] = kHexDigits[digest[i] & 0xf];
    }
    return out;
}

ContentId ContentId::from_hex(const std::string& hex) {
    if (hex.size() != 64)
        fail(ErrorCode::InvalidArgument, "content id hex must be 64 chars, got " +
                                             std::to_string(hex.size()));
    ContentId id;
    for (std::size_t i = 0; i < 32; ++i) {
        int hi = hex_nibble(hex[2 * i]);
        int lo = hex_nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) fail(ErrorCode::InvalidArgument, "bad hex digit in " + hex);
        id.digest[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return id;
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::IoFailure, "EVP_DigestInit failed");
}

Sha256::~Sha256() {
    if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256::update(ByteView data) {
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size()) != 1)
        fail(ErrorCode::IoFailure, "EVP_DigestUpdate failed");
}

ContentId Sha256::finish() {
    ContentId id;
    unsigned len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), id.digest.data(), &len) != 1 ||
        len != id.digest.size())
        fail(ErrorCode::IoFailure, "EVP_DigestFinal failed");
    return id;
}

ContentId sha256(ByteView data) {
    Sha256 h;
    h.update(data);
    return h.finish();
}

} // namespace tv

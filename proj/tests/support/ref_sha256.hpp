// SPDX-License-Identifier: Apache-2.0
// Self-contained SHA-256 used as an independent oracle for the pool's
// hashing path. Deliberately not backed by OpenSSL.
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "tensorvault/bytes.hpp"

namespace tvtest {

std::array<std::uint8_t, 32> ref_sha256(tv::ByteView data);
std::string ref_sha256_hex(tv::ByteView data);

} // namespace tvtest

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "tensorvault/errors.hpp"
#include "tensorvault/hash.hpp"
#include "support/ref_sha256.hpp"

using namespace tv;

TEST_CASE("sha256 of empty input matches the published digest") {
    CHECK(sha256({}).hex() ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("sha256 matches NIST vector for 'abc'") {
    auto id = sha256(as_view(std::string_view("abc")));
    CHECK(id.hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("sha256 agrees with the independent reference on random buffers") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 200; ++i) {
        std::size_t len = rng() % 300; // crosses both padding branches
        Bytes buf(len);
        for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
        CHECK(sha256(as_view(buf)).hex() == tvtest::ref_sha256_hex(as_view(buf)));
    }
}

TEST_CASE("streaming hasher equals one-shot") {
    Bytes buf(100000);
    std::mt19937_64 rng(7);
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    Sha256 h;
    h.update(ByteView{buf.data(), 1000});
    h.update(ByteView{buf.data() + 1000, 65536});
    h.update(ByteView{buf.data() + 66536, buf.size() - 66536});
    CHECK(h.finish() == sha256(as_view(buf)));
}

TEST_CASE("content id hex round trip") {
    auto id = sha256(as_view(std::string_view("round trip")));
    CHECK(ContentId::from_hex(id.hex()) == id);
    CHECK(id.hex().size() == 64);
    CHECK_THROWS_AS((void)ContentId::from_hex("zz"), Error);
    CHECK_THROWS_AS((void)ContentId::from_hex(std::string(64, 'g')), Error);
}

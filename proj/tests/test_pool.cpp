// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>

#include "tensorvault/errors.hpp"
#include "tensorvault/pool.hpp"
#include "support/ref_sha256.hpp"
#include "support/testutil.hpp"

using namespace tv;

TEST_CASE("put twice returns the same id with refcount 2") {
    tvtest::TempDir tmp("pool_put");
    Pool pool = Pool::open(tmp.path());
    Bytes b = to_bytes("some tensor bytes");
    auto [id1, new1] = pool.put(as_view(b), BlobKind::RawTensor);
    auto [id2, new2] = pool.put(as_view(b), BlobKind::RawTensor);
    CHECK(id1 == id2);
    CHECK(new1);
    CHECK_FALSE(new2);
    CHECK(pool.entry(id1).refcount == 2);
}

TEST_CASE("empty blob hashes to the SHA-256 of empty input") {
    tvtest::TempDir tmp("pool_empty");
    Pool pool = Pool::open(tmp.path());
    auto [id, was_new] = pool.put({}, BlobKind::HeaderBlob);
    CHECK(id.hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(id.hex() == tvtest::ref_sha256_hex({})); // independent recompute
    CHECK(pool.get(id).empty());
}

TEST_CASE("distinct buffers get distinct ids") {
    tvtest::TempDir tmp("pool_distinct");
    Pool pool = Pool::open(tmp.path());
    auto [a, na] = pool.put(as_view(std::string_view("aaa")), BlobKind::RawTensor);
    auto [b, nb] = pool.put(as_view(std::string_view("bbb")), BlobKind::RawTensor);
    CHECK(a != b);
}

TEST_CASE("get returns stored bytes; unknown id is MissingBlob") {
    tvtest::TempDir tmp("pool_get");
    Pool pool = Pool::open(tmp.path());
    Bytes b = to_bytes("payload");
    auto [id, _] = pool.put(as_view(b), BlobKind::RawTensor);
    CHECK(pool.get(id) == b);
    ContentId unknown = sha256(as_view(std::string_view("never stored")));
    try {
        (void)pool.get(unknown);
        FAIL("expected MissingBlob");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingBlob);
    }
}

TEST_CASE("release then gc removes the blob") {
    tvtest::TempDir tmp("pool_gc");
    Pool pool = Pool::open(tmp.path());
    Bytes b = to_bytes("short lived");
    auto [id, _] = pool.put(as_view(b), BlobKind::RawTensor);
    auto [id2, __] = pool.put(as_view(b), BlobKind::RawTensor);
    CHECK(pool.release(id) == 1);
    CHECK(pool.release(id) == 0);
    CHECK(pool.gc() == 1);
    CHECK_THROWS_AS((void)pool.get(id), Error);
    CHECK_THROWS_AS((void)pool.release(sha256(as_view(std::string_view("x")))), Error);
}

TEST_CASE("blobs live in a two-level hex fan-out") {
    tvtest::TempDir tmp("pool_layout");
    Pool pool = Pool::open(tmp.path());
    auto [id, _] = pool.put(as_view(std::string_view("fanout")), BlobKind::RawTensor);
    std::string hex = id.hex();
    auto expected = tmp.path() / "pool" / hex.substr(0, 2) / hex.substr(2, 2) / hex;
    CHECK(std::filesystem::exists(expected));
}

TEST_CASE("index survives save and reopen") {
    tvtest::TempDir tmp("pool_reopen");
    ContentId id;
    {
        Pool pool = Pool::open(tmp.path());
        id = pool.put(as_view(std::string_view("persist me")), BlobKind::CompressedDelta, 99).first;
        pool.add_ref(id);
        pool.save();
    }
    Pool pool = Pool::open(tmp.path());
    auto e = pool.entry(id);
    CHECK(e.kind == BlobKind::CompressedDelta);
    CHECK(e.refcount == 2);
    CHECK(e.logical_size == 99);
    CHECK(e.stored_size == 10);
    CHECK(pool.get(id) == to_bytes("persist me"));
}

TEST_CASE("pool integrity: every entry hashes back to its id") {
    tvtest::TempDir tmp("pool_integrity");
    Pool pool = Pool::open(tmp.path());
    for (int i = 0; i < 16; ++i)
        pool.put(as_view("blob " + std::to_string(i)), BlobKind::RawTensor);
    pool.for_each([&](const PoolEntry& e) { CHECK(sha256(as_view(pool.get(e.id))) == e.id); });
}

TEST_CASE("re-ingesting the same content changes refcounts, not bytes") {
    tvtest::TempDir tmp("pool_idem");
    Pool pool = Pool::open(tmp.path());
    for (int i = 0; i < 8; ++i) pool.put(as_view("unit " + std::to_string(i % 4)), BlobKind::RawTensor);
    std::uint64_t physical = pool.physical_bytes();
    std::size_t entries = pool.entry_count();
    for (int i = 0; i < 8; ++i) pool.put(as_view("unit " + std::to_string(i % 4)), BlobKind::RawTensor);
    CHECK(pool.physical_bytes() == physical);
    CHECK(pool.entry_count() == entries);
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tensorvault/bytes.hpp"
#include "tensorvault/hash.hpp"

namespace tv {

enum class BlobKind : std::uint8_t {
    RawTensor,
    CompressedDelta,
    CompressedStandalone,
    HeaderBlob,
};

const char* to_string(BlobKind kind);
BlobKind blob_kind_from_string(const std::string& s);

struct PoolEntry {
    ContentId id;
    BlobKind kind = BlobKind::RawTensor;
    std::uint64_t stored_size = 0;  // on-disk blob length
    std::uint64_t logical_size = 0; // decoded length (== stored for raw blobs)
    std::uint64_t refcount = 0;
};

// Content-addressed blob store. Blobs live one-per-file under a two-level
// hex fan-out (pool/ab/cd/<hex>); the index is a line-delimited UTF-8 file
// with one record per entry: hex id, kind, stored_size, logical_size,
// refcount. Blob writes go through write-temp-then-rename, so concurrent
// and interrupted writers never expose a partial blob. Index mutations are
// in-memory until save(); callers persist at their commit points.
class Pool {
public:
    static Pool open(const std::filesystem::path& root);

    // Stores bytes if absent; increments refcount when the id already exists.
    // Never overwrites: a same-id entry with a different stored length aborts
    // with HashCollision.
    std::pair<ContentId, bool> put(ByteView bytes, BlobKind kind,
                                   std::uint64_t logical_size);
    std::pair<ContentId, bool> put(ByteView bytes, BlobKind kind) {
        return put(bytes, kind, bytes.size());
    }

    Bytes get(const ContentId& id) const;
    bool contains(const ContentId& id) const;
    // Returns a copy; entries mutate under the hood as refcounts move.
    PoolEntry entry(const ContentId& id) const;

    std::uint64_t add_ref(const ContentId& id);
    std::uint64_t release(const ContentId& id);

    // Removes entries with refcount 0 (index record and blob file).
    // Returns the number of entries collected.
    std::size_t gc();

    void save() const;

    std::uint64_t physical_bytes() const;
    std::uint64_t logical_bytes() const;
    std::size_t entry_count() const;
    void for_each(const std::function<void(const PoolEntry&)>& fn) const;

    const std::filesystem::path& root() const { return root_; }

    // Recomputes refcounts from an externally supplied reference multiset
    // (used by the store's fsck to reconcile after a crash mid-commit).
    void reset_refcounts(const std::unordered_map<ContentId, std::uint64_t>& refs);

    // In-memory state capture for the store's all-or-nothing ingest.
    // Blob files written between snapshot and restore become orphans.
    std::unordered_map<ContentId, PoolEntry> snapshot_entries() const;
    void restore_entries(std::unordered_map<ContentId, PoolEntry>&& entries);

private:
    explicit Pool(std::filesystem::path root) : root_(std::move(root)) {}

    std::filesystem::path blob_path(const ContentId& id) const;
    std::filesystem::path index_path() const;

    std::filesystem::path root_;
    std::unordered_map<ContentId, PoolEntry> entries_;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

} // namespace tv

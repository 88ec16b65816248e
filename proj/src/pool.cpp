// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/pool.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "tensorvault/errors.hpp"

namespace tv {

namespace fs = std::filesystem;

const char* to_string(BlobKind kind) {
    switch (kind) {
        case BlobKind::RawTensor: return "raw_tensor";
        case BlobKind::CompressedDelta: return "compressed_delta";
        case BlobKind::CompressedStandalone: return "compressed_standalone";
        case BlobKind::HeaderBlob: return "header_blob";
    }
    return "unknown";
}

BlobKind blob_kind_from_string(const std::string& s) {
    if (s == "raw_tensor") return BlobKind::RawTensor;
    if (s == "compressed_delta") return BlobKind::CompressedDelta;
    if (s == "compressed_standalone") return BlobKind::CompressedStandalone;
    if (s == "header_blob") return BlobKind::HeaderBlob;
    fail(ErrorCode::StoreCorruption, "unknown blob kind '" + s + "' in index");
}

Pool Pool::open(const fs::path& root) {
    Pool pool(root);
    std::error_code ec;
    fs::create_directories(root / "pool", ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create pool at " + root.string());

    const fs::path index = pool.index_path();
    if (fs::exists(index)) {
        std::ifstream in(index);
        if (!in) fail(ErrorCode::IoFailure, "cannot read " + index.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string hex, kind;
            PoolEntry e;
            if (!(row >> hex >> kind >> e.stored_size >> e.logical_size >> e.refcount))
                fail(ErrorCode::StoreCorruption,
                     "bad index record at line " + std::to_string(lineno));
            e.id = ContentId::from_hex(hex);
            e.kind = blob_kind_from_string(kind);
            pool.entries_.emplace(e.id, e);
        }
    }
    return pool;
}

fs::path Pool::blob_path(const ContentId& id) const {
    std::string hex = id.hex();
    return root_ / "pool" / hex.substr(0, 2) / hex.substr(2, 2) / hex;
}

fs::path Pool::index_path() const { return root_ / "index"; }

std::pair<ContentId, bool> Pool::put(ByteView bytes, BlobKind kind,
                                     std::uint64_t logical_size) {
    ContentId id = sha256(bytes);
    std::lock_guard lock(*mu_);
    auto it = entries_.find(id);
    if (it != entries_.end()) {
        if (it->second.stored_size != bytes.size())
            fail(ErrorCode::HashCollision,
                 id.hex() + " already stored with length " +
                     std::to_string(it->second.stored_size) + ", new length " +
                     std::to_string(bytes.size()));
        it->second.refcount += 1;
        return {id, false};
    }

    fs::path path = blob_path(id);
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create " + path.parent_path().string());
    if (!fs::exists(path)) write_file_atomic(path, bytes); // idempotent rewrite

    PoolEntry e{id, kind, bytes.size(), logical_size, 1};
    entries_.emplace(id, e);
    return {id, true};
}

Bytes Pool::get(const ContentId& id) const {
    {
        std::lock_guard lock(*mu_);
        if (!entries_.contains(id)) fail(ErrorCode::MissingBlob, id.hex());
    }
    return read_file(blob_path(id));
}

bool Pool::contains(const ContentId& id) const {
    std::lock_guard lock(*mu_);
    return entries_.contains(id);
}

PoolEntry Pool::entry(const ContentId& id) const {
    std::lock_guard lock(*mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) fail(ErrorCode::MissingBlob, id.hex());
    return it->second;
}

std::uint64_t Pool::add_ref(const ContentId& id) {
    std::lock_guard lock(*mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) fail(ErrorCode::MissingBlob, id.hex());
    return ++it->second.refcount;
}

std::uint64_t Pool::release(const ContentId& id) {
    std::lock_guard lock(*mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) fail(ErrorCode::MissingBlob, id.hex());
    if (it->second.refcount == 0)
        fail(ErrorCode::StoreCorruption, "release of " + id.hex() + " below zero");
    return --it->second.refcount;
}

std::size_t Pool::gc() {
    std::lock_guard lock(*mu_);
    std::size_t removed = 0;
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (it->second.refcount == 0) {
            std::error_code ec;
            fs::remove(blob_path(it->first), ec);
            it = entries_.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    return removed;
}

void Pool::save() const {
    std::lock_guard lock(*mu_);
    std::ostringstream out;
    for (const auto& [id, e] : entries_) {
        out << id.hex() << ' ' << to_string(e.kind) << ' ' << e.stored_size << ' '
            << e.logical_size << ' ' << e.refcount << '\n';
    }
    std::string text = out.str();
    write_file_atomic(index_path(), as_view(text));
}

std::uint64_t Pool::physical_bytes() const {
    std::lock_guard lock(*mu_);
    std::uint64_t total = 0;
    for (const auto& [id, e] : entries_) total += e.stored_size;
    return total;
}

std::uint64_t Pool::logical_bytes() const {
    std::lock_guard lock(*mu_);
    std::uint64_t total = 0;
    for (const auto& [id, e] : entries_) total += e.logical_size;
    return total;
}

std::size_t Pool::entry_count() const {
    std::lock_guard lock(*mu_);
    return entries_.size();
}

void Pool::for_each(const std::function<void(const PoolEntry&)>& fn) const {
    std::lock_guard lock(*mu_);
    for (const auto& [id, e] : entries_) fn(e);
}

void Pool::reset_refcounts(const std::unordered_map<ContentId, std::uint64_t>& refs) {
    std::lock_guard lock(*mu_);
    for (auto& [id, e] : entries_) {
        auto it = refs.find(id);
        e.refcount = it == refs.end() ? 0 : it->second;
    }
}

std::unordered_map<ContentId, PoolEntry> Pool::snapshot_entries() const {
    std::lock_guard lock(*mu_);
    return entries_;
}

void Pool::restore_entries(std::unordered_map<ContentId, PoolEntry>&& entries) {
    std::lock_guard lock(*mu_);
    entries_ = std::move(entries);
}

} // namespace tv

// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/pipeline.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

#include "tensorvault/errors.hpp"
#include "tensorvault/parallel.hpp"

namespace tv {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sanitize_model_id(const std::string& model_id) {
    if (model_id.empty()) fail(ErrorCode::InvalidArgument, "empty model id");
    std::string out;
    out.reserve(model_id.size());
    for (char c : model_id) {
        if (c == '/') {
            out += "__";
        } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' ||
                   c == '-') {
            out += c;
        } else {
            fail(ErrorCode::InvalidArgument,
                 "model id contains unsupported character: " + model_id);
        }
    }
    if (out.front() == '.') fail(ErrorCode::InvalidArgument, "model id starts with '.'");
    return out;
}

// ---------------------------------------------------------------------------
// manifest / registry serialization

namespace {

json storage_to_json(const TensorStorage& s) {
    switch (s.kind) {
        case TensorStorage::Kind::Dedup:
            return {{"kind", "dedup"}, {"ref", s.primary.hex()}};
        case TensorStorage::Kind::Bitx:
            return {{"kind", "bitx"}, {"ref", s.primary.hex()}, {"base", s.base->hex()}};
        case TensorStorage::Kind::Standalone:
            return {{"kind", "standalone"}, {"ref", s.primary.hex()}};
    }
    fail(ErrorCode::StoreCorruption, "bad storage kind");
}

TensorStorage storage_from_json(const json& j) {
    TensorStorage s;
    const std::string kind = j.at("kind").get<std::string>();
    s.primary = ContentId::from_hex(j.at("ref").get<std::string>());
    if (kind == "dedup") {
        s.kind = TensorStorage::Kind::Dedup;
    } else if (kind == "bitx") {
        s.kind = TensorStorage::Kind::Bitx;
        s.base = ContentId::from_hex(j.at("base").get<std::string>());
    } else if (kind == "standalone") {
        s.kind = TensorStorage::Kind::Standalone;
    } else {
        fail(ErrorCode::StoreCorruption, "unknown storage kind '" + kind + "'");
    }
    return s;
}

json family_to_json(const FamilyAssignment& f) {
    json j{{"method", to_string(f.method)}, {"threshold", f.threshold}, {"tie", f.tie}};
    j["base"] = f.base_id ? json(*f.base_id) : json(nullptr);
    j["distance"] = f.distance ? json(*f.distance) : json(nullptr);
    return j;
}

FamilyAssignment family_from_json(const json& j, const std::string& model_id) {
    FamilyAssignment f;
    f.model_id = model_id;
    f.method = family_method_from_string(j.at("method").get<std::string>());
    f.threshold = j.at("threshold").get<double>();
    f.tie = j.value("tie", false);
    if (!j.at("base").is_null()) f.base_id = j.at("base").get<std::string>();
    if (!j.at("distance").is_null()) f.distance = j.at("distance").get<double>();
    return f;
}

} // namespace

std::string ModelManifest::to_json() const {
    json files_json = json::array();
    for (const auto& f : files) {
        json jf{{"path", f.rel_path}, {"file_id", f.file_id.hex()}};
        if (f.is_safetensors) {
            jf["kind"] = "safetensors";
            jf["header_blob"] = f.header_blob.hex();
            jf["header_len"] = f.header_len;
            jf["payload_len"] = f.payload_len;
            json tensors = json::array();
            for (const auto& t : f.tensors) {
                json jt{{"name", t.descriptor.name},
                        {"dtype", t.descriptor.dtype.label},
                        {"width", t.descriptor.dtype.width},
                        {"shape", t.descriptor.shape},
                        {"begin", t.descriptor.data_begin},
                        {"end", t.descriptor.data_end},
                        {"id", t.raw_id.hex()},
                        {"storage", storage_to_json(t.storage)}};
                tensors.push_back(std::move(jt));
            }
            jf["tensors"] = std::move(tensors);
            json gaps = json::array();
            for (const auto& g : f.gaps)
                gaps.push_back({{"begin", g.begin}, {"end", g.end}, {"blob", g.blob.hex()}});
            jf["gaps"] = std::move(gaps);
        } else {
            jf["kind"] = "blob";
            jf["blob"] = f.blob->hex();
            jf["size"] = f.size;
        }
        files_json.push_back(std::move(jf));
    }
    json j{{"schema_version", 1},
           {"model_id", model_id},
           {"family", family_to_json(family)},
           {"original_total_bytes", original_total_bytes},
           {"stored_total_bytes", stored_total_bytes},
           {"saved",
            {{"file_dedup", saved.file_dedup},
             {"tensor_dedup", saved.tensor_dedup},
             {"bitx", saved.bitx},
             {"standalone", saved.standalone}}},
           {"files", std::move(files_json)}};
    return j.dump(2);
}

ModelManifest ModelManifest::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::StoreCorruption, std::string("bad manifest JSON: ") + e.what());
    }
    ModelManifest m;
    m.model_id = j.at("model_id").get<std::string>();
    m.family = family_from_json(j.at("family"), m.model_id);
    m.original_total_bytes = j.at("original_total_bytes").get<std::uint64_t>();
    m.stored_total_bytes = j.at("stored_total_bytes").get<std::uint64_t>();
    const auto& saved = j.at("saved");
    m.saved.file_dedup = saved.at("file_dedup").get<std::uint64_t>();
    m.saved.tensor_dedup = saved.at("tensor_dedup").get<std::uint64_t>();
    m.saved.bitx = saved.at("bitx").get<std::uint64_t>();
    m.saved.standalone = saved.at("standalone").get<std::uint64_t>();
    for (const auto& jf : j.at("files")) {
        StoredFile f;
        f.rel_path = jf.at("path").get<std::string>();
        f.file_id = ContentId::from_hex(jf.at("file_id").get<std::string>());
        if (jf.at("kind").get<std::string>() == "safetensors") {
            f.is_safetensors = true;
            f.header_blob = ContentId::from_hex(jf.at("header_blob").get<std::string>());
            f.header_len = jf.at("header_len").get<std::uint64_t>();
            f.payload_len = jf.at("payload_len").get<std::uint64_t>();
            for (const auto& jt : jf.at("tensors")) {
                StoredTensor t;
                t.descriptor.name = jt.at("name").get<std::string>();
                t.descriptor.dtype = dtype_from_label(jt.at("dtype").get<std::string>());
                t.descriptor.dtype.width = jt.at("width").get<std::uint32_t>();
                t.descriptor.shape = jt.at("shape").get<std::vector<std::uint64_t>>();
                t.descriptor.data_begin = jt.at("begin").get<std::uint64_t>();
                t.descriptor.data_end = jt.at("end").get<std::uint64_t>();
                t.raw_id = ContentId::from_hex(jt.at("id").get<std::string>());
                t.storage = storage_from_json(jt.at("storage"));
                f.tensors.push_back(std::move(t));
            }
            for (const auto& jg : jf.at("gaps")) {
                GapEntry g;
                g.begin = jg.at("begin").get<std::uint64_t>();
                g.end = jg.at("end").get<std::uint64_t>();
                g.blob = ContentId::from_hex(jg.at("blob").get<std::string>());
                f.gaps.push_back(g);
            }
            f.size = 8 + f.header_len + f.payload_len;
        } else {
            f.blob = ContentId::from_hex(jf.at("blob").get<std::string>());
            f.size = jf.at("size").get<std::uint64_t>();
        }
        m.files.push_back(std::move(f));
    }
    return m;
}

// ---------------------------------------------------------------------------
// store

struct Store::Snapshot {
    std::unordered_map<ContentId, PoolEntry> pool_entries;
    std::vector<ModelRecord> registry;
    std::map<std::string, ModelManifest> manifests;
    std::unordered_map<ContentId, TensorStorage> resolver;
    std::unordered_map<ContentId, std::pair<std::string, std::size_t>> file_index;
    std::uint64_t next_seq = 0;
};

Store::Store(const fs::path& root) : root_(root), pool_(Pool::open(root)) {}

Store Store::open(const fs::path& root) {
    Store store(root);
    std::error_code ec;
    fs::create_directories(root / "manifests", ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create store at " + root.string());

    store.load_registry();
    for (const auto& entry : fs::directory_iterator(root / "manifests")) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        Bytes text = read_file(entry.path());
        auto m = ModelManifest::from_json(std::string(text.begin(), text.end()));
        std::string id = m.model_id;
        store.manifests_.emplace(std::move(id), std::move(m));
    }
    store.rebuild_derived_state();
    return store;
}

void Store::load_registry() {
    const fs::path path = root_ / "registry.json";
    if (!fs::exists(path)) return;
    Bytes text = read_file(path);
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::StoreCorruption, std::string("bad registry JSON: ") + e.what());
    }
    for (const auto& jr : j) {
        ModelRecord rec;
        rec.model_id = jr.at("model_id").get<std::string>();
        rec.shapes_digest = ContentId::from_hex(jr.at("shapes_digest").get<std::string>());
        if (!jr.at("declared_base").is_null())
            rec.declared_base = jr.at("declared_base").get<std::string>();
        rec.param_count = jr.at("param_count").get<std::uint64_t>();
        for (const auto& [k, v] : jr.at("dtype_summary").items())
            rec.dtype_summary[k] = v.get<std::uint64_t>();
        rec.is_base = jr.at("is_base").get<bool>();
        rec.seq = jr.at("seq").get<std::uint64_t>();
        registry_.push_back(std::move(rec));
    }
}

void Store::save_registry() const {
    json j = json::array();
    for (const auto& rec : registry_) {
        json jr{{"model_id", rec.model_id},
                {"shapes_digest", rec.shapes_digest.hex()},
                {"param_count", rec.param_count},
                {"is_base", rec.is_base},
                {"seq", rec.seq}};
        jr["declared_base"] = rec.declared_base ? json(*rec.declared_base) : json(nullptr);
        json summary = json::object();
        for (const auto& [k, v] : rec.dtype_summary) summary[k] = v;
        jr["dtype_summary"] = std::move(summary);
        j.push_back(std::move(jr));
    }
    std::string text = j.dump(2);
    write_file_atomic(root_ / "registry.json", as_view(text));
}

void Store::rebuild_derived_state() {
    resolver_.clear();
    file_index_.clear();
    next_seq_ = 0;
    for (const auto& rec : registry_) next_seq_ = std::max(next_seq_, rec.seq + 1);
    // Walk manifests in registration order so resolver/file-index entries
    // point at the first model that stored each unit.
    std::vector<const ModelRecord*> order;
    for (const auto& rec : registry_) order.push_back(&rec);
    std::sort(order.begin(), order.end(),
              [](const ModelRecord* a, const ModelRecord* b) { return a->seq < b->seq; });
    for (const auto* rec : order) {
        auto it = manifests_.find(rec->model_id);
        if (it == manifests_.end()) continue;
        const auto& m = it->second;
        for (std::size_t fi = 0; fi < m.files.size(); ++fi) {
            const auto& f = m.files[fi];
            file_index_.try_emplace(f.file_id, m.model_id, fi);
            for (const auto& t : f.tensors) resolver_.try_emplace(t.raw_id, t.storage);
        }
    }
}

std::unique_ptr<Store::Snapshot> Store::take_snapshot() const {
    auto snap = std::make_unique<Snapshot>();
    snap->pool_entries = pool_.snapshot_entries();
    snap->registry = registry_;
    snap->manifests = manifests_;
    snap->resolver = resolver_;
    snap->file_index = file_index_;
    snap->next_seq = next_seq_;
    return snap;
}

void Store::restore_snapshot(Snapshot&& snap) {
    pool_.restore_entries(std::move(snap.pool_entries));
    registry_ = std::move(snap.registry);
    manifests_ = std::move(snap.manifests);
    resolver_ = std::move(snap.resolver);
    file_index_ = std::move(snap.file_index);
    next_seq_ = snap.next_seq;
}

fs::path Store::manifest_path(const std::string& model_id) const {
    return root_ / "manifests" / (sanitize_model_id(model_id) + ".json");
}

void Store::write_manifest(const ModelManifest& m) const {
    std::string text = m.to_json();
    write_file_atomic(manifest_path(m.model_id), as_view(text));
}

void Store::commit(const std::vector<const ModelManifest*>& dirty_manifests) {
    pool_.save();
    save_registry();
    // manifests last: the new manifest's rename is the commit point
    for (const auto* m : dirty_manifests) write_manifest(*m);
}

ModelRecord* Store::find_record(const std::string& model_id) {
    for (auto& rec : registry_)
        if (rec.model_id == model_id) return &rec;
    return nullptr;
}

const ModelRecord* Store::find_record(const std::string& model_id) const {
    for (const auto& rec : registry_)
        if (rec.model_id == model_id) return &rec;
    return nullptr;
}

bool Store::has_model(const std::string& model_id) const {
    return manifests_.contains(model_id);
}

const ModelManifest& Store::manifest(const std::string& model_id) const {
    auto it = manifests_.find(model_id);
    if (it == manifests_.end()) fail(ErrorCode::UnknownModel, model_id);
    return it->second;
}

std::vector<std::string> Store::model_ids() const {
    std::vector<std::string> ids;
    ids.reserve(manifests_.size());
    for (const auto& [id, m] : manifests_) ids.push_back(id);
    return ids;
}

Bytes Store::load_tensor(const TensorStorage& storage) const {
    switch (storage.kind) {
        case TensorStorage::Kind::Dedup:
            return pool_.get(storage.primary);
        case TensorStorage::Kind::Bitx: {
            auto delta = parse_bitx_frame(as_view(pool_.get(storage.primary)));
            Bytes base = pool_.get(*storage.base);
            return bitx_decode(delta, base);
        }
        case TensorStorage::Kind::Standalone:
            return standalone_decode(parse_standalone_frame(as_view(pool_.get(storage.primary))));
    }
    fail(ErrorCode::StoreCorruption, "bad storage kind");
}

Store::LoadedModel Store::load_model_tensors(const std::string& model_id,
                                             unsigned threads) const {
    const auto& m = manifest(model_id);
    struct Ref {
        const StoredTensor* tensor;
    };
    std::vector<Ref> refs;
    for (const auto& f : m.files) {
        if (!f.is_safetensors) continue;
        for (const auto& t : f.tensors) refs.push_back({&t});
    }
    LoadedModel out;
    out.buffers.resize(refs.size());
    parallel_for(refs.size(), threads, [&](std::size_t i) {
        out.buffers[i] = std::make_unique<Bytes>(load_tensor(refs[i].tensor->storage));
    });
    out.views.reserve(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& d = refs[i].tensor->descriptor;
        out.views.push_back({d.name, d.dtype, d.shape, as_view(*out.buffers[i])});
    }
    return out;
}

// ---------------------------------------------------------------------------
// ingest

namespace {

struct SourceFile {
    std::string rel_path;
    Bytes bytes;
    bool is_safetensors = false;
    ParsedModelFile parsed; // valid when is_safetensors
};

void add_storage_refs(Pool& pool, const TensorStorage& s) {
    pool.add_ref(s.primary);
    if (s.kind == TensorStorage::Kind::Bitx) pool.add_ref(*s.base);
}

void release_storage_refs(Pool& pool, const TensorStorage& s) {
    pool.release(s.primary);
    if (s.kind == TensorStorage::Kind::Bitx) pool.release(*s.base);
}

} // namespace

ModelManifest Store::ingest(const fs::path& model_dir, const std::string& model_id,
                            const IngestOptions& options) {
    std::lock_guard lock(*mu_);
    sanitize_model_id(model_id); // validates charset
    if (!fs::is_directory(model_dir))
        fail(ErrorCode::InvalidArgument, "model directory not found: " + model_dir.string());
    if (manifests_.contains(model_id) || find_record(model_id))
        fail(ErrorCode::InvalidArgument, "model id already ingested: " + model_id);

    // Collect the file tree in deterministic order.
    std::vector<SourceFile> sources;
    {
        std::vector<fs::path> paths;
        for (const auto& entry : fs::recursive_directory_iterator(model_dir))
            if (entry.is_regular_file()) paths.push_back(entry.path());
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) {
            SourceFile sf;
            sf.rel_path = fs::relative(p, model_dir).generic_string();
            sf.bytes = read_file(p);
            sf.is_safetensors = is_safetensors_path(p);
            if (sf.is_safetensors) sf.parsed = parse_model_bytes(as_view(sf.bytes));
            sources.push_back(std::move(sf));
        }
    }
    bool any_safetensors = false;
    for (const auto& sf : sources) any_safetensors |= sf.is_safetensors;
    if (!any_safetensors)
        fail(ErrorCode::InvalidArgument,
             "no .safetensors files under " + model_dir.string());

    // Model record over all tensors across files.
    std::vector<NamedTensorView> views;
    for (const auto& sf : sources)
        if (sf.is_safetensors)
            for (const auto& v : tensor_views(sf.parsed)) views.push_back(v);
    ModelRecord record = make_model_record(model_id, views);
    record.is_base = options.base_flag;

    if (options.declared_base) {
        record.declared_base = options.declared_base;
    } else {
        std::vector<std::pair<std::string, Bytes>> metadata;
        for (const auto& sf : sources)
            if (!sf.is_safetensors) metadata.emplace_back(sf.rel_path, sf.bytes);
        auto declared = extract_declared_base(metadata);
        record.declared_base = declared.id;
    }

    auto snapshot = take_snapshot();
    try {
        std::vector<const ModelManifest*> dirty;

        // Family assignment (3a declared metadata, 3b bit-distance matching).
        FamilyAssignment family;
        family.model_id = model_id;
        family.threshold = options.threshold;
        if (options.base_flag) {
            family.method = FamilyMethod::None;
        } else {
            DistanceFn distance = [&](const ModelRecord& base) {
                auto loaded = load_model_tensors(base.model_id, options.threads);
                return model_bit_distance(views, loaded.views, options.sampling,
                                          options.zero_policy, options.threads);
            };
            family = assign_family(record, registry_, options.threshold, distance);
        }

        // Base tensor map for BitX pairing (name -> raw id + bytes).
        std::unordered_map<std::string, std::pair<ContentId, Bytes>> base_tensors;
        if (family.base_id) {
            auto mit = manifests_.find(*family.base_id);
            if (mit == manifests_.end())
                fail(ErrorCode::UnknownModel, "base manifest missing: " + *family.base_id);
            make_base_capable(*family.base_id, mit->second);
            dirty.push_back(&mit->second);
            for (const auto& f : mit->second.files) {
                if (!f.is_safetensors) continue;
                for (const auto& t : f.tensors)
                    base_tensors.try_emplace(t.descriptor.name, t.raw_id, Bytes{});
            }
        }
        auto base_bytes = [&](const std::string& name) -> const Bytes& {
            auto& slot = base_tensors.at(name);
            if (slot.second.empty() && pool_.entry(slot.first).logical_size != 0)
                slot.second = pool_.get(slot.first);
            return slot.second;
        };

        ModelManifest m;
        m.model_id = model_id;
        m.family = family;

        for (const auto& sf : sources) {
            m.original_total_bytes += sf.bytes.size();
            ContentId file_id = sha256(as_view(sf.bytes));

            // File dedup prefilter: exact duplicates reuse the stored entry.
            if (auto it = file_index_.find(file_id); it != file_index_.end()) {
                const auto& donor = manifests_.at(it->second.first).files[it->second.second];
                StoredFile copy = donor;
                copy.rel_path = sf.rel_path;
                if (copy.is_safetensors) {
                    pool_.add_ref(copy.header_blob);
                    for (const auto& g : copy.gaps) pool_.add_ref(g.blob);
                    for (const auto& t : copy.tensors) add_storage_refs(pool_, t.storage);
                } else {
                    pool_.add_ref(*copy.blob);
                }
                m.saved.file_dedup += sf.bytes.size();
                m.files.push_back(std::move(copy));
                continue;
            }

            StoredFile f;
            f.rel_path = sf.rel_path;
            f.file_id = file_id;
            f.size = sf.bytes.size();

            if (!sf.is_safetensors) {
                auto [blob_id, was_new] = pool_.put(as_view(sf.bytes), BlobKind::HeaderBlob);
                f.blob = blob_id;
                if (was_new)
                    m.stored_total_bytes += sf.bytes.size();
                else
                    m.saved.file_dedup += sf.bytes.size();
                file_index_.try_emplace(file_id, model_id, m.files.size());
                m.files.push_back(std::move(f));
                continue;
            }

            const ParsedModelFile& parsed = sf.parsed;
            f.is_safetensors = true;
            f.header_len = parsed.header_len;
            f.payload_len = parsed.payload.size();

            auto [header_id, header_new] =
                pool_.put(as_view(parsed.header_bytes), BlobKind::HeaderBlob);
            f.header_blob = header_id;
            if (header_new) m.stored_total_bytes += parsed.header_bytes.size();

            auto hashes = hash_tensors(parsed, options.threads);

            // Pass 1: decide per-tensor storage. Duplicates (in the pool or
            // earlier in this very model) reuse the existing entry.
            enum class Plan { Reuse, Alias, Raw, Bitx, Standalone };
            struct TensorPlan {
                Plan plan;
                std::size_t alias_of = 0;
                const Bytes* base = nullptr;
            };
            std::vector<TensorPlan> plans(hashes.size());
            std::unordered_map<ContentId, std::size_t> local;
            for (std::size_t i = 0; i < hashes.size(); ++i) {
                const ContentId& raw_id = hashes[i].id;
                if (resolver_.contains(raw_id)) {
                    plans[i] = {Plan::Reuse, 0, nullptr};
                } else if (auto lit = local.find(raw_id); lit != local.end()) {
                    plans[i] = {Plan::Alias, lit->second, nullptr};
                } else {
                    local.emplace(raw_id, i);
                    const auto& desc = *hashes[i].desc;
                    if (options.base_flag) {
                        plans[i] = {Plan::Raw, 0, nullptr};
                    } else if (auto bit = base_tensors.find(desc.name);
                               bit != base_tensors.end() &&
                               pool_.entry(bit->second.first).logical_size ==
                                   desc.byte_size()) {
                        plans[i] = {Plan::Bitx, 0, &base_bytes(desc.name)};
                    } else {
                        plans[i] = {Plan::Standalone, 0, nullptr};
                    }
                }
            }

            // Pass 2: encode new frames in parallel.
            std::vector<Bytes> frames(hashes.size());
            parallel_for(hashes.size(), options.threads, [&](std::size_t i) {
                const auto& desc = *hashes[i].desc;
                ByteView raw = parsed.tensor_bytes(desc);
                if (plans[i].plan == Plan::Bitx)
                    frames[i] =
                        serialize_frame(bitx_encode(raw, as_view(*plans[i].base), options.level));
                else if (plans[i].plan == Plan::Standalone)
                    frames[i] = serialize_frame(standalone_encode(raw, options.level));
            });

            // Pass 3: pool writes, refcounts, manifest entries, accounting.
            for (std::size_t i = 0; i < hashes.size(); ++i) {
                const auto& desc = *hashes[i].desc;
                const ContentId& raw_id = hashes[i].id;
                const std::uint64_t logical = desc.byte_size();
                StoredTensor entry;
                entry.descriptor = desc;
                entry.raw_id = raw_id;

                switch (plans[i].plan) {
                    case Plan::Reuse: {
                        entry.storage = resolver_.at(raw_id);
                        add_storage_refs(pool_, entry.storage);
                        m.saved.tensor_dedup += logical;
                        break;
                    }
                    case Plan::Alias: {
                        entry.storage = f.tensors[plans[i].alias_of].storage;
                        add_storage_refs(pool_, entry.storage);
                        m.saved.tensor_dedup += logical;
                        break;
                    }
                    case Plan::Raw: {
                        auto [id, was_new] =
                            pool_.put(parsed.tensor_bytes(desc), BlobKind::RawTensor);
                        entry.storage = {TensorStorage::Kind::Dedup, id, std::nullopt};
                        if (was_new)
                            m.stored_total_bytes += logical;
                        else
                            m.saved.tensor_dedup += logical;
                        resolver_.try_emplace(raw_id, entry.storage);
                        break;
                    }
                    case Plan::Bitx: {
                        auto [id, was_new] = pool_.put(as_view(frames[i]),
                                                       BlobKind::CompressedDelta, logical);
                        entry.storage = {TensorStorage::Kind::Bitx, id,
                                         base_tensors.at(desc.name).first};
                        pool_.add_ref(*entry.storage.base); // pin the base tensor
                        if (was_new) {
                            m.stored_total_bytes += frames[i].size();
                            m.saved.bitx += logical - std::min<std::uint64_t>(
                                                          logical, frames[i].size());
                        } else {
                            m.saved.tensor_dedup += logical;
                        }
                        resolver_.try_emplace(raw_id, entry.storage);
                        break;
                    }
                    case Plan::Standalone: {
                        auto [id, was_new] = pool_.put(
                            as_view(frames[i]), BlobKind::CompressedStandalone, logical);
                        entry.storage = {TensorStorage::Kind::Standalone, id, std::nullopt};
                        if (was_new) {
                            m.stored_total_bytes += frames[i].size();
                            m.saved.standalone += logical - std::min<std::uint64_t>(
                                                                logical, frames[i].size());
                        } else {
                            m.saved.tensor_dedup += logical;
                        }
                        resolver_.try_emplace(raw_id, entry.storage);
                        break;
                    }
                }
                f.tensors.push_back(std::move(entry));
            }

            for (auto [begin, end] : parsed.payload_gaps()) {
                ByteView gap{parsed.payload.data() + begin, end - begin};
                auto [gap_id, was_new] = pool_.put(gap, BlobKind::HeaderBlob);
                if (was_new) m.stored_total_bytes += gap.size();
                f.gaps.push_back({begin, end, gap_id});
            }

            file_index_.try_emplace(file_id, model_id, m.files.size());
            m.files.push_back(std::move(f));
        }

        record.seq = next_seq_++;
        registry_.push_back(record);
        auto [mit, inserted] = manifests_.emplace(model_id, std::move(m));
        dirty.push_back(&mit->second);
        commit(dirty);
        return mit->second;
    } catch (...) {
        restore_snapshot(std::move(*snapshot));
        throw;
    }
}

// ---------------------------------------------------------------------------
// base promotion

void Store::make_base_capable(const std::string& model_id, ModelManifest& m) {
    ModelRecord* rec = find_record(model_id);
    if (!rec) fail(ErrorCode::UnknownModel, model_id);
    bool changed = false;
    for (auto& f : m.files) {
        if (!f.is_safetensors) continue;
        for (auto& t : f.tensors) {
            if (t.storage.kind == TensorStorage::Kind::Dedup) continue;
            Bytes raw = load_tensor(t.storage);
            auto [raw_id, was_new] = pool_.put(as_view(raw), BlobKind::RawTensor);
            if (raw_id != t.raw_id)
                fail(ErrorCode::StoreCorruption,
                     "tensor " + t.descriptor.name + " of " + model_id +
                         " decoded to unexpected content");
            release_storage_refs(pool_, t.storage);
            if (was_new) m.stored_total_bytes += raw.size();
            t.storage = {TensorStorage::Kind::Dedup, raw_id, std::nullopt};
            resolver_[t.raw_id] = t.storage;
            changed = true;
        }
    }
    rec->is_base = true;
    if (changed) {
        // frames replaced by raw blobs: drop their savings from the breakdown
        m.saved.bitx = 0;
        m.saved.standalone = 0;
    }
}

// ---------------------------------------------------------------------------
// retrieve

void Store::retrieve(const std::string& model_id, const fs::path& out_dir,
                     unsigned threads) const {
    const auto& m = manifest(model_id);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create " + out_dir.string());

    for (const auto& f : m.files) {
        Bytes file_bytes;
        if (f.is_safetensors) {
            Bytes header = pool_.get(f.header_blob);
            if (header.size() != f.header_len)
                fail(ErrorCode::ReconstructionMismatch,
                     "header blob length mismatch for " + f.rel_path);
            Bytes payload(f.payload_len);
            parallel_for(f.tensors.size(), threads, [&](std::size_t i) {
                const auto& t = f.tensors[i];
                Bytes raw = load_tensor(t.storage);
                if (raw.size() != t.descriptor.byte_size())
                    fail(ErrorCode::ReconstructionMismatch,
                         "tensor " + t.descriptor.name + " decoded to wrong length");
                std::copy(raw.begin(), raw.end(),
                          payload.begin() +
                              static_cast<std::ptrdiff_t>(t.descriptor.data_begin));
            });
            for (const auto& g : f.gaps) {
                Bytes gap = pool_.get(g.blob);
                if (gap.size() != g.end - g.begin)
                    fail(ErrorCode::ReconstructionMismatch, "gap blob length mismatch");
                std::copy(gap.begin(), gap.end(),
                          payload.begin() + static_cast<std::ptrdiff_t>(g.begin));
            }
            file_bytes.resize(8 + header.size() + payload.size());
            store_le64(file_bytes.data(), f.header_len);
            std::copy(header.begin(), header.end(), file_bytes.begin() + 8);
            std::copy(payload.begin(), payload.end(),
                      file_bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header.size()));
        } else {
            file_bytes = pool_.get(*f.blob);
        }

        // verify before anything lands on disk; never emit corrupt output
        if (sha256(as_view(file_bytes)) != f.file_id)
            fail(ErrorCode::ReconstructionMismatch,
                 f.rel_path + " reconstructed with wrong hash");

        fs::path out_path = out_dir / f.rel_path;
        fs::create_directories(out_path.parent_path(), ec);
        write_file_atomic(out_path, as_view(file_bytes));
    }
}

// ---------------------------------------------------------------------------
// rebase

ModelManifest Store::rebase(const std::string& model_id, const std::string& new_base_id,
                            int level) {
    std::lock_guard lock(*mu_);
    auto mit = manifests_.find(model_id);
    if (mit == manifests_.end()) fail(ErrorCode::UnknownModel, model_id);
    auto bit = manifests_.find(new_base_id);
    if (bit == manifests_.end()) fail(ErrorCode::UnknownModel, new_base_id);
    if (model_id == new_base_id)
        fail(ErrorCode::InvalidArgument, "cannot rebase a model onto itself");

    auto snapshot = take_snapshot();
    try {
        ModelManifest& m = mit->second;
        ModelManifest& base_m = bit->second;
        make_base_capable(new_base_id, base_m);

        std::unordered_map<std::string, const StoredTensor*> base_by_name;
        for (const auto& f : base_m.files) {
            if (!f.is_safetensors) continue;
            for (const auto& t : f.tensors) base_by_name.try_emplace(t.descriptor.name, &t);
        }

        bool any_overlap = false;
        for (const auto& f : m.files) {
            if (!f.is_safetensors) continue;
            for (const auto& t : f.tensors) {
                auto bt = base_by_name.find(t.descriptor.name);
                if (bt != base_by_name.end() &&
                    bt->second->descriptor.byte_size() == t.descriptor.byte_size())
                    any_overlap = true;
            }
        }
        if (!any_overlap)
            fail(ErrorCode::IncompatibleSurrogate,
                 new_base_id + " shares no tensor names/sizes with " + model_id);

        bool any_bitx = false;
        for (auto& f : m.files) {
            if (!f.is_safetensors) continue;
            for (auto& t : f.tensors) {
                if (t.storage.kind != TensorStorage::Kind::Bitx) continue;
                Bytes fine = load_tensor(t.storage);

                Bytes frame;
                TensorStorage next;
                auto bt = base_by_name.find(t.descriptor.name);
                if (bt != base_by_name.end() &&
                    bt->second->descriptor.byte_size() == fine.size()) {
                    Bytes base_raw = pool_.get(bt->second->storage.primary);
                    Bytes bitx_frame =
                        serialize_frame(bitx_encode(as_view(fine), as_view(base_raw), level));
                    Bytes std_frame = serialize_frame(standalone_encode(as_view(fine), level));
                    // 4.4.4 fallback: keep whichever representation is smaller
                    if (bitx_frame.size() <= std_frame.size()) {
                        frame = std::move(bitx_frame);
                        next.kind = TensorStorage::Kind::Bitx;
                        next.base = bt->second->raw_id;
                    } else {
                        frame = std::move(std_frame);
                        next.kind = TensorStorage::Kind::Standalone;
                    }
                } else {
                    frame = serialize_frame(standalone_encode(as_view(fine), level));
                    next.kind = TensorStorage::Kind::Standalone;
                }

                auto [id, was_new] = pool_.put(
                    as_view(frame),
                    next.kind == TensorStorage::Kind::Bitx ? BlobKind::CompressedDelta
                                                           : BlobKind::CompressedStandalone,
                    fine.size());
                next.primary = id;
                if (next.kind == TensorStorage::Kind::Bitx) {
                    pool_.add_ref(*next.base);
                    any_bitx = true;
                }
                if (was_new) m.stored_total_bytes += frame.size();
                release_storage_refs(pool_, t.storage);
                t.storage = next;
                resolver_[t.raw_id] = next;
            }
        }

        // refresh the delta-savings breakdown from the current entries
        m.saved.bitx = 0;
        m.saved.standalone = 0;
        std::unordered_set<ContentId> counted;
        for (const auto& f : m.files) {
            if (!f.is_safetensors) continue;
            for (const auto& t : f.tensors) {
                if (!counted.insert(t.storage.primary).second) continue;
                auto e = pool_.entry(t.storage.primary);
                if (t.storage.kind == TensorStorage::Kind::Bitx && e.logical_size > e.stored_size)
                    m.saved.bitx += e.logical_size - e.stored_size;
                if (t.storage.kind == TensorStorage::Kind::Standalone &&
                    e.logical_size > e.stored_size)
                    m.saved.standalone += e.logical_size - e.stored_size;
            }
        }

        if (any_bitx) {
            auto loaded = load_model_tensors(model_id);
            auto base_loaded = load_model_tensors(new_base_id);
            auto report = model_bit_distance(loaded.views, base_loaded.views);
            double threshold = m.family.threshold > 0 ? m.family.threshold : kDefaultThreshold;
            if (report.threshold_distance < threshold) {
                m.family.method = FamilyMethod::BitDistance;
                m.family.base_id = new_base_id;
                m.family.distance = report.threshold_distance;
            } else {
                m.family.method = FamilyMethod::None;
                m.family.base_id = new_base_id; // entries still reference it
                m.family.distance = report.threshold_distance;
            }
        } else {
            m.family.method = FamilyMethod::None;
            m.family.base_id.reset();
            m.family.distance.reset();
        }

        commit({&base_m, &m});
        return m;
    } catch (...) {
        restore_snapshot(std::move(*snapshot));
        throw;
    }
}

// ---------------------------------------------------------------------------
// stats / gc / fsck

StoreStats Store::stats() const {
    StoreStats s;
    s.models = manifests_.size();
    for (const auto& [id, m] : manifests_) {
        s.original_bytes += m.original_total_bytes;
        s.saved.file_dedup += m.saved.file_dedup;
        s.saved.tensor_dedup += m.saved.tensor_dedup;
        s.saved.bitx += m.saved.bitx;
        s.saved.standalone += m.saved.standalone;
    }
    s.stored_bytes = pool_.physical_bytes();
    std::error_code ec;
    auto add_size = [&](const fs::path& p) {
        auto sz = fs::file_size(p, ec);
        if (!ec) s.metadata_bytes += sz;
    };
    add_size(root_ / "index");
    add_size(root_ / "registry.json");
    if (fs::exists(root_ / "manifests"))
        for (const auto& entry : fs::directory_iterator(root_ / "manifests"))
            if (entry.is_regular_file()) add_size(entry.path());
    return s;
}

std::size_t Store::gc() {
    std::lock_guard lock(*mu_);
    std::size_t removed = pool_.gc();
    // sweep orphan blob files left behind by rolled-back ingests
    const fs::path pool_dir = root_ / "pool";
    if (fs::exists(pool_dir)) {
        for (const auto& entry : fs::recursive_directory_iterator(pool_dir)) {
            if (!entry.is_regular_file()) continue;
            std::string name = entry.path().filename().string();
            if (name.size() != 64) continue;
            bool known = false;
            try {
                known = pool_.contains(ContentId::from_hex(name));
            } catch (const Error&) {
                continue;
            }
            if (!known) {
                std::error_code ec;
                fs::remove(entry.path(), ec);
                ++removed;
            }
        }
    }
    pool_.save();
    return removed;
}

std::size_t Store::fsck() {
    std::lock_guard lock(*mu_);
    std::unordered_map<ContentId, std::uint64_t> refs;
    for (const auto& [id, m] : manifests_) {
        for (const auto& f : m.files) {
            if (f.is_safetensors) {
                refs[f.header_blob] += 1;
                for (const auto& g : f.gaps) refs[g.blob] += 1;
                for (const auto& t : f.tensors) {
                    refs[t.storage.primary] += 1;
                    if (t.storage.kind == TensorStorage::Kind::Bitx)
                        refs[*t.storage.base] += 1;
                }
            } else {
                refs[*f.blob] += 1;
            }
        }
    }
    std::size_t changed = 0;
    pool_.for_each([&](const PoolEntry& e) {
        auto it = refs.find(e.id);
        std::uint64_t want = it == refs.end() ? 0 : it->second;
        if (want != e.refcount) ++changed;
    });
    pool_.reset_refcounts(refs);
    rebuild_derived_state();
    pool_.save();
    return changed;
}

} // namespace tv

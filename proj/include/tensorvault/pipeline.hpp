// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tensorvault/bitdist.hpp"
#include "tensorvault/bitx.hpp"
#include "tensorvault/dedup.hpp"
#include "tensorvault/lineage.hpp"
#include "tensorvault/pool.hpp"
#include "tensorvault/safetensors.hpp"

namespace tv {

struct TensorStorage {
    enum class Kind { Dedup, Bitx, Standalone };
    Kind kind = Kind::Dedup;
    ContentId primary;              // raw tensor / delta frame / standalone frame
    std::optional<ContentId> base;  // raw base tensor (bitx only)
};

struct StoredTensor {
    TensorDescriptor descriptor;
    ContentId raw_id; // hash of the tensor's raw bytes
    TensorStorage storage;
};

struct GapEntry {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
    ContentId blob;
};

struct StoredFile {
    std::string rel_path;
    bool is_safetensors = false;
    ContentId file_id; // whole-file hash, verified on retrieval

    // safetensors files
    ContentId header_blob;
    std::uint64_t header_len = 0;
    std::uint64_t payload_len = 0;
    std::vector<StoredTensor> tensors; // ascending data_begin
    std::vector<GapEntry> gaps;

    // auxiliary files (configs, tokenizers): stored whole, dedup only
    std::optional<ContentId> blob;
    std::uint64_t size = 0;
};

struct MechanismBytes {
    std::uint64_t file_dedup = 0;
    std::uint64_t tensor_dedup = 0;
    std::uint64_t bitx = 0;
    std::uint64_t standalone = 0;

    std::uint64_t total() const { return file_dedup + tensor_dedup + bitx + standalone; }
};

struct ModelManifest {
    std::string model_id;
    std::vector<StoredFile> files;
    FamilyAssignment family;
    std::uint64_t original_total_bytes = 0;
    // Pool bytes first stored by this model's ingest; shared blobs are
    // attributed to the model that stored them.
    std::uint64_t stored_total_bytes = 0;
    MechanismBytes saved; // bytes avoided, per mechanism

    std::string to_json() const;
    static ModelManifest from_json(const std::string& text);
};

struct StoreStats {
    std::uint64_t models = 0;
    std::uint64_t original_bytes = 0;
    std::uint64_t stored_bytes = 0; // physical pool bytes
    std::uint64_t metadata_bytes = 0; // index + manifests + registry
    MechanismBytes saved;

    double reduction_ratio() const {
        return original_bytes ? 1.0 - double(stored_bytes) / double(original_bytes) : 0.0;
    }
};

struct IngestOptions {
    std::optional<std::string> declared_base; // overrides metadata extraction
    double threshold = kDefaultThreshold;
    int level = kDefaultCompressionLevel;
    bool base_flag = false; // register as family base; tensors stored raw
    SamplingPolicy sampling;
    ZeroPolicy zero_policy = ZeroPolicy::ExcludeBothZero;
    unsigned threads = 0;
};

// Store root layout:
//   pool/               content-addressed blobs (see Pool)
//   index               pool index
//   manifests/<id>.json per-model reconstruction recipe
//   registry.json       model records (shape digests, base flags, lineage)
class Store {
public:
    static Store open(const std::filesystem::path& root);

    // Fig-10 ingest: whole-file dedup prefilter, per-tensor dedup, family
    // assignment, BitX or standalone compression, atomic manifest commit.
    // On any failure no manifest and no refcount changes persist; already
    // written blob files are orphan-collectable.
    ModelManifest ingest(const std::filesystem::path& model_dir,
                         const std::string& model_id, const IngestOptions& options = {});

    // Reconstructs every file byte-identically (verified against file_id;
    // aborts with ReconstructionMismatch rather than emit corrupt output).
    void retrieve(const std::string& model_id, const std::filesystem::path& out_dir,
                  unsigned threads = 0) const;

    // Re-encodes the model's delta entries against a surrogate base. Entries
    // whose new BitX frame would exceed the standalone frame switch to
    // standalone storage. Old base references are released.
    ModelManifest rebase(const std::string& model_id, const std::string& new_base_id,
                         int level = kDefaultCompressionLevel);

    StoreStats stats() const;
    std::size_t gc();

    // Recomputes refcounts from manifests and drops unreferenced index
    // entries (recovery after a crash between index save and manifest
    // commit). Returns the number of entries whose refcount changed.
    std::size_t fsck();

    bool has_model(const std::string& model_id) const;
    const ModelManifest& manifest(const std::string& model_id) const;
    const std::vector<ModelRecord>& registry() const { return registry_; }
    std::vector<std::string> model_ids() const;

    Pool& pool() { return pool_; }
    const Pool& pool() const { return pool_; }

    // Decoded raw bytes of one stored tensor.
    Bytes load_tensor(const TensorStorage& storage) const;

    // All tensors of a model decoded into memory, with stable views for the
    // bit-distance ops.
    struct LoadedModel {
        std::vector<std::unique_ptr<Bytes>> buffers;
        std::vector<NamedTensorView> views;
    };
    LoadedModel load_model_tensors(const std::string& model_id,
                                   unsigned threads = 0) const;

    const std::filesystem::path& root() const { return root_; }

private:
    explicit Store(const std::filesystem::path& root);

    struct Snapshot;
    std::unique_ptr<Snapshot> take_snapshot() const;
    void restore_snapshot(Snapshot&& snap);

    void commit(const std::vector<const ModelManifest*>& dirty_manifests);
    void write_manifest(const ModelManifest& m) const;
    std::filesystem::path manifest_path(const std::string& model_id) const;

    // Ensures every tensor of `model_id` is stored raw so it can serve as a
    // BitX base; rewrites its manifest entries in place.
    void make_base_capable(const std::string& model_id, ModelManifest& m);

    ModelRecord* find_record(const std::string& model_id);
    const ModelRecord* find_record(const std::string& model_id) const;

    void load_registry();
    void save_registry() const;
    void rebuild_derived_state();

    std::filesystem::path root_;
    Pool pool_;
    std::vector<ModelRecord> registry_;
    std::map<std::string, ModelManifest> manifests_;
    // raw tensor id -> storage chosen when first seen
    std::unordered_map<ContentId, TensorStorage> resolver_;
    // whole-file id -> (model_id, file index) for the exact-duplicate prefilter
    std::unordered_map<ContentId, std::pair<std::string, std::size_t>> file_index_;
    std::uint64_t next_seq_ = 0;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>(); // single-writer commit
};

std::string sanitize_model_id(const std::string& model_id);

} // namespace tv

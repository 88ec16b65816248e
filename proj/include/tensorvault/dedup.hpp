// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tensorvault/hash.hpp"
#include "tensorvault/pool.hpp"
#include "tensorvault/safetensors.hpp"

namespace tv {

enum class Granularity { File, Layer, Tensor, Chunk };

const char* to_string(Granularity g);

// Estimated index metadata cost per unique unit (hash, location, refcount,
// timestamps): 64 bytes.
inline constexpr std::uint64_t kMetadataBytesPerEntry = 64;

struct DedupReport {
    Granularity granularity = Granularity::File;
    std::uint64_t total_units = 0;
    std::uint64_t unique_units = 0;
    std::uint64_t total_bytes = 0;
    std::uint64_t deduped_bytes = 0; // bytes of units whose id was seen before
    std::uint64_t index_entries = 0; // == unique_units
    std::uint64_t estimated_metadata_bytes = 0;
    std::uint64_t max_unit_bytes = 0;

    double reduction_ratio() const {
        return total_bytes ? double(deduped_bytes) / double(total_bytes) : 0.0;
    }
    double avg_unit_bytes() const {
        return total_units ? double(total_bytes) / double(total_units) : 0.0;
    }
};

// First-occurrence accounting over a session corpus at one granularity.
class DedupTracker {
public:
    explicit DedupTracker(Granularity g) : granularity_(g) {}

    // Returns true when the unit was new (first occurrence).
    bool add_unit(const ContentId& id, std::uint64_t bytes);

    DedupReport report() const;

private:
    Granularity granularity_;
    std::unordered_set<ContentId> seen_;
    DedupReport acc_{granularity_};
};

// Maps a tensor name to its layer key: the longest prefix ending in
// "layers.<N>."; tensors without one form singleton layers (their own name).
std::string default_layer_key(std::string_view tensor_name);

using LayerRule = std::function<std::string(std::string_view)>;

struct TensorHashResult {
    const TensorDescriptor* desc;
    ContentId id;
    bool was_new = false; // filled by pool-backed dedup
};

// Hashes every tensor slice; parallel across tensors, results in file order.
std::vector<TensorHashResult> hash_tensors(const ParsedModelFile& parsed,
                                           unsigned threads = 0);

// Session deduplication index over a pool, at file / layer / tensor
// granularity. Layer and file units are accounted only (whole files and
// layer concatenations are never stored as blobs); tensor units are put
// into the pool as raw tensors.
class DedupIndex {
public:
    explicit DedupIndex(Pool* pool = nullptr) : pool_(pool) {}

    std::pair<ContentId, DedupReport> dedup_file(ByteView file_bytes);
    std::pair<ContentId, DedupReport> dedup_file(const ParsedModelFile& parsed);

    std::pair<std::vector<TensorHashResult>, DedupReport>
    dedup_tensors(const ParsedModelFile& parsed, unsigned threads = 0);

    DedupReport dedup_layers(const ParsedModelFile& parsed,
                             const LayerRule& rule = default_layer_key);

    const DedupTracker& file_tracker() const { return files_; }
    const DedupTracker& tensor_tracker() const { return tensors_; }
    const DedupTracker& layer_tracker() const { return layers_; }

private:
    Pool* pool_;
    DedupTracker files_{Granularity::File};
    DedupTracker layers_{Granularity::Layer};
    DedupTracker tensors_{Granularity::Tensor};
};

} // namespace tv

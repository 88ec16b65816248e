// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/dedup.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include "tensorvault/parallel.hpp"

namespace tv {

const char* to_string(Granularity g) {
    switch (g) {
        case Granularity::File: return "file";
        case Granularity::Layer: return "layer";
        case Granularity::Tensor: return "tensor";
        case Granularity::Chunk: return "chunk";
    }
    return "unknown";
}

bool DedupTracker::add_unit(const ContentId& id, std::uint64_t bytes) {
    acc_.total_units += 1;
    acc_.total_bytes += bytes;
    acc_.max_unit_bytes = std::max(acc_.max_unit_bytes, bytes);
    if (seen_.insert(id).second) {
        acc_.unique_units += 1;
        return true;
    }
    acc_.deduped_bytes += bytes;
    return false;
}

DedupReport DedupTracker::report() const {
    DedupReport r = acc_;
    r.granularity = granularity_;
    r.index_entries = r.unique_units;
    r.estimated_metadata_bytes = r.index_entries * kMetadataBytesPerEntry;
    return r;
}

std::string default_layer_key(std::string_view tensor_name) {
    // Longest prefix ending in "layers.<N>."; no prefix -> singleton layer.
    static const std::regex layer_re(R"(^(.*layers\.[0-9]+\.))");
    std::cmatch m;
    if (std::regex_search(tensor_name.data(), tensor_name.data() + tensor_name.size(),
                          m, layer_re))
        return m[1].str();
    return std::string(tensor_name);
}

std::vector<TensorHashResult> hash_tensors(const ParsedModelFile& parsed,
                                           unsigned threads) {
    std::vector<TensorHashResult> out(parsed.tensors.size());
    parallel_for(parsed.tensors.size(), threads, [&](std::size_t i) {
        const auto& desc = parsed.tensors[i];
        out[i] = TensorHashResult{&desc, sha256(parsed.tensor_bytes(desc)), false};
    });
    return out;
}

std::pair<ContentId, DedupReport> DedupIndex::dedup_file(ByteView file_bytes) {
    ContentId id = sha256(file_bytes);
    files_.add_unit(id, file_bytes.size());
    return {id, files_.report()};
}

std::pair<ContentId, DedupReport> DedupIndex::dedup_file(const ParsedModelFile& parsed) {
    return dedup_file(as_view(serialize_model_bytes(parsed)));
}

std::pair<std::vector<TensorHashResult>, DedupReport>
DedupIndex::dedup_tensors(const ParsedModelFile& parsed, unsigned threads) {
    auto hashes = hash_tensors(parsed, threads);
    for (auto& h : hashes) {
        bool first = tensors_.add_unit(h.id, h.desc->byte_size());
        if (pool_) {
            auto [id, was_new] = pool_->put(parsed.tensor_bytes(*h.desc), BlobKind::RawTensor);
            h.was_new = was_new;
        } else {
            h.was_new = first;
        }
    }
    return {std::move(hashes), tensors_.report()};
}

DedupReport DedupIndex::dedup_layers(const ParsedModelFile& parsed, const LayerRule& rule) {
    // Group tensors by layer key; hash each layer's concatenated bytes in
    // offset order as one unit.
    std::map<std::string, std::vector<const TensorDescriptor*>> layers;
    for (const auto& t : parsed.tensors) layers[rule(t.name)].push_back(&t);

    for (const auto& [key, descs] : layers) {
        Sha256 h;
        std::uint64_t bytes = 0;
        for (const auto* d : descs) { // already in offset order within the file
            h.update(parsed.tensor_bytes(*d));
            bytes += d->byte_size();
        }
        layers_.add_unit(h.finish(), bytes);
    }
    return layers_.report();
}

} // namespace tv

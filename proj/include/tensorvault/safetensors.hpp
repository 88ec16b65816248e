// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tensorvault/bytes.hpp"
#include "tensorvault/dtype.hpp"

namespace tv {

// Container layout, bit-exact:
//   [8-byte LE u64 header length N][N bytes UTF-8 JSON][tensor payload]
// Header maps tensor name -> {"dtype", "shape", "data_offsets": [begin, end]}
// with an optional "__metadata__" string map. Offsets are relative to the end
// of the header.

struct TensorDescriptor {
    std::string name;
    DType dtype;
    std::vector<std::uint64_t> shape;
    std::uint64_t data_begin = 0; // relative to end of header
    std::uint64_t data_end = 0;   // exclusive

    std::uint64_t num_elements() const;
    std::uint64_t byte_size() const { return data_end - data_begin; }
};

struct ParsedModelFile {
    std::uint64_t header_len = 0;
    Bytes header_bytes; // original header, preserved verbatim
    std::vector<TensorDescriptor> tensors; // ascending data_begin
    Bytes payload;
    std::map<std::string, std::string> extra_metadata; // "__metadata__" entry

    ByteView tensor_bytes(std::string_view name) const;
    ByteView tensor_bytes(const TensorDescriptor& desc) const;

    // Payload byte ranges not covered by any tensor (padding / gaps).
    // Gaps survive round-trip because the payload is kept verbatim.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> payload_gaps() const;
};

ParsedModelFile parse_model_bytes(ByteView file_bytes);
ParsedModelFile parse_model_file(const std::filesystem::path& path);

Bytes serialize_model_bytes(const ParsedModelFile& parsed);
void serialize_model_file(const ParsedModelFile& parsed,
                          const std::filesystem::path& out);

// Header-only view for range reads of files larger than memory.
struct ModelFileInfo {
    std::filesystem::path path;
    std::uint64_t header_len = 0;
    Bytes header_bytes;
    std::vector<TensorDescriptor> tensors;
    std::uint64_t payload_len = 0;
    std::map<std::string, std::string> extra_metadata;
};

ModelFileInfo parse_model_header(const std::filesystem::path& path);
Bytes read_tensor_range(const ModelFileInfo& info, const TensorDescriptor& desc);

bool is_safetensors_path(const std::filesystem::path& path);

} // namespace tv

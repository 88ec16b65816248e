// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/safetensors.hpp"

#include <algorithm>
#include <limits>

#include <json.hpp>

#include "tensorvault/errors.hpp"

namespace tv {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t TensorDescriptor::num_elements() const {
    std::uint64_t n = 1;
    for (auto d : shape) {
        if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d)
            fail(ErrorCode::MalformedHeader, "shape product overflow for tensor " + name);
        n *= d;
    }
    return n;
}

namespace {

// Builds descriptors from the parsed header JSON. Header bytes themselves
// are never re-serialized; JSON key order and whitespace are not canonical.
std::pair<std::vector<TensorDescriptor>, std::map<std::string, std::string>>
descriptors_from_header(ByteView header_bytes, std::uint64_t payload_len) {
    json doc;
    try {
        doc = json::parse(header_bytes.begin(), header_bytes.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedHeader, std::string("header is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorCode::MalformedHeader, "header is not a JSON object");

    std::vector<TensorDescriptor> tensors;
    std::map<std::string, std::string> extra;

    for (const auto& [name, value] : doc.items()) {
        if (name == "__metadata__") {
            if (!value.is_object())
                fail(ErrorCode::MalformedHeader, "__metadata__ is not an object");
            for (const auto& [k, v] : value.items()) {
                if (!v.is_string())
                    fail(ErrorCode::MalformedHeader, "__metadata__ values must be strings");
                extra[k] = v.get<std::string>();
            }
            continue;
        }
        if (!value.is_object())
            fail(ErrorCode::MalformedHeader, "tensor entry " + name + " is not an object");
        if (!value.contains("dtype") || !value.contains("shape") ||
            !value.contains("data_offsets"))
            fail(ErrorCode::MalformedHeader, "tensor entry " + name + " missing required field");

        TensorDescriptor desc;
        desc.name = name;
        if (!value["dtype"].is_string())
            fail(ErrorCode::MalformedHeader, "dtype of " + name + " is not a string");
        desc.dtype = dtype_from_label(value["dtype"].get<std::string>());

        const auto& shape = value["shape"];
        if (!shape.is_array())
            fail(ErrorCode::MalformedHeader, "shape of " + name + " is not an array");
        for (const auto& dim : shape) {
            if (!dim.is_number_integer() || dim.get<std::int64_t>() < 0)
                fail(ErrorCode::MalformedHeader, "bad shape dimension in " + name);
            desc.shape.push_back(dim.get<std::uint64_t>());
        }

        const auto& offsets = value["data_offsets"];
        if (!offsets.is_array() || offsets.size() != 2 ||
            !offsets[0].is_number_integer() || !offsets[1].is_number_integer())
            fail(ErrorCode::MalformedHeader, "bad data_offsets in " + name);
        desc.data_begin = offsets[0].get<std::uint64_t>();
        desc.data_end = offsets[1].get<std::uint64_t>();
        if (desc.data_begin > desc.data_end)
            fail(ErrorCode::MalformedHeader, "data_offsets reversed in " + name);
        if (desc.data_end > payload_len)
            fail(ErrorCode::TruncatedFile,
                 "tensor " + name + " ends at " + std::to_string(desc.data_end) +
                     " but payload is " + std::to_string(payload_len) + " bytes");

        std::uint64_t numel = desc.num_elements();
        if (desc.dtype.tag == DTypeTag::Other) {
            // Unknown dtype: infer the element width from the byte range so
            // dedup and round-trip still work; fall back to an opaque range.
            std::uint64_t len = desc.data_end - desc.data_begin;
            if (numel > 0 && len % numel == 0)
                desc.dtype.width = static_cast<std::uint32_t>(len / numel);
        } else {
            std::uint64_t expected = numel * desc.dtype.width;
            if (desc.data_end - desc.data_begin != expected)
                fail(ErrorCode::MalformedHeader,
                     "tensor " + name + " byte range does not match shape x width");
        }
        tensors.push_back(std::move(desc));
    }

    std::sort(tensors.begin(), tensors.end(),
              [](const TensorDescriptor& a, const TensorDescriptor& b) {
                  if (a.data_begin != b.data_begin) return a.data_begin < b.data_begin;
                  return a.data_end < b.data_end;
              });
    for (std::size_t i = 1; i < tensors.size(); ++i) {
        if (tensors[i].data_begin < tensors[i - 1].data_end)
            fail(ErrorCode::OverlappingTensors,
                 tensors[i - 1].name + " and " + tensors[i].name + " overlap");
    }
    return {std::move(tensors), std::move(extra)};
}

std::uint64_t read_header_len(ByteView file_bytes) {
    if (file_bytes.size() < 8)
        fail(ErrorCode::TruncatedFile, "file shorter than the 8-byte length prefix");
    std::uint64_t n = load_le64(file_bytes.data());
    if (file_bytes.size() - 8 < n)
        fail(ErrorCode::TruncatedFile, "header length " + std::to_string(n) +
                                           " exceeds file size " +
                                           std::to_string(file_bytes.size()));
    return n;
}

} // namespace

ParsedModelFile parse_model_bytes(ByteView file_bytes) {
    std::uint64_t n = read_header_len(file_bytes);
    ParsedModelFile out;
    out.header_len = n;
    out.header_bytes.assign(file_bytes.begin() + 8, file_bytes.begin() + 8 + n);
    out.payload.assign(file_bytes.begin() + 8 + n, file_bytes.end());
    auto [tensors, extra] = descriptors_from_header(as_view(out.header_bytes), out.payload.size());
    out.tensors = std::move(tensors);
    out.extra_metadata = std::move(extra);
    return out;
}

ParsedModelFile parse_model_file(const fs::path& path) {
    return parse_model_bytes(as_view(read_file(path)));
}

ByteView ParsedModelFile::tensor_bytes(const TensorDescriptor& desc) const {
    return ByteView{payload.data() + desc.data_begin, desc.byte_size()};
}

ByteView ParsedModelFile::tensor_bytes(std::string_view name) const {
    for (const auto& t : tensors)
        if (t.name == name) return tensor_bytes(t);
    fail(ErrorCode::UnknownTensor, std::string(name));
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> ParsedModelFile::payload_gaps() const {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> gaps;
    std::uint64_t cursor = 0;
    for (const auto& t : tensors) {
        if (t.data_begin > cursor) gaps.emplace_back(cursor, t.data_begin);
        cursor = std::max(cursor, t.data_end);
    }
    if (cursor < payload.size()) gaps.emplace_back(cursor, payload.size());
    return gaps;
}

Bytes serialize_model_bytes(const ParsedModelFile& parsed) {
    if (parsed.header_len != parsed.header_bytes.size())
        fail(ErrorCode::InvalidArgument, "header_len does not match header_bytes");
    for (const auto& t : parsed.tensors)
        if (t.data_end > parsed.payload.size())
            fail(ErrorCode::InvalidArgument,
                 "tensor " + t.name + " exceeds payload length");
    Bytes out(8 + parsed.header_bytes.size() + parsed.payload.size());
    store_le64(out.data(), parsed.header_len);
    std::copy(parsed.header_bytes.begin(), parsed.header_bytes.end(), out.begin() + 8);
    std::copy(parsed.payload.begin(), parsed.payload.end(),
              out.begin() + 8 + static_cast<std::ptrdiff_t>(parsed.header_bytes.size()));
    return out;
}

void serialize_model_file(const ParsedModelFile& parsed, const fs::path& out) {
    write_file(out, as_view(serialize_model_bytes(parsed)));
}

ModelFileInfo parse_model_header(const fs::path& path) {
    std::uint64_t file_size = 0;
    {
        std::error_code ec;
        file_size = fs::file_size(path, ec);
        if (ec) fail(ErrorCode::IoFailure, "cannot stat " + path.string());
    }
    if (file_size < 8) fail(ErrorCode::TruncatedFile, path.string());
    Bytes prefix = read_file_range(path, 0, 8);
    std::uint64_t n = load_le64(prefix.data());
    if (file_size - 8 < n) fail(ErrorCode::TruncatedFile, path.string());

    ModelFileInfo info;
    info.path = path;
    info.header_len = n;
    info.header_bytes = read_file_range(path, 8, n);
    info.payload_len = file_size - 8 - n;
    auto [tensors, extra] = descriptors_from_header(as_view(info.header_bytes), info.payload_len);
    info.tensors = std::move(tensors);
    info.extra_metadata = std::move(extra);
    return info;
}

Bytes read_tensor_range(const ModelFileInfo& info, const TensorDescriptor& desc) {
    return read_file_range(info.path, 8 + info.header_len + desc.data_begin,
                           desc.byte_size());
}

bool is_safetensors_path(const fs::path& path) {
    return path.extension() == ".safetensors";
}

} // namespace tv

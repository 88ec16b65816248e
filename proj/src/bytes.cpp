// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/bytes.hpp"

#include <cstdio>
#include <fstream>
#include <system_error>

#include "tensorvault/errors.hpp"

namespace tv {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
    in.seekg(0, std::ios::end);
    auto size = in.tellg();
    if (size < 0) fail(ErrorCode::IoFailure, "cannot stat " + path.string());
    in.seekg(0, std::ios::beg);
    Bytes data(static_cast<std::size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(data.data()), size);
    if (!in) fail(ErrorCode::IoFailure, "short read on " + path.string());
    return data;
}

void write_file(const fs::path& path, ByteView data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()),
                                 static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) fail(ErrorCode::IoFailure, "short write on " + path.string());
}

void write_file_atomic(const fs::path& path, ByteView data) {
    fs::path tmp = path;
    tmp += ".tmp";
    write_file(tmp, data);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorCode::IoFailure, "rename " + tmp.string() + " -> " + path.string());
    }
}

Bytes read_file_range(const fs::path& path, std::uint64_t offset, std::uint64_t length) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
    in.seekg(static_cast<std::streamoff>(offset));
    Bytes data(length);
    if (length > 0) in.read(reinterpret_cast<char*>(data.data()),
                            static_cast<std::streamsize>(length));
    if (!in || in.gcount() != static_cast<std::streamsize>(length))
        fail(ErrorCode::IoFailure, "short range read on " + path.string());
    return data;
}

} // namespace tv

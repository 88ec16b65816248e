// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace tv {

enum class DTypeTag {
    BF16,
    FP16,
    FP32,
    FP64,
    I8,
    U8,
    I32,
    I64,
    Other,
};

// Element type of a stored tensor. Unknown dtypes keep their header label and
// carry an element width inferred from the byte range (0 when unknown, in
// which case the tensor is handled as an opaque byte range).
struct DType {
    DTypeTag tag = DTypeTag::Other;
    std::uint32_t width = 0; // bytes per element
    std::string label;       // safetensors header spelling, e.g. "BF16", "F32"

    bool is_float() const {
        return tag == DTypeTag::BF16 || tag == DTypeTag::FP16 ||
               tag == DTypeTag::FP32 || tag == DTypeTag::FP64;
    }

    // Types supported by the bit-distance metric and the Monte Carlo
    // estimator (8-bit-exponent and half formats).
    bool is_bitdist_float() const {
        return tag == DTypeTag::BF16 || tag == DTypeTag::FP16 || tag == DTypeTag::FP32;
    }

    unsigned bit_width() const { return width * 8; }

    bool operator==(const DType& other) const {
        return tag == other.tag && width == other.width &&
               (tag != DTypeTag::Other || label == other.label);
    }
};

// Maps a safetensors dtype string to a DType. Unknown labels produce
// tag Other with width 0; callers may fill in an inferred width.
DType dtype_from_label(const std::string& label);

DType make_dtype(DTypeTag tag);

} // namespace tv

// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/dtype.hpp"

namespace tv {

DType make_dtype(DTypeTag tag) {
    switch (tag) {
        case DTypeTag::BF16: return {tag, 2, "BF16"};
        case DTypeTag::FP16: return {tag, 2, "F16"};
        case DTypeTag::FP32: return {tag, 4, "F32"};
        case DTypeTag::FP64: return {tag, 8, "F64"};
        case DTypeTag::I8: return {tag, 1, "I8"};
        case DTypeTag::U8: return {tag, 1, "U8"};
        case DTypeTag::I32: return {tag, 4, "I32"};
        case DTypeTag::I64: return {tag, 8, "I64"};
        case DTypeTag::Other: return {tag, 0, ""};
    }
    return {DTypeTag::Other, 0, ""};
}

DType dtype_from_label(const std::string& label) {
    if (label == "BF16") return make_dtype(DTypeTag::BF16);
    if (label == "F16" || label == "FP16") return make_dtype(DTypeTag::FP16);
    if (label == "F32" || label == "FP32") return make_dtype(DTypeTag::FP32);
    if (label == "F64" || label == "FP64") return make_dtype(DTypeTag::FP64);
    if (label == "I8") return make_dtype(DTypeTag::I8);
    if (label == "U8") return make_dtype(DTypeTag::U8);
    if (label == "I32") return make_dtype(DTypeTag::I32);
    if (label == "I64") return make_dtype(DTypeTag::I64);
    DType d = make_dtype(DTypeTag::Other);
    d.label = label;
    return d;
}

} // namespace tv

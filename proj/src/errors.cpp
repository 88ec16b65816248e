// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/errors.hpp"

namespace tv {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::OverlappingTensors: return "OverlappingTensors";
        case ErrorCode::UnknownTensor: return "UnknownTensor";
        case ErrorCode::UnknownModel: return "UnknownModel";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::HashCollision: return "HashCollision";
        case ErrorCode::MissingBlob: return "MissingBlob";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::UnsupportedDType: return "UnsupportedDType";
        case ErrorCode::NoComparableTensors: return "NoComparableTensors";
        case ErrorCode::BaseMismatch: return "BaseMismatch";
        case ErrorCode::CorruptFrame: return "CorruptFrame";
        case ErrorCode::IncompatibleSurrogate: return "IncompatibleSurrogate";
        case ErrorCode::ReconstructionMismatch: return "ReconstructionMismatch";
        case ErrorCode::StoreCorruption: return "StoreCorruption";
        case ErrorCode::InvalidSigma: return "InvalidSigma";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

} // namespace tv

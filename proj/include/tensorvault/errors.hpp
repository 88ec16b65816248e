// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tv {

enum class ErrorCode {
    TruncatedFile,
    MalformedHeader,
    OverlappingTensors,
    UnknownTensor,
    UnknownModel,
    IoFailure,
    HashCollision,
    MissingBlob,
    LengthMismatch,
    UnsupportedDType,
    NoComparableTensors,
    BaseMismatch,
    CorruptFrame,
    IncompatibleSurrogate,
    ReconstructionMismatch,
    StoreCorruption,
    InvalidSigma,
    InvalidArgument,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

} // namespace tv

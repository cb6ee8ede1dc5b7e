#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tats {

enum class ErrorCode {
    InvalidArgument,
    ShapeMismatch,
    SegmentTooShort,
    BadRatios,
    TooShort,
    DegenerateEmbeddings,
    ZeroSpectrum,
    TooLarge,
    BadMagic,
    TruncatedPayload,
    NonFinite,
    EmptyText,
    BadKernel,
    EmptyTrainSet,
    AllMasked,
    EmptySelection,
    ParseError,
    MissingColumn,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported as a tats::Error.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace tats

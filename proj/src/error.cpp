#include "tats/error.hpp"

namespace tats {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::SegmentTooShort: return "SegmentTooShort";
        case ErrorCode::BadRatios: return "BadRatios";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::DegenerateEmbeddings: return "DegenerateEmbeddings";
        case ErrorCode::ZeroSpectrum: return "ZeroSpectrum";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::BadKernel: return "BadKernel";
        case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
        case ErrorCode::AllMasked: return "AllMasked";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace tats

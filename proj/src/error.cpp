#include "streammem/error.hpp"

namespace streammem {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingTimestamp: return "MissingTimestamp";
        case ErrorCode::DanglingEvidence: return "DanglingEvidence";
        case ErrorCode::InvalidGap: return "InvalidGap";
        case ErrorCode::CapacityExceeded: return "CapacityExceeded";
        case ErrorCode::EmptySignal: return "EmptySignal";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::UnknownRecord: return "UnknownRecord";
        case ErrorCode::UnknownTransition: return "UnknownTransition";
        case ErrorCode::UnparseableExtraction: return "UnparseableExtraction";
        case ErrorCode::UnsupportedBackend: return "UnsupportedBackend";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::MissingFiles: return "MissingFiles";
        case ErrorCode::CausalityViolation: return "CausalityViolation";
        case ErrorCode::Gateway: return "GatewayError";
    }
    return "Error";
}

std::string_view to_string(GatewayErrorKind kind) {
    switch (kind) {
        case GatewayErrorKind::Timeout: return "Timeout";
        case GatewayErrorKind::Malformed: return "Malformed";
        case GatewayErrorKind::EmptyInput: return "EmptyInput";
        case GatewayErrorKind::EmptyCompletion: return "EmptyCompletion";
        case GatewayErrorKind::Transport: return "Transport";
        case GatewayErrorKind::RateLimited: return "RateLimited";
    }
    return "Unknown";
}

}  // namespace streammem

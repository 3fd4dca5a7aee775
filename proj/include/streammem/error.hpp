#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace streammem {

enum class ErrorCode {
    MissingTimestamp,
    DanglingEvidence,
    InvalidGap,
    CapacityExceeded,
    EmptySignal,
    DimensionMismatch,
    UnknownRecord,
    UnknownTransition,
    UnparseableExtraction,
    UnsupportedBackend,
    DegenerateInput,
    SchemaError,
    ValidationError,
    ConfigError,
    IoError,
    MissingFiles,
    CausalityViolation,
    Gateway,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

enum class GatewayErrorKind { Timeout, Malformed, EmptyInput, EmptyCompletion, Transport, RateLimited };

std::string_view to_string(GatewayErrorKind kind);

class GatewayError : public Error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& message, int retries = 0)
        : Error(ErrorCode::Gateway, std::string(to_string(kind)) + ": " + message),
          kind_(kind),
          retries_(retries) {}

    GatewayErrorKind kind() const noexcept { return kind_; }
    int retries() const noexcept { return retries_; }

private:
    GatewayErrorKind kind_;
    int retries_;
};

}  // namespace streammem

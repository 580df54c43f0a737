#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crashsev {

enum class ErrorCode {
    MissingColumn,
    MalformedRow,
    UnknownSeverityCode,
    InsufficientClassPopulation,
    UnresolvedPlaceholder,
    TemplateSyntax,
    ExemplarCardinality,
    ExemplarOverlap,
    UnknownLabel,
    UnknownStrategy,
    AuthError,
    RateLimited,
    Transport,
    Truncated,
    CacheCorrupt,
    CorruptTranscript,
    InvalidConfig,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::UnknownSeverityCode: return "UnknownSeverityCode";
    case ErrorCode::InsufficientClassPopulation: return "InsufficientClassPopulation";
    case ErrorCode::UnresolvedPlaceholder: return "UnresolvedPlaceholder";
    case ErrorCode::TemplateSyntax: return "TemplateSyntax";
    case ErrorCode::ExemplarCardinality: return "ExemplarCardinality";
    case ErrorCode::ExemplarOverlap: return "ExemplarOverlap";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownStrategy: return "UnknownStrategy";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::CorruptTranscript: return "CorruptTranscript";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace crashsev

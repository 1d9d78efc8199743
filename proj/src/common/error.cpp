#include "common/error.hpp"

namespace intentrag {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::Io: return "Io";
        case Errc::UnknownLabel: return "UnknownLabel";
        case Errc::EmptyText: return "EmptyText";
        case Errc::MalformedRecord: return "MalformedRecord";
        case Errc::ClassShortage: return "ClassShortage";
        case Errc::CuratedFileMissingClass: return "CuratedFileMissingClass";
        case Errc::GeneratedShortage: return "GeneratedShortage";
        case Errc::ProviderUnavailable: return "ProviderUnavailable";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::ZeroVector: return "ZeroVector";
        case Errc::CorruptCache: return "CorruptCache";
        case Errc::ModelMismatch: return "ModelMismatch";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::EmptyIndex: return "EmptyIndex";
        case Errc::KOutOfRange: return "KOutOfRange";
        case Errc::EmptyClass: return "EmptyClass";
        case Errc::ZeroCentroid: return "ZeroCentroid";
        case Errc::EmptyLabelSet: return "EmptyLabelSet";
        case Errc::EmptyQuery: return "EmptyQuery";
        case Errc::ContextOverflow: return "ContextOverflow";
        case Errc::ProviderError: return "ProviderError";
        case Errc::RetriesExhausted: return "RetriesExhausted";
        case Errc::AuthMissing: return "AuthMissing";
        case Errc::BatchAborted: return "BatchAborted";
        case Errc::UnpricedModel: return "UnpricedModel";
        case Errc::UnknownRun: return "UnknownRun";
        case Errc::EmptyEvaluation: return "EmptyEvaluation";
        case Errc::InvalidPartition: return "InvalidPartition";
        case Errc::MissingManifest: return "MissingManifest";
    }
    return "Unknown";
}

ErrorCategory category_of(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidArgument:
        case Errc::KOutOfRange:
            return ErrorCategory::Usage;
        case Errc::ProviderUnavailable:
        case Errc::ContextOverflow:
        case Errc::ProviderError:
        case Errc::RetriesExhausted:
        case Errc::AuthMissing:
        case Errc::BatchAborted:
            return ErrorCategory::Provider;
        default:
            return ErrorCategory::Data;
    }
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

ProviderFailure::ProviderFailure(int status, std::string body, bool retryable)
    : Error(Errc::ProviderError, "status " + std::to_string(status) + ": " + body),
      status_(status),
      body_(std::move(body)),
      retryable_(retryable) {}

bool is_retryable_status(int http_status) noexcept {
    // 0 is used for transport-level failures (timeouts, refused connections).
    return http_status == 0 || http_status == 408 || http_status == 429 || http_status >= 500;
}

}  // namespace intentrag

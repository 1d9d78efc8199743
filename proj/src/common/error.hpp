#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace intentrag {

enum class Errc {
    InvalidArgument,
    Io,
    // corpus
    UnknownLabel,
    EmptyText,
    MalformedRecord,
    ClassShortage,
    CuratedFileMissingClass,
    GeneratedShortage,
    // embedder
    ProviderUnavailable,
    DimensionMismatch,
    EmptyInput,
    ZeroVector,
    CorruptCache,
    ModelMismatch,
    // retriever
    LengthMismatch,
    EmptyIndex,
    KOutOfRange,
    EmptyClass,
    ZeroCentroid,
    // promptkit
    EmptyLabelSet,
    EmptyQuery,
    // gateway
    ContextOverflow,
    ProviderError,
    RetriesExhausted,
    AuthMissing,
    BatchAborted,
    // ledger
    UnpricedModel,
    UnknownRun,
    // evaluator
    EmptyEvaluation,
    // augmentor
    InvalidPartition,
    // pipeline
    MissingManifest,
};

// Coarse classes used for process exit codes and C API status codes.
enum class ErrorCategory { Usage = 1, Data = 2, Provider = 3 };

std::string_view errc_name(Errc code) noexcept;
ErrorCategory category_of(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }

private:
    Errc code_;
};

// A failed provider call. `retryable` covers rate limits, 5xx and timeouts.
class ProviderFailure : public Error {
public:
    ProviderFailure(int status, std::string body, bool retryable);

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }
    bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    std::string body_;
    bool retryable_;
};

bool is_retryable_status(int http_status) noexcept;

}  // namespace intentrag

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "common/error.hpp"
#include "embedder.hpp"
#include "ledger.hpp"
#include "promptkit.hpp"
#include "retriever.hpp"

namespace intentrag {

enum class Dialect { OpenAIChat, AnthropicMessages, CohereGenerate, MockReplay, MockCentroidOracle };

std::string_view dialect_name(Dialect d) noexcept;
Dialect dialect_from_name(std::string_view name);
bool is_network_dialect(Dialect d) noexcept;
std::string default_base_url(Dialect d);

struct RetryPolicy {
    int max_attempts = 5;
    std::int64_t base_delay_ms = 1000;
    double backoff_factor = 2.0;

    // Wait after the n-th failed attempt (n >= 1): base * factor^(n-1).
    std::chrono::milliseconds delay(int n) const;
};

struct ProviderConfig {
    Dialect dialect = Dialect::MockCentroidOracle;
    std::string model_id = "mock-oracle";
    std::string base_url;
    std::string api_key_env;
    std::filesystem::path replay_path;
    std::size_t max_parallel = 4;
    RetryPolicy retry;
    std::size_t context_limit_tokens = 16384;
    // Held back from the context window for the answer.
    std::size_t reserved_completion_tokens = 32;
    std::size_t max_tokens = 32;
    double temperature = 0.0;
    bool stop_at_newline = true;
    bool fail_fast = false;
    std::int64_t timeout_ms = 60000;

    void validate() const;
};

struct ItemError {
    Errc code = Errc::ProviderError;
    std::string message;
};

struct CompletionResult {
    std::string raw_text;
    UsageRecord usage;
    std::int64_t latency_ms = 0;
    int attempt_count = 1;
    std::optional<ItemError> error;

    bool ok() const noexcept { return !error.has_value(); }
};

struct BackendReply {
    std::string text;
    std::optional<std::int64_t> prompt_tokens;
    std::optional<std::int64_t> completion_tokens;
};

// One provider call. Throws ProviderFailure; retryable failures are retried by the gateway.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual BackendReply send(const PromptBundle& bundle) = 0;
};

// Replay file: JSONL of {"key": sha256 hex of the final user message, "response": "...",
// "prompt_tokens": n, "completion_tokens": n, "fail_times": n (optional)}. A key with
// fail_times > 0 answers with a transient 503 that many times before succeeding.
struct ReplayEntry {
    std::string response;
    std::optional<std::int64_t> prompt_tokens;
    std::optional<std::int64_t> completion_tokens;
    int fail_times = 0;
};

std::string replay_key(const PromptBundle& bundle);
std::string replay_key(std::string_view final_user_message);

class MockReplayBackend final : public ChatBackend {
public:
    explicit MockReplayBackend(const std::filesystem::path& path);
    explicit MockReplayBackend(std::unordered_map<std::string, ReplayEntry> entries);

    BackendReply send(const PromptBundle& bundle) override;

    static void write_file(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, ReplayEntry>>& entries);

private:
    std::mutex mutex_;
    std::unordered_map<std::string, ReplayEntry> entries_;
};

// Answers "<index> <name>" for the centroid nearest to the embedded final user message.
class MockCentroidOracleBackend final : public ChatBackend {
public:
    using QueryEmbedder = std::function<EmbeddingVector(const std::string&)>;
    MockCentroidOracleBackend(CentroidModel model, QueryEmbedder embed);

    BackendReply send(const PromptBundle& bundle) override;

private:
    CentroidModel model_;
    QueryEmbedder embed_;
};

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    Gateway(ProviderConfig config, std::unique_ptr<ChatBackend> backend, Sleeper sleeper = {});

    const ProviderConfig& config() const noexcept { return config_; }

    // Throws ContextOverflow before any provider call, ProviderError for non-retryable
    // failures and RetriesExhausted once the policy gives up.
    CompletionResult complete(const PromptBundle& bundle);

    // Results are positionally aligned with the input. Item failures are embedded in
    // the results; with fail_fast the first failure aborts with BatchAborted. Usage of
    // every item is appended to `ledger` under run_id, in input order.
    std::vector<CompletionResult> run_batch(std::span<const PromptBundle> bundles,
                                            const std::string& run_id, UsageLedger* ledger = nullptr);

private:
    CompletionResult attempt(const PromptBundle& bundle);

    ProviderConfig config_;
    std::unique_ptr<ChatBackend> backend_;
    Sleeper sleeper_;
};

// Network dialects build an HTTP backend (API key from the named environment variable);
// MockReplay reads config.replay_path. MockCentroidOracle needs the extra arguments.
std::unique_ptr<ChatBackend> make_chat_backend(
    const ProviderConfig& config, std::optional<CentroidModel> oracle_model = std::nullopt,
    MockCentroidOracleBackend::QueryEmbedder oracle_embed = {});

}  // namespace intentrag

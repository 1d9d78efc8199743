#include "gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "common/digest.hpp"
#include "common/text.hpp"
#include "http_transport.hpp"

namespace intentrag {

using nlohmann::json;

std::string_view dialect_name(Dialect d) noexcept {
    switch (d) {
        case Dialect::OpenAIChat: return "openai";
        case Dialect::AnthropicMessages: return "anthropic";
        case Dialect::CohereGenerate: return "cohere";
        case Dialect::MockReplay: return "mock-replay";
        case Dialect::MockCentroidOracle: return "mock-oracle";
    }
    return "mock-oracle";
}

Dialect dialect_from_name(std::string_view name) {
    auto n = canonicalize(name);
    if (n == "openai" || n == "openai_chat") return Dialect::OpenAIChat;
    if (n == "anthropic" || n == "anthropic_messages") return Dialect::AnthropicMessages;
    if (n == "cohere" || n == "cohere_generate") return Dialect::CohereGenerate;
    if (n == "mock_replay" || n == "replay") return Dialect::MockReplay;
    if (n == "mock_oracle" || n == "mock_centroid_oracle" || n == "oracle") {
        return Dialect::MockCentroidOracle;
    }
    throw Error(Errc::InvalidArgument, "unknown provider '" + std::string(name) + "'");
}

bool is_network_dialect(Dialect d) noexcept {
    return d == Dialect::OpenAIChat || d == Dialect::AnthropicMessages || d == Dialect::CohereGenerate;
}

std::string default_base_url(Dialect d) {
    switch (d) {
        case Dialect::OpenAIChat: return "https://api.openai.com";
        case Dialect::AnthropicMessages: return "https://api.anthropic.com";
        case Dialect::CohereGenerate: return "https://api.cohere.ai";
        default: return "";
    }
}

std::chrono::milliseconds RetryPolicy::delay(int n) const {
    double ms = static_cast<double>(base_delay_ms) * std::pow(backoff_factor, std::max(n, 1) - 1);
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

void ProviderConfig::validate() const {
    if (max_parallel < 1) throw Error(Errc::InvalidArgument, "max_parallel must be >= 1");
    if (context_limit_tokens == 0) throw Error(Errc::InvalidArgument, "context limit must be > 0");
    if (max_tokens == 0) throw Error(Errc::InvalidArgument, "max_tokens must be > 0");
    if (retry.max_attempts < 1) throw Error(Errc::InvalidArgument, "max_attempts must be >= 1");
    if (retry.base_delay_ms < 0 || retry.backoff_factor < 1.0) {
        throw Error(Errc::InvalidArgument, "retry delay must be >= 0 and backoff factor >= 1");
    }
}

std::string replay_key(std::string_view final_user_message) { return sha256_hex(final_user_message); }

std::string replay_key(const PromptBundle& bundle) {
    return replay_key(bundle.final_user_message().content);
}

MockReplayBackend::MockReplayBackend(std::unordered_map<std::string, ReplayEntry> entries)
    : entries_(std::move(entries)) {}

MockReplayBackend::MockReplayBackend(const std::filesystem::path& path) {
    std::size_t line_no = 0;
    for (const auto& line : split_lines(read_file(path))) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("key") || !j["key"].is_string() ||
            !j.contains("response") || !j["response"].is_string()) {
            throw Error(Errc::MalformedRecord,
                        path.string() + " line " + std::to_string(line_no) + ": needs key and response");
        }
        ReplayEntry e;
        e.response = j["response"].get<std::string>();
        if (j.contains("prompt_tokens")) e.prompt_tokens = j["prompt_tokens"].get<std::int64_t>();
        if (j.contains("completion_tokens")) e.completion_tokens = j["completion_tokens"].get<std::int64_t>();
        e.fail_times = j.value("fail_times", 0);
        // First entry for a key wins.
        entries_.emplace(j["key"].get<std::string>(), std::move(e));
    }
}

BackendReply MockReplayBackend::send(const PromptBundle& bundle) {
    auto key = replay_key(bundle);
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ProviderFailure(404, "no replay entry for key " + key, false);
    if (it->second.fail_times > 0) {
        --it->second.fail_times;
        throw ProviderFailure(503, "scripted transient failure", true);
    }
    return {it->second.response, it->second.prompt_tokens, it->second.completion_tokens};
}

void MockReplayBackend::write_file(const std::filesystem::path& path,
                                   const std::vector<std::pair<std::string, ReplayEntry>>& entries) {
    std::string out;
    for (const auto& [key, e] : entries) {
        json j = {{"key", key}, {"response", e.response}};
        if (e.prompt_tokens) j["prompt_tokens"] = *e.prompt_tokens;
        if (e.completion_tokens) j["completion_tokens"] = *e.completion_tokens;
        if (e.fail_times > 0) j["fail_times"] = e.fail_times;
        out += j.dump() + "\n";
    }
    intentrag::write_file(path, out);
}

MockCentroidOracleBackend::MockCentroidOracleBackend(CentroidModel model, QueryEmbedder embed)
    : model_(std::move(model)), embed_(std::move(embed)) {}

BackendReply MockCentroidOracleBackend::send(const PromptBundle& bundle) {
    auto query = embed_(bundle.final_user_message().content);
    auto [label, similarity] = model_.predict(query);
    (void)similarity;
    return {format_answer(model_.labels(), label), std::nullopt, std::nullopt};
}

Gateway::Gateway(ProviderConfig config, std::unique_ptr<ChatBackend> backend, Sleeper sleeper)
    : config_(std::move(config)), backend_(std::move(backend)), sleeper_(std::move(sleeper)) {
    config_.validate();
    if (!backend_) throw Error(Errc::InvalidArgument, "gateway needs a backend");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

CompletionResult Gateway::attempt(const PromptBundle& bundle) {
    CompletionResult result;
    result.usage.model_id = config_.model_id;
    result.usage.attempts = 0;
    result.usage.delivered = false;

    const auto limit = config_.context_limit_tokens;
    if (bundle.estimated_tokens + config_.reserved_completion_tokens > limit) {
        result.error = ItemError{Errc::ContextOverflow,
                                 "estimate " + std::to_string(bundle.estimated_tokens) + " + " +
                                     std::to_string(config_.reserved_completion_tokens) +
                                     " reserved exceeds limit " + std::to_string(limit)};
        return result;
    }

    const auto start = std::chrono::steady_clock::now();
    std::string last_error;
    for (int n = 1; n <= config_.retry.max_attempts; ++n) {
        result.attempt_count = n;
        result.usage.attempts = n;
        try {
            auto reply = backend_->send(bundle);
            result.raw_text = std::move(reply.text);
            if (reply.prompt_tokens && reply.completion_tokens) {
                result.usage.prompt_tokens = *reply.prompt_tokens;
                result.usage.completion_tokens = *reply.completion_tokens;
            } else {
                result.usage.prompt_tokens = static_cast<std::int64_t>(estimate_tokens(bundle));
                result.usage.completion_tokens = static_cast<std::int64_t>(estimate_tokens(result.raw_text));
                result.usage.estimated = true;
            }
            result.usage.delivered = true;
            result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - start)
                                    .count();
            return result;
        } catch (const ProviderFailure& f) {
            last_error = f.what();
            if (!f.retryable()) {
                result.error = ItemError{Errc::ProviderError, last_error};
                break;
            }
            if (n < config_.retry.max_attempts) sleeper_(config_.retry.delay(n));
        } catch (const Error& e) {
            result.error = ItemError{e.code(), e.what()};
            break;
        }
    }
    if (!result.error) {
        result.error = ItemError{Errc::RetriesExhausted,
                                 "after " + std::to_string(result.attempt_count) +
                                     " attempts, last error: " + last_error};
    }
    result.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
            .count();
    return result;
}

CompletionResult Gateway::complete(const PromptBundle& bundle) {
    auto result = attempt(bundle);
    if (result.error) throw Error(result.error->code, result.error->message);
    return result;
}

std::vector<CompletionResult> Gateway::run_batch(std::span<const PromptBundle> bundles,
                                                 const std::string& run_id, UsageLedger* ledger) {
    std::vector<CompletionResult> results(bundles.size());
    std::vector<char> done(bundles.size(), 0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::atomic<std::size_t> first_failure{bundles.size()};

    auto worker = [&] {
        while (!abort.load()) {
            const std::size_t i = next++;
            if (i >= bundles.size()) return;
            results[i] = attempt(bundles[i]);
            results[i].usage.run_id = run_id;
            results[i].usage.call_index = i;
            done[i] = 1;
            if (results[i].error && config_.fail_fast) {
                std::size_t expected = bundles.size();
                while (i < expected && !first_failure.compare_exchange_weak(expected, i)) {
                }
                abort = true;
            }
        }
    };

    const std::size_t n_threads = std::min(config_.max_parallel, bundles.size());
    if (n_threads == 1) {
        worker();
    } else if (n_threads > 1) {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    if (ledger) {
        std::vector<UsageRecord> usage;
        for (std::size_t i = 0; i < results.size(); ++i) {
            if (done[i]) usage.push_back(results[i].usage);
        }
        ledger->append(usage);
    }
    if (abort) {
        auto i = first_failure.load();
        throw Error(Errc::BatchAborted,
                    "item " + std::to_string(i) + " failed: " + results[i].error->message);
    }
    return results;
}

std::unique_ptr<ChatBackend> make_chat_backend(const ProviderConfig& config,
                                               std::optional<CentroidModel> oracle_model,
                                               MockCentroidOracleBackend::QueryEmbedder oracle_embed) {
    switch (config.dialect) {
        case Dialect::MockReplay:
            return std::make_unique<MockReplayBackend>(config.replay_path);
        case Dialect::MockCentroidOracle:
            if (!oracle_model || !oracle_embed) {
                throw Error(Errc::InvalidArgument, "centroid oracle needs a fitted model and an embedder");
            }
            return std::make_unique<MockCentroidOracleBackend>(std::move(*oracle_model),
                                                               std::move(oracle_embed));
        default:
            return make_http_chat_backend(config);
    }
}

}  // namespace intentrag

#include <httplib.h>

#include "http_transport.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "dialects.hpp"
#include "embedder.hpp"
#include "gateway.hpp"

namespace intentrag {

using nlohmann::json;

namespace {

httplib::Headers to_headers(const std::vector<std::pair<std::string, std::string>>& pairs) {
    httplib::Headers h;
    for (const auto& [k, v] : pairs) h.emplace(k, v);
    return h;
}

void set_timeouts(httplib::Client& client, std::int64_t timeout_ms) {
    const auto sec = static_cast<time_t>(timeout_ms / 1000);
    const auto usec = static_cast<time_t>((timeout_ms % 1000) * 1000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
}

class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(ProviderConfig config)
        : config_(std::move(config)), api_key_(api_key_from_env(config_.api_key_env, true)) {
        if (config_.base_url.empty()) config_.base_url = default_base_url(config_.dialect);
    }

    BackendReply send(const PromptBundle& bundle) override {
        auto spec = build_chat_request(config_, bundle, api_key_);
        auto [origin, prefix] = split_base_url(config_.base_url);
        (void)prefix;
        // httplib clients are not safe to share across threads; one per call.
        httplib::Client client(origin);
        set_timeouts(client, config_.timeout_ms);
        auto res = client.Post(spec.path, to_headers(spec.headers), spec.body, "application/json");
        if (!res) {
            throw ProviderFailure(0, "transport error: " + httplib::to_string(res.error()), true);
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProviderFailure(res->status, res->body, is_retryable_status(res->status));
        }
        return parse_chat_response(config_.dialect, res->body);
    }

private:
    ProviderConfig config_;
    std::string api_key_;
};

class RemoteEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit RemoteEmbeddingBackend(EmbeddingProviderConfig config)
        : config_(std::move(config)), api_key_(api_key_from_env(config_.api_key_env, false)) {}

    std::vector<std::vector<float>> embed(std::span<const std::string> texts) override {
        auto [origin, prefix] = split_base_url(config_.base_url);
        httplib::Client client(origin);
        set_timeouts(client, 60000);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        json body = {{"model", config_.model_id}, {"input", json::array()}};
        for (const auto& t : texts) body["input"].push_back(t);

        auto res = client.Post(prefix + "/v1/embeddings", headers, body.dump(), "application/json");
        if (!res) {
            throw Error(Errc::ProviderUnavailable, "transport error: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw Error(Errc::ProviderUnavailable,
                        "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        }
        auto j = json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("data") || !j["data"].is_array()) {
            throw Error(Errc::ProviderUnavailable, "embedding response lacks data[]");
        }
        std::vector<std::vector<float>> out(texts.size());
        std::size_t pos = 0;
        for (const auto& item : j["data"]) {
            std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : pos;
            if (index >= out.size() || !item.contains("embedding")) {
                throw Error(Errc::ProviderUnavailable, "malformed embedding item");
            }
            out[index] = item["embedding"].get<std::vector<float>>();
            ++pos;
        }
        return out;
    }

private:
    EmbeddingProviderConfig config_;
    std::string api_key_;
};

}  // namespace

std::string api_key_from_env(const std::string& env_name, bool required) {
    const char* v = env_name.empty() ? nullptr : std::getenv(env_name.c_str());
    if (v == nullptr || *v == '\0') {
        if (required) {
            throw Error(Errc::AuthMissing,
                        "environment variable " + (env_name.empty() ? "<unset>" : env_name) + " is empty");
        }
        return {};
    }
    return v;
}

std::unique_ptr<ChatBackend> make_http_chat_backend(const ProviderConfig& config) {
    return std::make_unique<HttpChatBackend>(config);
}

std::unique_ptr<EmbeddingBackend> make_remote_embedding_backend(const EmbeddingProviderConfig& config) {
    return std::make_unique<RemoteEmbeddingBackend>(config);
}

}  // namespace intentrag

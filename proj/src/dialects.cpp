#include "dialects.hpp"

#include <nlohmann/json.hpp>

namespace intentrag {

using nlohmann::json;

namespace {

ProviderFailure bad_body(std::string_view what, std::string_view body) {
    return ProviderFailure(200, std::string(what) + ": " + std::string(body.substr(0, 200)), false);
}

std::optional<std::int64_t> optional_int(const json& j, std::initializer_list<const char*> path) {
    const json* cur = &j;
    for (const char* key : path) {
        if (!cur->is_object() || !cur->contains(key)) return std::nullopt;
        cur = &(*cur)[key];
    }
    if (!cur->is_number_integer()) return std::nullopt;
    return cur->get<std::int64_t>();
}

}  // namespace

std::string flatten_for_generate(const PromptBundle& bundle) {
    std::string out;
    for (const auto& m : bundle.messages) {
        switch (m.role) {
            case Role::System: out += m.content + "\n\n"; break;
            case Role::User: out += "User: " + m.content + "\n"; break;
            case Role::Assistant: out += "Chatbot: " + m.content + "\n"; break;
        }
    }
    out += "Chatbot:";
    return out;
}

HttpRequestSpec build_chat_request(const ProviderConfig& config, const PromptBundle& bundle,
                                   const std::string& api_key) {
    auto [origin, prefix] = split_base_url(config.base_url.empty() ? default_base_url(config.dialect)
                                                                   : config.base_url);
    (void)origin;
    HttpRequestSpec req;
    json body;
    switch (config.dialect) {
        case Dialect::OpenAIChat: {
            req.path = prefix + "/v1/chat/completions";
            req.headers = {{"Authorization", "Bearer " + api_key}};
            body["model"] = config.model_id;
            body["messages"] = json::array();
            for (const auto& m : bundle.messages) {
                body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
            }
            body["temperature"] = config.temperature;
            body["max_tokens"] = config.max_tokens;
            if (config.stop_at_newline) body["stop"] = json::array({"\n"});
            break;
        }
        case Dialect::AnthropicMessages: {
            req.path = prefix + "/v1/messages";
            req.headers = {{"x-api-key", api_key}, {"anthropic-version", "2023-06-01"}};
            body["model"] = config.model_id;
            body["max_tokens"] = config.max_tokens;
            body["temperature"] = config.temperature;
            std::string system;
            body["messages"] = json::array();
            for (const auto& m : bundle.messages) {
                if (m.role == Role::System) {
                    if (!system.empty()) system += "\n\n";
                    system += m.content;
                } else {
                    body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
                }
            }
            if (!system.empty()) body["system"] = system;
            if (config.stop_at_newline) body["stop_sequences"] = json::array({"\n"});
            break;
        }
        case Dialect::CohereGenerate: {
            req.path = prefix + "/v1/generate";
            req.headers = {{"Authorization", "Bearer " + api_key}};
            body["model"] = config.model_id;
            body["prompt"] = flatten_for_generate(bundle);
            body["max_tokens"] = config.max_tokens;
            body["temperature"] = config.temperature;
            if (config.stop_at_newline) body["end_sequences"] = json::array({"\n"});
            break;
        }
        default:
            throw Error(Errc::InvalidArgument, "dialect has no wire format");
    }
    req.body = body.dump();
    return req;
}

BackendReply parse_chat_response(Dialect dialect, std::string_view body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw bad_body("response is not a JSON object", body);

    BackendReply reply;
    switch (dialect) {
        case Dialect::OpenAIChat: {
            if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
                throw bad_body("missing choices", body);
            }
            const auto& msg = j["choices"][0].value("message", json::object());
            if (!msg.contains("content") || !msg["content"].is_string()) {
                throw bad_body("missing message content", body);
            }
            reply.text = msg["content"].get<std::string>();
            reply.prompt_tokens = optional_int(j, {"usage", "prompt_tokens"});
            reply.completion_tokens = optional_int(j, {"usage", "completion_tokens"});
            break;
        }
        case Dialect::AnthropicMessages: {
            if (!j.contains("content") || !j["content"].is_array()) throw bad_body("missing content", body);
            for (const auto& block : j["content"]) {
                if (block.value("type", "") == "text" && block.contains("text")) {
                    reply.text += block["text"].get<std::string>();
                }
            }
            reply.prompt_tokens = optional_int(j, {"usage", "input_tokens"});
            reply.completion_tokens = optional_int(j, {"usage", "output_tokens"});
            break;
        }
        case Dialect::CohereGenerate: {
            if (!j.contains("generations") || !j["generations"].is_array() || j["generations"].empty() ||
                !j["generations"][0].contains("text")) {
                throw bad_body("missing generations", body);
            }
            reply.text = j["generations"][0]["text"].get<std::string>();
            reply.prompt_tokens = optional_int(j, {"meta", "billed_units", "input_tokens"});
            reply.completion_tokens = optional_int(j, {"meta", "billed_units", "output_tokens"});
            break;
        }
        default:
            throw Error(Errc::InvalidArgument, "dialect has no wire format");
    }
    return reply;
}

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme = base_url.find("://");
    auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    auto slash = base_url.find('/', host_start);
    if (slash == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, slash), prefix};
}

}  // namespace intentrag

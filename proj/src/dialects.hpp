#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gateway.hpp"

namespace intentrag {

// Wire shapes of the three chat providers. Kept free of any transport so they can be
// checked byte-for-byte in tests.
//
//   openai     POST /v1/chat/completions   Authorization: Bearer <key>
//              messages carry system/user/assistant roles inline;
//              text at choices[0].message.content, usage.prompt_tokens/completion_tokens
//   anthropic  POST /v1/messages           x-api-key, anthropic-version: 2023-06-01
//              system text in the top-level "system" field, user/assistant turns in messages;
//              text from content[*].text, usage.input_tokens/output_tokens
//   cohere     POST /v1/generate           Authorization: Bearer <key>
//              one flattened "prompt" string;
//              text at generations[0].text, meta.billed_units.input_tokens/output_tokens
struct HttpRequestSpec {
    std::string path;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
};

HttpRequestSpec build_chat_request(const ProviderConfig& config, const PromptBundle& bundle,
                                   const std::string& api_key);

// Throws ProviderFailure (non-retryable) when the body lacks the expected fields.
BackendReply parse_chat_response(Dialect dialect, std::string_view body);

// Flattened transcript used by the single-prompt dialect.
std::string flatten_for_generate(const PromptBundle& bundle);

// Splits "https://host:port/prefix" into ("https://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

}  // namespace intentrag

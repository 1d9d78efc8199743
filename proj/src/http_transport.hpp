#pragma once

#include <memory>
#include <string>

namespace intentrag {

class ChatBackend;
class EmbeddingBackend;
struct ProviderConfig;
struct EmbeddingProviderConfig;

// Reads the API key from config.api_key_env (AuthMissing if unset or empty).
std::unique_ptr<ChatBackend> make_http_chat_backend(const ProviderConfig& config);

// OpenAI-compatible POST /v1/embeddings. A missing key is allowed for local servers.
std::unique_ptr<EmbeddingBackend> make_remote_embedding_backend(const EmbeddingProviderConfig& config);

std::string api_key_from_env(const std::string& env_name, bool required);

}  // namespace intentrag

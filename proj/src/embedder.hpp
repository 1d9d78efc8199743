#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "common/digest.hpp"

namespace intentrag {

// Unit-L2-norm float32 vector. Only constructible through normalization.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    // Throws ZeroVector for an all-zero input and InvalidArgument for non-finite components.
    static EmbeddingVector normalized(std::span<const float> raw);
    // Trusts already-normalized data (cache hits), but still verifies the norm.
    static EmbeddingVector from_unit(std::vector<float> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    const float* data() const noexcept { return values_.data(); }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    explicit EmbeddingVector(std::vector<float> v) : values_(std::move(v)) {}
    std::vector<float> values_;
};

// Dot product accumulated in double, left to right.
double dot(std::span<const float> a, std::span<const float> b) noexcept;

// Offline stand-in encoder: lowercase, split on non-alphanumerics, FNV-1a hash each token
// into [0, dim), count, L2-normalize. Requires dim >= 16; tokenless text is ZeroVector.
EmbeddingVector test_embed(std::string_view text, std::size_t dim);

// Content-addressed store keyed by SHA-256 of the text. Many readers, one writer.
class EmbeddingCache {
public:
    EmbeddingCache(std::string model_id, std::size_t dim);
    EmbeddingCache(EmbeddingCache&& other) noexcept;

    const std::string& model_id() const noexcept { return model_id_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const;

    std::optional<EmbeddingVector> find(std::string_view text) const;
    std::optional<EmbeddingVector> find(const Digest& key) const;
    void insert(std::string_view text, const EmbeddingVector& v);
    void insert(const Digest& key, const EmbeddingVector& v);

    // Binary layout: "FIEC", u16 version, u32 dim, u32 model-id length + UTF-8 bytes, then
    // records of 32-byte SHA-256 key followed by dim little-endian float32. Records are
    // written in key order.
    void save(const std::filesystem::path& path) const;
    static EmbeddingCache load(const std::filesystem::path& path,
                               const std::optional<std::string>& expected_model = std::nullopt);

private:
    std::string model_id_;
    std::size_t dim_;
    mutable std::shared_mutex mutex_;
    std::map<Digest, EmbeddingVector> entries_;
};

struct EmbeddingProviderConfig {
    enum class Kind { Test, Remote };
    Kind kind = Kind::Test;
    std::string model_id = "test-embed";
    std::size_t dim = 256;
    // Remote only. Default targets an OpenAI-compatible /v1/embeddings server hosting
    // an all-mpnet-base-v2 compatible model.
    std::string base_url = "http://localhost:8080";
    std::string api_key_env = "EMBEDDING_API_KEY";
    std::size_t batch_size = 64;
    std::size_t max_parallel = 4;
};

// Raw (not necessarily normalized) vectors, one per input text, in order.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
};

class TestEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit TestEmbeddingBackend(std::size_t dim) : dim_(dim) {}
    std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
};

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const EmbeddingProviderConfig& config);

// Cache-aware batch embedding; misses go to the backend in sub-batches of batch_size,
// at most max_parallel at a time, and are written through to the cache.
class Embedder {
public:
    Embedder(std::unique_ptr<EmbeddingBackend> backend, EmbeddingCache& cache,
             std::size_t batch_size = 64, std::size_t max_parallel = 1);

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);
    EmbeddingVector embed_one(const std::string& text);

    // Number of backend invocations so far.
    std::size_t provider_calls() const noexcept { return provider_calls_.load(); }
    const EmbeddingCache& cache() const noexcept { return cache_; }

private:
    std::unique_ptr<EmbeddingBackend> backend_;
    EmbeddingCache& cache_;
    std::size_t batch_size_;
    std::size_t max_parallel_;
    std::atomic<std::size_t> provider_calls_{0};
};

}  // namespace intentrag

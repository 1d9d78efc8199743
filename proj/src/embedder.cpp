#include "embedder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "common/error.hpp"
#include "common/text.hpp"
#include "http_transport.hpp"

namespace intentrag {

namespace {

constexpr char kCacheMagic[4] = {'F', 'I', 'E', 'C'};
constexpr std::uint16_t kCacheVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

Error corrupt(std::size_t offset, const std::string& what) {
    return Error(Errc::CorruptCache, what + " at offset " + std::to_string(offset));
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool is_alnum_ascii(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::span<const float> raw) {
    if (raw.empty()) throw Error(Errc::EmptyInput, "vector has no components");
    double sq = 0.0;
    for (float x : raw) {
        if (!std::isfinite(x)) throw Error(Errc::InvalidArgument, "non-finite vector component");
        sq += static_cast<double>(x) * static_cast<double>(x);
    }
    if (sq == 0.0) throw Error(Errc::ZeroVector, "cannot normalize a zero vector");
    double norm = std::sqrt(sq);
    std::vector<float> v(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        v[i] = static_cast<float>(static_cast<double>(raw[i]) / norm);
    }
    return EmbeddingVector(std::move(v));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values) {
    double sq = 0.0;
    for (float x : values) {
        if (!std::isfinite(x)) throw Error(Errc::InvalidArgument, "non-finite vector component");
        sq += static_cast<double>(x) * static_cast<double>(x);
    }
    if (values.empty() || std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
        throw Error(Errc::InvalidArgument, "vector is not unit-norm");
    }
    return EmbeddingVector(std::move(values));
}

double dot(std::span<const float> a, std::span<const float> b) noexcept {
    double s = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

EmbeddingVector test_embed(std::string_view text, std::size_t dim) {
    if (dim < 16) throw Error(Errc::InvalidArgument, "test embedder needs dim >= 16");
    std::vector<float> counts(dim, 0.0f);
    std::string lowered = to_lower_ascii(text);
    std::size_t i = 0;
    while (i < lowered.size()) {
        while (i < lowered.size() && !is_alnum_ascii(lowered[i])) ++i;
        std::size_t start = i;
        while (i < lowered.size() && is_alnum_ascii(lowered[i])) ++i;
        if (i > start) {
            auto bucket = fnv1a64(std::string_view(lowered).substr(start, i - start)) % dim;
            counts[bucket] += 1.0f;
        }
    }
    try {
        return EmbeddingVector::normalized(counts);
    } catch (const Error& e) {
        if (e.code() == Errc::ZeroVector) {
            throw Error(Errc::ZeroVector, "text has no tokens: '" + std::string(text) + "'");
        }
        throw;
    }
}

EmbeddingCache::EmbeddingCache(std::string model_id, std::size_t dim)
    : model_id_(std::move(model_id)), dim_(dim) {
    if (dim_ == 0) throw Error(Errc::InvalidArgument, "cache dim must be positive");
}

EmbeddingCache::EmbeddingCache(EmbeddingCache&& other) noexcept
    : model_id_(std::move(other.model_id_)), dim_(other.dim_), entries_(std::move(other.entries_)) {}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::optional<EmbeddingVector> EmbeddingCache::find(std::string_view text) const {
    return find(sha256(text));
}

std::optional<EmbeddingVector> EmbeddingCache::find(const Digest& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::insert(std::string_view text, const EmbeddingVector& v) { insert(sha256(text), v); }

void EmbeddingCache::insert(const Digest& key, const EmbeddingVector& v) {
    if (v.dim() != dim_) {
        throw Error(Errc::DimensionMismatch,
                    "expected " + std::to_string(dim_) + ", got " + std::to_string(v.dim()));
    }
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(key, v);
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
    std::string out(kCacheMagic, sizeof kCacheMagic);
    put_u16(out, kCacheVersion);
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_u32(out, static_cast<std::uint32_t>(model_id_.size()));
    out += model_id_;
    std::shared_lock lock(mutex_);
    out.reserve(out.size() + entries_.size() * (32 + 4 * dim_));
    for (const auto& [key, vec] : entries_) {
        out.append(reinterpret_cast<const char*>(key.data()), key.size());
        for (float f : vec.values()) put_f32(out, f);
    }
    write_file(path, out);
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path,
                                    const std::optional<std::string>& expected_model) {
    const std::string bytes = read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();

    if (n < 14 || std::memcmp(p, kCacheMagic, 4) != 0) throw corrupt(0, "missing FIEC magic");
    std::uint16_t version = static_cast<std::uint16_t>(p[4] | (p[5] << 8));
    if (version != kCacheVersion) throw corrupt(4, "unsupported version " + std::to_string(version));
    std::uint32_t dim = get_u32(p + 6);
    if (dim == 0) throw corrupt(6, "zero dim");
    std::uint32_t id_len = get_u32(p + 10);
    std::size_t offset = 14;
    if (n - offset < id_len) throw corrupt(offset, "truncated model id");
    std::string model_id(bytes.data() + offset, id_len);
    offset += id_len;

    if (expected_model && *expected_model != model_id) {
        throw Error(Errc::ModelMismatch, "expected " + *expected_model + ", got " + model_id);
    }

    EmbeddingCache cache(model_id, dim);
    const std::size_t record = 32 + 4 * static_cast<std::size_t>(dim);
    while (offset < n) {
        if (n - offset < record) throw corrupt(offset, "truncated record");
        Digest key;
        std::memcpy(key.data(), p + offset, key.size());
        std::vector<float> values(dim);
        for (std::uint32_t i = 0; i < dim; ++i) values[i] = get_f32(p + offset + 32 + 4 * i);
        try {
            cache.entries_.insert_or_assign(key, EmbeddingVector::from_unit(std::move(values)));
        } catch (const Error& e) {
            throw corrupt(offset, e.what());
        }
        offset += record;
    }
    return cache;
}

std::vector<std::vector<float>> TestEmbeddingBackend::embed(std::span<const std::string> texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto v = test_embed(t, dim_);
        out.emplace_back(v.values().begin(), v.values().end());
    }
    return out;
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const EmbeddingProviderConfig& config) {
    if (config.kind == EmbeddingProviderConfig::Kind::Test) {
        return std::make_unique<TestEmbeddingBackend>(config.dim);
    }
    return make_remote_embedding_backend(config);
}

Embedder::Embedder(std::unique_ptr<EmbeddingBackend> backend, EmbeddingCache& cache,
                   std::size_t batch_size, std::size_t max_parallel)
    : backend_(std::move(backend)),
      cache_(cache),
      batch_size_(std::max<std::size_t>(1, batch_size)),
      max_parallel_(std::max<std::size_t>(1, max_parallel)) {}

std::vector<EmbeddingVector> Embedder::embed_batch(const std::vector<std::string>& texts) {
    if (texts.empty()) throw Error(Errc::EmptyInput, "no texts to embed");

    std::vector<Digest> keys;
    keys.reserve(texts.size());
    std::vector<std::string> misses;
    std::unordered_map<std::string_view, bool> queued;
    for (const auto& t : texts) {
        keys.push_back(sha256(t));
        if (!cache_.find(keys.back()) && queued.emplace(t, true).second) misses.push_back(t);
    }

    if (!misses.empty()) {
        const std::size_t n_chunks = (misses.size() + batch_size_ - 1) / batch_size_;
        std::atomic<std::size_t> next{0};
        std::mutex err_mutex;
        std::exception_ptr first_error;

        auto worker = [&] {
            for (std::size_t chunk = next++; chunk < n_chunks; chunk = next++) {
                try {
                    auto begin = chunk * batch_size_;
                    auto count = std::min(batch_size_, misses.size() - begin);
                    std::span<const std::string> slice(misses.data() + begin, count);
                    ++provider_calls_;
                    auto raw = backend_->embed(slice);
                    if (raw.size() != count) {
                        throw Error(Errc::ProviderUnavailable, "provider returned " +
                                                                  std::to_string(raw.size()) +
                                                                  " vectors for " + std::to_string(count));
                    }
                    for (std::size_t i = 0; i < count; ++i) {
                        if (raw[i].size() != cache_.dim()) {
                            throw Error(Errc::DimensionMismatch,
                                        "expected " + std::to_string(cache_.dim()) + ", got " +
                                            std::to_string(raw[i].size()));
                        }
                        cache_.insert(slice[i], EmbeddingVector::normalized(raw[i]));
                    }
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        };

        const std::size_t n_threads = std::min(max_parallel_, n_chunks);
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        }
        if (first_error) std::rethrow_exception(first_error);
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& key : keys) {
        auto hit = cache_.find(key);
        if (!hit) throw Error(Errc::ProviderUnavailable, "embedding missing after provider call");
        out.push_back(std::move(*hit));
    }
    return out;
}

EmbeddingVector Embedder::embed_one(const std::string& text) {
    return std::move(embed_batch({text}).front());
}

}  // namespace intentrag

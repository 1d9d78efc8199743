#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "common/text.hpp"
#include "embedder.hpp"
#include "http_transport.hpp"
#include "support.hpp"

using namespace intentrag;
using testsupport::TempDir;

namespace {

double norm(const EmbeddingVector& v) { return std::sqrt(dot(v.values(), v.values())); }

double cosine(std::string_view a, std::string_view b) {
    return dot(test_embed(a, 256).values(), test_embed(b, 256).values());
}

// Independent reimplementation of the documented hashing recipe.
std::vector<double> reference_embed(const std::string& text, std::size_t dim) {
    std::vector<double> counts(dim, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        std::uint64_t h = 14695981039346656037ULL;
        for (unsigned char c : token) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        counts[h % dim] += 1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) token += static_cast<char>(std::tolower(c));
        else flush();
    }
    flush();
    double sq = 0;
    for (double x : counts) sq += x * x;
    for (double& x : counts) x /= std::sqrt(sq);
    return counts;
}

class CountingBackend final : public EmbeddingBackend {
public:
    explicit CountingBackend(std::size_t dim, std::size_t returned_dim = 0)
        : dim_(dim), returned_dim_(returned_dim ? returned_dim : dim) {}
    std::vector<std::vector<float>> embed(std::span<const std::string> texts) override {
        std::lock_guard lock(mutex);
        ++calls;
        texts_seen += texts.size();
        std::vector<std::vector<float>> out;
        for (const auto& t : texts) {
            auto v = test_embed(t, dim_);
            std::vector<float> raw(v.values().begin(), v.values().end());
            for (auto& x : raw) x *= 3.0f;  // unnormalized on purpose
            raw.resize(returned_dim_, 0.0f);
            out.push_back(raw);
        }
        return out;
    }
    std::mutex mutex;
    std::size_t calls = 0;
    std::size_t texts_seen = 0;

private:
    std::size_t dim_;
    std::size_t returned_dim_;
};

}  // namespace

TEST(TestEmbed, MatchesReferenceRecipe) {
    for (const char* text : {"top up failed", "My card was DECLINED!", "exchange-rate 2023", "a"}) {
        auto v = test_embed(text, 256);
        auto ref = reference_embed(text, 256);
        ASSERT_EQ(v.dim(), 256u);
        for (std::size_t i = 0; i < 256; ++i) EXPECT_NEAR(v.values()[i], ref[i], 1e-7) << text << " @" << i;
    }
}

TEST(TestEmbed, DeterministicAndBitwiseStable) {
    auto a = test_embed("top up failed", 256);
    auto b = test_embed("top up failed", 256);
    EXPECT_EQ(std::memcmp(a.data(), b.data(), 256 * sizeof(float)), 0);
}

TEST(TestEmbed, ZeroVectorAndDimChecks) {
    EXPECT_ERRC(test_embed("", 256), Errc::ZeroVector);
    EXPECT_ERRC(test_embed(" ?!. ", 256), Errc::ZeroVector);
    EXPECT_ERRC(test_embed("abc", 8), Errc::InvalidArgument);
}

TEST(TestEmbed, CountScalingCancels) { EXPECT_EQ(test_embed("abc abc", 256), test_embed("abc", 256)); }

TEST(TestEmbed, SimilarityOrdering) {
    EXPECT_GT(cosine("card declined", "my card was declined"), cosine("card declined", "exchange rate"));
}

TEST(TestEmbed, UnitNorm) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        std::string text;
        for (int w = 0; w < 1 + static_cast<int>(rng() % 12); ++w) text += "w" + std::to_string(rng() % 50) + " ";
        EXPECT_NEAR(norm(test_embed(text, 64)), 1.0, 1e-5);
    }
}

TEST(EmbeddingVectorTest, NormalizationGuards) {
    std::vector<float> zero(4, 0.0f);
    EXPECT_ERRC(EmbeddingVector::normalized(zero), Errc::ZeroVector);
    std::vector<float> bad{1.0f, NAN};
    EXPECT_ERRC(EmbeddingVector::normalized(bad), Errc::InvalidArgument);
    EXPECT_ERRC(EmbeddingVector::normalized(std::vector<float>{}), Errc::EmptyInput);
    EXPECT_ERRC(EmbeddingVector::from_unit({1.0f, 1.0f}), Errc::InvalidArgument);
    std::vector<float> v{3.0f, 4.0f};
    auto n = EmbeddingVector::normalized(v);
    EXPECT_FLOAT_EQ(n.values()[0], 0.6f);
    EXPECT_FLOAT_EQ(n.values()[1], 0.8f);
}

TEST(Cache, RoundTripOfThousandVectorsIsBitExact) {
    TempDir dir;
    std::mt19937_64 rng(17);
    EmbeddingCache cache("model-x", 48);
    std::vector<std::pair<std::string, EmbeddingVector>> stored;
    for (int i = 0; i < 1000; ++i) {
        auto v = testsupport::random_unit(rng, 48);
        auto text = "text " + std::to_string(i);
        cache.insert(text, v);
        stored.emplace_back(text, v);
    }
    cache.save(dir / "c.fiec");
    auto back = EmbeddingCache::load(dir / "c.fiec", std::string("model-x"));
    EXPECT_EQ(back.model_id(), "model-x");
    EXPECT_EQ(back.dim(), 48u);
    ASSERT_EQ(back.size(), 1000u);
    for (const auto& [text, v] : stored) {
        auto hit = back.find(text);
        ASSERT_TRUE(hit.has_value());
        EXPECT_EQ(std::memcmp(hit->data(), v.data(), 48 * sizeof(float)), 0);
    }
    // Saving the loaded cache reproduces the same bytes.
    back.save(dir / "c2.fiec");
    EXPECT_EQ(read_file(dir / "c.fiec"), read_file(dir / "c2.fiec"));
}

TEST(Cache, HeaderLayout) {
    TempDir dir;
    EmbeddingCache("m", 768).save(dir / "e.fiec");
    auto bytes = read_file(dir / "e.fiec");
    // magic, u16 version, u32 dim, u32 length, model id
    ASSERT_EQ(bytes.size(), 4u + 2 + 4 + 4 + 1);
    EXPECT_EQ(bytes.substr(0, 4), "FIEC");
    EXPECT_EQ(static_cast<unsigned char>(bytes[6]) | (static_cast<unsigned char>(bytes[7]) << 8), 768);
    EXPECT_EQ(bytes.back(), 'm');
    auto empty = EmbeddingCache::load(dir / "e.fiec");
    EXPECT_EQ(empty.size(), 0u);
    EXPECT_EQ(empty.dim(), 768u);
}

TEST(Cache, ShortRowIsCorrupt) {
    TempDir dir;
    EmbeddingCache("m", 768).save(dir / "h.fiec");
    auto bytes = read_file(dir / "h.fiec");
    bytes += std::string(32, '\x01');
    std::mt19937_64 rng(1);
    auto v = testsupport::random_unit(rng, 384);
    bytes.append(reinterpret_cast<const char*>(v.data()), 384 * sizeof(float));
    write_file(dir / "bad.fiec", bytes);
    EXPECT_ERRC(EmbeddingCache::load(dir / "bad.fiec"), Errc::CorruptCache);
    write_file(dir / "magic.fiec", "NOPE0000000000000");
    EXPECT_ERRC(EmbeddingCache::load(dir / "magic.fiec"), Errc::CorruptCache);
}

TEST(Cache, ModelMismatchAndDimensionChecks) {
    TempDir dir;
    EmbeddingCache cache("model-a", 16);
    cache.save(dir / "a.fiec");
    EXPECT_ERRC(EmbeddingCache::load(dir / "a.fiec", std::string("model-b")), Errc::ModelMismatch);
    EXPECT_ERRC(cache.insert("x", test_embed("x", 32)), Errc::DimensionMismatch);
}

TEST(EmbedderTest, WarmCacheMakesNoProviderCalls) {
    EmbeddingCache cache("counting", 64);
    auto backend = std::make_unique<CountingBackend>(64);
    auto* counter = backend.get();
    Embedder embedder(std::move(backend), cache, 4, 3);
    std::vector<std::string> texts;
    for (int i = 0; i < 37; ++i) texts.push_back("utterance number " + std::to_string(i));
    texts.push_back(texts[5]);

    auto first = embedder.embed_batch(texts);
    ASSERT_EQ(first.size(), texts.size());
    EXPECT_EQ(counter->texts_seen, 37u);  // duplicate sent once
    EXPECT_EQ(counter->calls, 10u);       // ceil(37 / 4)
    EXPECT_EQ(first[5], first.back());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        EXPECT_NEAR(norm(first[i]), 1.0, 1e-5);
        EXPECT_EQ(first[i], test_embed(texts[i], 64)) << "order must follow the input";
    }

    auto calls_before = embedder.provider_calls();
    auto second = embedder.embed_batch(texts);
    EXPECT_EQ(embedder.provider_calls(), calls_before);
    EXPECT_EQ(second, first);
}

TEST(EmbedderTest, ErrorsSurface) {
    EmbeddingCache cache("counting", 64);
    Embedder embedder(std::make_unique<CountingBackend>(64, 32), cache);
    EXPECT_ERRC(embedder.embed_batch({}), Errc::EmptyInput);
    EXPECT_ERRC(embedder.embed_batch({"hello"}), Errc::DimensionMismatch);
}

TEST(RemoteEmbedding, TalksToLocalServerAndReordersByIndex) {
    httplib::Server server;
    std::string seen_auth;
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json data = nlohmann::json::array();
        const auto& input = body["input"];
        // Respond in reverse order; the client must place vectors by index.
        for (std::size_t i = input.size(); i-- > 0;) {
            auto v = test_embed(input[i].get<std::string>(), 16);
            data.push_back({{"index", i}, {"embedding", std::vector<float>(v.values().begin(), v.values().end())}});
        }
        res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("INTENTRAG_TEST_EMBED_KEY", "secret-token", 1);
    EmbeddingProviderConfig config;
    config.kind = EmbeddingProviderConfig::Kind::Remote;
    config.dim = 16;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.api_key_env = "INTENTRAG_TEST_EMBED_KEY";
    auto backend = make_remote_embedding_backend(config);
    std::vector<std::string> texts{"card declined", "exchange rate", "top up"};
    auto out = backend->embed(texts);
    server.stop();
    t.join();

    ASSERT_EQ(out.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        auto expected = test_embed(texts[i], 16);
        EXPECT_EQ(out[i], std::vector<float>(expected.values().begin(), expected.values().end()));
    }
    EXPECT_EQ(seen_auth, "Bearer secret-token");
}

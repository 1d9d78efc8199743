#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "common/digest.hpp"
#include "common/error.hpp"
#include "common/text.hpp"
#include "retriever.hpp"

namespace intentrag::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class OfflineEmbeddingBackend final : public EmbeddingBackend {
public:
    std::vector<std::vector<float>> embed(std::span<const std::string>) override {
        throw Error(Errc::ProviderUnavailable, "remote embedder needs --live for texts missing from the cache");
    }
};

std::string cache_model_id(const EmbeddingProviderConfig& cfg) {
    if (cfg.kind == EmbeddingProviderConfig::Kind::Test) return cfg.model_id + "-" + std::to_string(cfg.dim);
    return cfg.model_id;
}

// Cache plus embedder for one command; the cache is written back on persist().
struct EmbedContext {
    std::optional<fs::path> path;
    std::unique_ptr<EmbeddingCache> cache;
    std::unique_ptr<Embedder> embedder;

    EmbedContext(const EmbeddingProviderConfig& cfg, std::optional<fs::path> cache_path, bool live)
        : path(std::move(cache_path)) {
        const auto model = cache_model_id(cfg);
        if (path && fs::exists(*path)) {
            cache = std::make_unique<EmbeddingCache>(EmbeddingCache::load(*path, model));
            if (cache->dim() != cfg.dim) {
                throw Error(Errc::DimensionMismatch, "cache " + path->string() + " holds dim " +
                                                         std::to_string(cache->dim()) + ", config asks for " +
                                                         std::to_string(cfg.dim));
            }
        } else {
            cache = std::make_unique<EmbeddingCache>(model, cfg.dim);
        }
        std::unique_ptr<EmbeddingBackend> backend;
        if (cfg.kind == EmbeddingProviderConfig::Kind::Remote && !live) {
            backend = std::make_unique<OfflineEmbeddingBackend>();
        } else {
            backend = make_embedding_backend(cfg);
        }
        embedder = std::make_unique<Embedder>(std::move(backend), *cache, cfg.batch_size, cfg.max_parallel);
    }

    void persist() const {
        if (path) cache->save(*path);
    }
};

ordered_json file_ref(const fs::path& p) {
    return {{"path", p.string()}, {"sha256", sha256_file_hex(p)}};
}

ordered_json provider_to_json(const ProviderConfig& c) {
    ordered_json j;
    j["dialect"] = dialect_name(c.dialect);
    j["model_id"] = c.model_id;
    j["base_url"] = c.base_url;
    j["api_key_env"] = c.api_key_env;
    j["replay_path"] = c.replay_path.string();
    j["max_parallel"] = c.max_parallel;
    j["retry"] = {{"max_attempts", c.retry.max_attempts},
                  {"base_delay_ms", c.retry.base_delay_ms},
                  {"backoff_factor", c.retry.backoff_factor}};
    j["context_limit_tokens"] = c.context_limit_tokens;
    j["reserved_completion_tokens"] = c.reserved_completion_tokens;
    j["max_tokens"] = c.max_tokens;
    j["temperature"] = c.temperature;
    j["stop_at_newline"] = c.stop_at_newline;
    j["fail_fast"] = c.fail_fast;
    j["timeout_ms"] = c.timeout_ms;
    return j;
}

ProviderConfig provider_from_json(const json& j) {
    ProviderConfig c;
    c.dialect = dialect_from_name(j.at("dialect").get<std::string>());
    c.model_id = j.value("model_id", c.model_id);
    c.base_url = j.value("base_url", c.base_url);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.replay_path = j.value("replay_path", std::string());
    c.max_parallel = j.value("max_parallel", c.max_parallel);
    if (j.contains("retry")) {
        const auto& r = j["retry"];
        c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
        c.retry.base_delay_ms = r.value("base_delay_ms", c.retry.base_delay_ms);
        c.retry.backoff_factor = r.value("backoff_factor", c.retry.backoff_factor);
    }
    c.context_limit_tokens = j.value("context_limit_tokens", c.context_limit_tokens);
    c.reserved_completion_tokens = j.value("reserved_completion_tokens", c.reserved_completion_tokens);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.temperature = j.value("temperature", c.temperature);
    c.stop_at_newline = j.value("stop_at_newline", c.stop_at_newline);
    c.fail_fast = j.value("fail_fast", c.fail_fast);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    return c;
}

ordered_json embedder_to_json(const EmbeddingProviderConfig& c) {
    ordered_json j;
    j["kind"] = c.kind == EmbeddingProviderConfig::Kind::Test ? "test" : "remote";
    j["model_id"] = c.model_id;
    j["dim"] = c.dim;
    if (c.kind == EmbeddingProviderConfig::Kind::Remote) {
        j["base_url"] = c.base_url;
        j["api_key_env"] = c.api_key_env;
    }
    j["batch_size"] = c.batch_size;
    j["max_parallel"] = c.max_parallel;
    return j;
}

EmbeddingProviderConfig embedder_from_json(const json& j) {
    EmbeddingProviderConfig c;
    c.kind = j.value("kind", std::string("test")) == "remote" ? EmbeddingProviderConfig::Kind::Remote
                                                              : EmbeddingProviderConfig::Kind::Test;
    c.model_id = j.value("model_id", c.model_id);
    c.dim = j.value("dim", c.dim);
    c.base_url = j.value("base_url", c.base_url);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_parallel = j.value("max_parallel", c.max_parallel);
    return c;
}

void require_offline_or_live(const ProviderConfig& provider, bool live) {
    if (is_network_dialect(provider.dialect) && !live) {
        throw Error(Errc::InvalidArgument, "provider '" + std::string(dialect_name(provider.dialect)) +
                                               "' calls a paid network API; pass --live to allow it");
    }
}

void claim_run_dir(const fs::path& run_dir) {
    if (run_dir.empty()) throw Error(Errc::InvalidArgument, "a run directory is required");
    if (fs::exists(run_dir / "manifest.json") || fs::exists(run_dir / "ledger.jsonl")) {
        throw Error(Errc::InvalidArgument, "run directory " + run_dir.string() + " already holds a run");
    }
    fs::create_directories(run_dir);
}

std::string setting_for_set(const ExemplarSet& set) {
    if (set.exemplars.empty()) return "0-shot";
    std::vector<std::size_t> orig(set.labels.size(), 0), gen(set.labels.size(), 0);
    for (const auto& e : set.exemplars) {
        (e.origin == Origin::Generated ? gen : orig)[e.label]++;
    }
    const bool uniform_orig = std::adjacent_find(orig.begin(), orig.end(), std::not_equal_to<>()) == orig.end();
    const bool uniform_gen = std::adjacent_find(gen.begin(), gen.end(), std::not_equal_to<>()) == gen.end();
    if (uniform_orig && uniform_gen) {
        if (gen.front() == 0) return std::to_string(orig.front()) + "-shot";
        return std::to_string(orig.front()) + ":" + std::to_string(gen.front()) + " mixed";
    }
    return std::to_string(set.exemplars.size()) + " exemplars";
}

ordered_json hits_json(const std::vector<RetrievalHit>& hits) {
    ordered_json a = ordered_json::array();
    for (const auto& h : hits) a.push_back({{"id", h.exemplar_id}, {"similarity", h.similarity}, {"rank", h.rank}});
    return a;
}

ordered_json record_json(const ManifestRecord& r, const std::vector<std::string>& labels) {
    ordered_json j;
    j["index"] = r.index;
    j["query"] = r.query;
    j["gold"] = labels.at(r.gold);
    j["replay_key"] = r.replay_key;
    j["exemplar_ids"] = r.exemplar_ids;
    if (!r.hits.empty()) j["hits"] = hits_json(r.hits);
    j["estimated_tokens"] = r.estimated_tokens;
    j["raw_text"] = r.raw_text;
    j["prediction"] = {{"label", r.prediction.label ? json(labels.at(*r.prediction.label)) : json(nullptr)},
                       {"rule", parse_rule_name(r.prediction.rule)},
                       {"name_disagreement", r.prediction.name_disagreement}};
    j["usage"] = {{"call_index", r.usage.call_index},
                  {"model_id", r.usage.model_id},
                  {"prompt_tokens", r.usage.prompt_tokens},
                  {"completion_tokens", r.usage.completion_tokens},
                  {"estimated", r.usage.estimated},
                  {"attempts", r.usage.attempts},
                  {"delivered", r.usage.delivered}};
    j["latency_ms"] = r.latency_ms;
    if (r.error) {
        j["error"] = {{"code", errc_name(r.error->code)}, {"message", r.error->message}};
    } else {
        j["error"] = nullptr;
    }
    return j;
}

Errc errc_from_name(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(Errc::MissingManifest); ++i) {
        auto c = static_cast<Errc>(i);
        if (errc_name(c) == name) return c;
    }
    return Errc::ProviderError;
}

std::string utc_stamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

LabelSet labels_for_run(const RunOptions& opts) {
    if (opts.labels) return LabelSet::load(*opts.labels);
    auto from_pool = infer_label_set(opts.exemplars, DataFormat::Jsonl);
    if (!from_pool.empty()) return from_pool;
    return infer_label_set(opts.test, format_from_path(opts.test));
}

struct RunContext {
    RunManifest manifest;
    LabelSet labels;
    ExemplarSet exemplars;
    Dataset test;
    PromptTemplate tmpl;
    TokenEstimator estimator;
    std::optional<EmbedContext> embed;
};

RunContext prepare(const RunOptions& opts, const std::string& mode, bool needs_embedder) {
    require_offline_or_live(opts.provider, opts.live);
    opts.provider.validate();
    if (opts.chars_per_token <= 0.0) throw Error(Errc::InvalidArgument, "chars_per_token must be > 0");

    RunContext ctx;
    ctx.labels = labels_for_run(opts);
    if (ctx.labels.empty()) throw Error(Errc::EmptyLabelSet, "no labels found");
    ctx.exemplars = load_exemplars(opts.exemplars, ctx.labels);
    ctx.test = load_dataset(opts.test, format_from_path(opts.test), ctx.labels, Split::Test);
    if (opts.limit > 0 && ctx.test.items.size() > opts.limit) ctx.test.items.resize(opts.limit);
    if (ctx.test.items.empty()) throw Error(Errc::EmptyInput, "no test items");
    ctx.tmpl = opts.template_file ? PromptTemplate::from_file(*opts.template_file) : PromptTemplate::builtin();
    ctx.estimator.chars_per_token = opts.chars_per_token;

    if (needs_embedder || opts.provider.dialect == Dialect::MockCentroidOracle) {
        ctx.embed.emplace(opts.embedder, opts.cache, opts.live);
    }

    claim_run_dir(opts.run_dir);

    auto& m = ctx.manifest;
    m.run_id = opts.run_id ? *opts.run_id : new_run_id();
    m.mode = mode;
    m.labels = ctx.labels.names();

    auto& c = m.config;
    c["provider"] = provider_to_json(opts.provider);
    c["placement"] = placement_name(opts.placement);
    c["seed"] = opts.seed ? json(*opts.seed) : json(nullptr);
    c["limit"] = opts.limit;
    c["chars_per_token"] = opts.chars_per_token;
    c["template"] = {{"version", ctx.tmpl.version}, {"sha256", ctx.tmpl.hash()}};
    c["embedder"] = embedder_to_json(opts.embedder);
    c["cache"] = opts.cache ? json(opts.cache->string()) : json(nullptr);

    auto& in = m.inputs;
    in["exemplars"] = file_ref(opts.exemplars);
    in["test"] = file_ref(opts.test);
    if (opts.labels) in["labels"] = file_ref(*opts.labels);
    if (opts.template_file) in["template"] = file_ref(*opts.template_file);
    if (opts.pricing) {
        in["pricing"] = file_ref(*opts.pricing);
        c["pricing_sha256"] = in["pricing"]["sha256"];
    } else {
        c["pricing_sha256"] = nullptr;
    }
    return ctx;
}

std::vector<EmbeddingVector> embed_texts(EmbedContext& ctx, const std::vector<LabeledUtterance>& items) {
    std::vector<std::string> texts;
    texts.reserve(items.size());
    for (const auto& u : items) texts.push_back(u.text);
    return ctx.embedder->embed_batch(texts);
}

std::unique_ptr<ChatBackend> backend_for(const RunOptions& opts, RunContext& ctx) {
    if (opts.provider.dialect != Dialect::MockCentroidOracle) return make_chat_backend(opts.provider);
    auto vectors = embed_texts(*ctx.embed, ctx.exemplars.exemplars);
    auto model = CentroidModel::fit(ctx.exemplars, vectors);
    auto* embedder = ctx.embed->embedder.get();
    return make_chat_backend(opts.provider, std::move(model),
                             [embedder](const std::string& text) { return embedder->embed_one(text); });
}

void check_context(const std::vector<PromptBundle>& bundles, const ProviderConfig& provider) {
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const auto need = bundles[i].estimated_tokens + provider.reserved_completion_tokens;
        if (need > provider.context_limit_tokens) {
            throw Error(Errc::ContextOverflow, "item " + std::to_string(i) + ": estimate " +
                                                   std::to_string(bundles[i].estimated_tokens) + " + " +
                                                   std::to_string(provider.reserved_completion_tokens) +
                                                   " reserved exceeds limit " +
                                                   std::to_string(provider.context_limit_tokens));
        }
    }
}

RunManifest execute(const RunOptions& opts, RunContext& ctx, std::vector<PromptBundle> bundles,
                    std::vector<std::vector<RetrievalHit>> hits) {
    check_context(bundles, opts.provider);
    auto backend = backend_for(opts, ctx);
    Gateway gateway(opts.provider, std::move(backend));
    UsageLedger ledger(opts.run_dir / "ledger.jsonl");
    auto results = gateway.run_batch(bundles, ctx.manifest.run_id, &ledger);

    auto& m = ctx.manifest;
    m.records.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        ManifestRecord r;
        r.index = i;
        r.query = ctx.test.items[i].text;
        r.gold = ctx.test.items[i].label;
        r.replay_key = replay_key(bundles[i]);
        r.exemplar_ids = bundles[i].exemplar_ids_used;
        if (!hits.empty()) r.hits = std::move(hits[i]);
        r.estimated_tokens = bundles[i].estimated_tokens;
        r.raw_text = results[i].raw_text;
        r.usage = results[i].usage;
        r.latency_ms = results[i].latency_ms;
        r.error = results[i].error;
        if (r.error) {
            r.prediction = Prediction{std::nullopt, "", ParseRule::Fallback, false};
        } else {
            r.prediction = parse_prediction(r.raw_text, ctx.labels);
        }
        m.records.push_back(std::move(r));
    }
    if (ctx.embed) ctx.embed->persist();
    m.save(opts.run_dir / "manifest.json");
    return m;
}

}  // namespace

std::string new_run_id() {
    std::random_device rd;
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "%06x", rd() & 0xffffffu);
    return utc_stamp() + "-" + suffix;
}

LabelSet resolve_labels(const std::optional<fs::path>& labels, const fs::path& fallback_dataset) {
    if (labels) return LabelSet::load(*labels);
    return infer_label_set(fallback_dataset, format_from_path(fallback_dataset));
}

IngestSummary cmd_ingest(const IngestOptions& opts) {
    std::optional<LabelSet> declared;
    if (opts.labels) declared = LabelSet::load(*opts.labels);
    auto ds = load_dataset(opts.input, format_from_path(opts.input), declared);
    save_dataset_jsonl(opts.out, ds.labels, ds.items);
    if (opts.labels_out) ds.labels.save(*opts.labels_out);
    return {ds.items.size(), ds.labels.size()};
}

EmbedSummary cmd_embed(const EmbedOptions& opts) {
    if (opts.inputs.empty()) throw Error(Errc::InvalidArgument, "no input files");
    EmbedContext ctx(opts.provider, opts.cache, opts.live);
    std::vector<std::string> texts;
    std::set<std::string> seen;
    for (const auto& p : opts.inputs) {
        for (auto& t : read_texts(p)) {
            if (seen.insert(t).second) texts.push_back(std::move(t));
        }
    }
    if (texts.empty()) throw Error(Errc::EmptyInput, "input files contain no texts");
    ctx.embedder->embed_batch(texts);
    ctx.persist();
    return {texts.size(), ctx.cache->size(), ctx.embedder->provider_calls()};
}

SampleSummary cmd_sample(const SampleOptions& opts) {
    auto labels = resolve_labels(opts.labels, opts.train);
    auto train = load_dataset(opts.train, format_from_path(opts.train), labels);
    ExemplarSet set;
    if (opts.strategy == "random") {
        set = sample_few_shot(train, {opts.shots, RandomSeeded{opts.seed}});
    } else if (opts.strategy == "curated") {
        if (!opts.curated) throw Error(Errc::InvalidArgument, "curated sampling needs --curated");
        set = sample_few_shot(train, {opts.shots, CuratedFile{*opts.curated}});
    } else if (opts.strategy == "mixed") {
        if (!opts.generated) throw Error(Errc::InvalidArgument, "mixed sampling needs --generated");
        SamplingPlan base{opts.original_per_class, RandomSeeded{opts.seed}};
        if (opts.curated) base.strategy = CuratedFile{*opts.curated};
        auto original = sample_few_shot(train, base);
        auto gen = load_dataset(*opts.generated, format_from_path(*opts.generated), labels);
        auto generated = group_by_class(labels, std::move(gen.items));
        set = mix_augmented(original, generated, Mixed{opts.original_per_class, opts.generated_per_class});
    } else {
        throw Error(Errc::InvalidArgument, "unknown sampling strategy '" + opts.strategy + "'");
    }
    save_exemplars(opts.out, set);
    auto counts = set.count_per_class();
    return {set.size(), labels.size(), counts.empty() ? 0 : counts.front()};
}

ordered_json RunManifest::to_json() const {
    ordered_json j;
    j["run_id"] = run_id;
    j["mode"] = mode;
    j["setting"] = setting;
    j["config"] = config;
    j["inputs"] = inputs;
    j["labels"] = labels;
    j["drift"] = drift;
    auto& recs = j["records"] = ordered_json::array();
    for (const auto& r : records) recs.push_back(record_json(r, labels));
    return j;
}

RunManifest RunManifest::from_json(const ordered_json& j) {
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        m.mode = j.at("mode").get<std::string>();
        m.setting = j.at("setting").get<std::string>();
        m.config = j.at("config");
        m.inputs = j.at("inputs");
        m.labels = j.at("labels").get<std::vector<std::string>>();
        if (j.contains("drift")) m.drift = j["drift"].get<std::vector<std::string>>();
        LabelSet labels(m.labels);
        auto index_of = [&](const std::string& name) {
            auto idx = labels.find(name);
            if (!idx) throw Error(Errc::UnknownLabel, "manifest label '" + name + "' not in its label list");
            return *idx;
        };
        for (const auto& rj : j.at("records")) {
            ManifestRecord r;
            r.index = rj.at("index").get<std::size_t>();
            r.query = rj.at("query").get<std::string>();
            r.gold = index_of(rj.at("gold").get<std::string>());
            r.replay_key = rj.at("replay_key").get<std::string>();
            r.exemplar_ids = rj.at("exemplar_ids").get<std::vector<std::size_t>>();
            if (rj.contains("hits")) {
                for (const auto& h : rj["hits"]) {
                    r.hits.push_back({h.at("id").get<std::size_t>(), h.at("similarity").get<double>(),
                                      h.at("rank").get<std::size_t>()});
                }
            }
            r.estimated_tokens = rj.value("estimated_tokens", std::size_t{0});
            r.raw_text = rj.at("raw_text").get<std::string>();
            const auto& p = rj.at("prediction");
            r.prediction.raw_text = r.raw_text;
            if (!p.at("label").is_null()) r.prediction.label = index_of(p["label"].get<std::string>());
            auto rule = parse_rule_from_name(p.at("rule").get<std::string>());
            if (!rule) throw Error(Errc::MalformedRecord, "unknown parse rule in manifest");
            r.prediction.rule = *rule;
            r.prediction.name_disagreement = p.value("name_disagreement", false);
            const auto& u = rj.at("usage");
            r.usage.run_id = m.run_id;
            r.usage.call_index = u.at("call_index").get<std::size_t>();
            r.usage.model_id = u.at("model_id").get<std::string>();
            r.usage.prompt_tokens = u.at("prompt_tokens").get<std::int64_t>();
            r.usage.completion_tokens = u.at("completion_tokens").get<std::int64_t>();
            r.usage.estimated = u.at("estimated").get<bool>();
            r.usage.attempts = u.at("attempts").get<int>();
            r.usage.delivered = u.at("delivered").get<bool>();
            r.latency_ms = rj.value("latency_ms", std::int64_t{0});
            if (rj.contains("error") && !rj["error"].is_null()) {
                r.error = ItemError{errc_from_name(rj["error"].at("code").get<std::string>()),
                                    rj["error"].at("message").get<std::string>()};
            }
            m.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, std::string("manifest: ") + e.what());
    }
    return m;
}

void RunManifest::save(const fs::path& path) const {
    // One record per line keeps large manifests diffable.
    auto head = to_json();
    auto recs = std::move(head["records"]);
    head.erase("records");
    std::string out = head.dump(2);
    out.pop_back();  // closing brace
    while (!out.empty() && out.back() == '\n') out.pop_back();
    out += ",\n  \"records\": [";
    for (std::size_t i = 0; i < recs.size(); ++i) {
        out += i == 0 ? "\n    " : ",\n    ";
        out += recs[i].dump();
    }
    out += recs.empty() ? "]\n}\n" : "\n  ]\n}\n";
    write_file(path, out);
}

RunManifest RunManifest::load(const fs::path& run_dir_or_file) {
    const auto path = manifest_path(run_dir_or_file);
    if (!fs::exists(path)) throw Error(Errc::MissingManifest, "no manifest at " + path.string());
    auto j = ordered_json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(Errc::MalformedRecord, path.string() + " is not valid JSON");
    return from_json(j);
}

double RunManifest::mean_estimated_tokens() const {
    if (records.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : records) sum += static_cast<double>(r.estimated_tokens);
    return sum / static_cast<double>(records.size());
}

fs::path manifest_path(const fs::path& run_dir_or_file) {
    if (fs::is_directory(run_dir_or_file)) return run_dir_or_file / "manifest.json";
    return run_dir_or_file;
}

RunManifest cmd_run_fewshot(const RunOptions& opts) {
    auto ctx = prepare(opts, "fewshot", false);
    ctx.manifest.setting = setting_for_set(ctx.exemplars);
    auto counts = ctx.exemplars.count_per_class();
    ctx.manifest.config["shots"] = counts;

    const auto examples = examples_from_set(ctx.exemplars);
    std::vector<PromptBundle> bundles;
    bundles.reserve(ctx.test.items.size());
    for (const auto& q : ctx.test.items) {
        bundles.push_back(
            render_classification_prompt(ctx.labels, examples, q.text, opts.placement, ctx.tmpl, ctx.estimator));
    }
    return execute(opts, ctx, std::move(bundles), {});
}

RunManifest cmd_run_rag(const RunOptions& opts) {
    auto ctx = prepare(opts, "rag", true);
    const auto pool = ctx.exemplars.size();
    if (opts.k < 1 || opts.k > pool) {
        throw Error(Errc::KOutOfRange,
                    "k=" + std::to_string(opts.k) + " outside [1, " + std::to_string(pool) + "]");
    }
    ctx.manifest.setting = std::to_string(opts.k) + " similar (RAG)";
    ctx.manifest.config["k"] = opts.k;
    ctx.manifest.config["retrieval_fraction"] = format_retrieval_fraction(opts.k, pool);
    ctx.manifest.config["order"] =
        opts.order == ExemplarOrder::AscendingSimilarity ? "ascending" : "descending";

    auto pool_vectors = embed_texts(*ctx.embed, ctx.exemplars.exemplars);
    auto index = ExemplarIndex::build(ctx.exemplars, pool_vectors);
    auto query_vectors = embed_texts(*ctx.embed, ctx.test.items);

    std::vector<PromptBundle> bundles;
    std::vector<std::vector<RetrievalHit>> hits;
    bundles.reserve(ctx.test.items.size());
    hits.reserve(ctx.test.items.size());
    for (std::size_t i = 0; i < ctx.test.items.size(); ++i) {
        auto h = index.top_k(query_vectors[i], opts.k);
        auto examples = examples_from_hits(ctx.exemplars, h, opts.order);
        bundles.push_back(render_classification_prompt(ctx.labels, examples, ctx.test.items[i].text,
                                                       opts.placement, ctx.tmpl, ctx.estimator));
        hits.push_back(std::move(h));
    }
    return execute(opts, ctx, std::move(bundles), std::move(hits));
}

void export_replay(const RunManifest& manifest, const fs::path& path) {
    std::vector<std::pair<std::string, ReplayEntry>> entries;
    std::set<std::string> seen;
    for (const auto& r : manifest.records) {
        if (r.error || !seen.insert(r.replay_key).second) continue;
        ReplayEntry e;
        e.response = r.raw_text;
        if (!r.usage.estimated) {
            e.prompt_tokens = r.usage.prompt_tokens;
            e.completion_tokens = r.usage.completion_tokens;
        }
        entries.emplace_back(r.replay_key, std::move(e));
    }
    MockReplayBackend::write_file(path, entries);
}

RunManifest cmd_run_replay(const fs::path& manifest_file, const fs::path& run_dir,
                           std::optional<std::string> run_id) {
    const auto original = RunManifest::load(manifest_path(manifest_file));
    if (original.mode != "fewshot" && original.mode != "rag") {
        throw Error(Errc::InvalidArgument, "cannot replay a '" + original.mode + "' manifest");
    }

    std::vector<std::string> drift;
    for (const auto& [name, ref] : original.inputs.items()) {
        fs::path p = ref.at("path").get<std::string>();
        if (!fs::exists(p)) {
            drift.push_back(name + ": " + p.string() + " is missing");
        } else if (sha256_file_hex(p) != ref.at("sha256").get<std::string>()) {
            drift.push_back(name + ": " + p.string() + " changed since the original run");
        }
    }

    const auto& c = original.config;
    RunOptions opts;
    const auto& in = original.inputs;
    opts.exemplars = in.at("exemplars").at("path").get<std::string>();
    opts.test = in.at("test").at("path").get<std::string>();
    if (in.contains("labels")) opts.labels = fs::path(in["labels"].at("path").get<std::string>());
    if (in.contains("template")) opts.template_file = fs::path(in["template"].at("path").get<std::string>());
    if (in.contains("pricing")) opts.pricing = fs::path(in["pricing"].at("path").get<std::string>());
    opts.placement = placement_from_name(c.at("placement").get<std::string>());
    if (!c.at("seed").is_null()) opts.seed = c["seed"].get<std::uint64_t>();
    opts.limit = c.value("limit", std::size_t{0});
    opts.chars_per_token = c.value("chars_per_token", 4.0);
    opts.embedder = embedder_from_json(c.at("embedder"));
    if (!c.at("cache").is_null()) opts.cache = fs::path(c["cache"].get<std::string>());
    if (c.contains("k")) opts.k = c["k"].get<std::size_t>();
    if (c.contains("order")) opts.order = exemplar_order_from_name(c["order"].get<std::string>());

    opts.provider = provider_from_json(c.at("provider"));
    opts.provider.dialect = Dialect::MockReplay;
    opts.provider.replay_path = run_dir / "replay.jsonl";
    opts.provider.fail_fast = false;
    opts.run_dir = run_dir;
    opts.run_id = run_id;

    claim_run_dir(run_dir);
    export_replay(original, opts.provider.replay_path);

    // The replay file does not count as a run, so the directory can still be claimed below.
    auto replayed = original.mode == "fewshot" ? cmd_run_fewshot(opts) : cmd_run_rag(opts);
    const auto& fresh = replayed.config.at("template").at("sha256");
    if (fresh != c.at("template").at("sha256")) drift.push_back("template: content hash changed");
    replayed.config["replayed_from"] = original.run_id;
    replayed.drift = drift;
    replayed.save(run_dir / "manifest.json");
    return replayed;
}

EvalReport evaluate_manifest(const RunManifest& manifest, std::size_t top_n) {
    LabelSet labels(manifest.labels);
    std::vector<Prediction> preds;
    std::vector<std::size_t> golds;
    preds.reserve(manifest.records.size());
    golds.reserve(manifest.records.size());
    for (const auto& r : manifest.records) {
        preds.push_back(r.prediction);
        golds.push_back(r.gold);
    }
    return evaluate(preds, golds, labels, top_n);
}

EvalReport cmd_evaluate(const fs::path& manifest_file, std::optional<fs::path> out_dir, std::size_t top_n) {
    const auto path = manifest_path(manifest_file);
    const auto manifest = RunManifest::load(path);
    auto report = evaluate_manifest(manifest, top_n);
    const auto dir = out_dir ? *out_dir : path.parent_path();
    write_file(dir / "eval.json", report.to_json());
    write_file(dir / "eval.txt", report.to_text());
    write_file(dir / "eval.csv", report.to_csv());
    return report;
}

CostReport cmd_cost(const std::vector<fs::path>& runs, const fs::path& pricing_file,
                    std::optional<fs::path> out_dir) {
    if (runs.empty()) throw Error(Errc::InvalidArgument, "no runs given");
    auto pricing = PricingTable::load(pricing_file);
    std::vector<RunUsage> usage;
    for (const auto& run : runs) {
        const auto path = manifest_path(run);
        const auto manifest = RunManifest::load(path);
        RunUsage u;
        u.run_id = manifest.run_id;
        u.setting = manifest.setting;
        const auto ledger_file = path.parent_path() / "ledger.jsonl";
        if (fs::exists(ledger_file)) {
            for (auto& rec : UsageLedger::read_file(ledger_file)) {
                if (rec.run_id == manifest.run_id) u.records.push_back(std::move(rec));
            }
        } else {
            for (const auto& r : manifest.records) u.records.push_back(r.usage);
        }
        if (!manifest.records.empty()) u.micro_f1 = evaluate_manifest(manifest).micro_f1;
        usage.push_back(std::move(u));
    }
    auto report = build_report(usage, pricing);
    if (out_dir) {
        write_file(*out_dir / "cost.txt", report.to_text());
        write_file(*out_dir / "cost.csv", report.to_csv());
    }
    return report;
}

AugmentSummary cmd_augment(const AugmentOptions& opts) {
    auto labels = resolve_labels(opts.labels, opts.seeds);
    auto seeds = group_by_class(labels, load_exemplars(opts.seeds, labels).exemplars);

    std::vector<LabelGroup> groups;
    if (opts.groups_override) {
        groups = load_group_override(*opts.groups_override, labels);
    } else {
        EmbedContext embed(opts.embedder, opts.cache, opts.live);
        auto vectors = embed_texts(embed, seeds.exemplars);
        groups = build_groups(seeds, vectors, opts.num_groups);
        embed.persist();
    }
    if (opts.groups_out) save_groups(*opts.groups_out, groups, labels);

    auto requests = make_generation_requests(groups, seeds, opts.seeds_per_class, opts.per_class);
    std::vector<PromptBundle> bundles;
    std::size_t demanded = 0;
    for (const auto& r : requests) {
        bundles.push_back(render_generation_prompt(r, labels));
        demanded += r.demanded_lines();
    }

    if (opts.dump_requests) {
        std::string out;
        for (std::size_t i = 0; i < requests.size(); ++i) {
            ordered_json j;
            j["group_id"] = requests[i].group.group_id;
            std::vector<std::string> names;
            for (auto l : requests[i].group.member_labels) names.push_back(labels.name(l));
            j["labels"] = names;
            j["demanded_lines"] = requests[i].demanded_lines();
            j["replay_key"] = replay_key(bundles[i]);
            auto& msgs = j["messages"] = ordered_json::array();
            for (const auto& m : bundles[i].messages) {
                msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
            }
            out += j.dump() + "\n";
        }
        write_file(*opts.dump_requests, out);
    }

    AugmentSummary summary;
    summary.groups = groups.size();
    summary.demanded_lines = demanded;
    if (opts.dump_only) return summary;

    if (opts.provider.dialect == Dialect::MockCentroidOracle) {
        throw Error(Errc::InvalidArgument, "augmentation needs a generative provider (replay or network)");
    }
    require_offline_or_live(opts.provider, opts.live);

    auto provider = opts.provider;
    provider.stop_at_newline = false;
    std::size_t widest = 0;
    for (const auto& r : requests) widest = std::max(widest, r.demanded_lines());
    provider.max_tokens = std::max(provider.max_tokens, std::min<std::size_t>(4096, widest * 48));
    provider.reserved_completion_tokens = std::max(provider.reserved_completion_tokens, provider.max_tokens);

    std::unique_ptr<UsageLedger> ledger;
    std::string run_id = new_run_id();
    if (opts.run_dir) {
        claim_run_dir(*opts.run_dir);
        ledger = std::make_unique<UsageLedger>(*opts.run_dir / "ledger.jsonl");
    }
    Gateway gateway(provider, make_chat_backend(provider));
    auto results = gateway.run_batch(bundles, run_id, ledger.get());

    std::vector<GeneratedCandidate> candidates;
    std::vector<Rejection> malformed;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto gid = requests[i].group.group_id;
        if (results[i].error) {
            malformed.push_back({"", results[i].error->message, gid, "request_failed"});
            continue;
        }
        auto parsed = parse_generation_output(results[i].raw_text, gid, &malformed);
        candidates.insert(candidates.end(), parsed.begin(), parsed.end());
    }
    auto filtered = filter_generated(candidates, seeds, labels, opts.per_class);
    const auto candidate_lines = candidates.size() + malformed.size();
    filtered.rejections.insert(filtered.rejections.begin(), malformed.begin(), malformed.end());

    save_generated(opts.out, filtered);
    auto rejections = opts.rejections ? *opts.rejections : fs::path(opts.out.string() + ".rejections.json");
    write_file(rejections, rejection_report_json(filtered, demanded, candidate_lines));

    if (opts.run_dir) {
        RunManifest m;
        m.run_id = run_id;
        m.mode = "augment";
        m.setting = "augment";
        m.labels = labels.names();
        m.config["provider"] = provider_to_json(provider);
        m.config["num_groups"] = groups.size();
        m.config["per_class"] = opts.per_class;
        m.config["seeds_per_class"] = opts.seeds_per_class;
        m.inputs["seeds"] = file_ref(opts.seeds);
        if (opts.groups_override) m.inputs["groups"] = file_ref(*opts.groups_override);
        m.save(*opts.run_dir / "manifest.json");
    }

    summary.candidate_lines = candidate_lines;
    summary.survivors = filtered.survivors.size();
    summary.rejected = filtered.rejections.size();
    return summary;
}

}  // namespace intentrag::pipeline

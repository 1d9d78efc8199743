#include "intentrag/intentrag.h"

#include <charconv>
#include <cstring>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "common/text.hpp"
#include "embedder.hpp"
#include "labelspace.hpp"
#include "pipeline.hpp"
#include "retriever.hpp"

struct irag_options {
    std::map<std::string, std::vector<std::string>> values;
};

struct irag_result {
    std::string summary;
    std::string path;
};

struct irag_labelset {
    intentrag::LabelSet labels;
};

struct irag_index {
    intentrag::ExemplarIndex index;
};

namespace {

using namespace intentrag;
namespace fs = std::filesystem;

thread_local std::string g_last_error;
thread_local std::string g_last_code;

irag_status fail(irag_status status, const std::string& code, const std::string& message) {
    g_last_error = message;
    g_last_code = code;
    return status;
}

template <typename F>
irag_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        g_last_code.clear();
        return IRAG_OK;
    } catch (const Error& e) {
        return fail(static_cast<irag_status>(e.category()), std::string(errc_name(e.code())), e.what());
    } catch (const std::bad_alloc&) {
        return fail(IRAG_INTERNAL, "Internal", "out of memory");
    } catch (const std::exception& e) {
        return fail(IRAG_INTERNAL, "Internal", e.what());
    }
}

class Opts {
public:
    explicit Opts(const irag_options* o) {
        if (!o) throw Error(Errc::InvalidArgument, "options handle is null");
        values_ = &o->values;
    }

    bool has(const std::string& key) const { return values_->count(key) && !values_->at(key).empty(); }

    std::string str(const std::string& key) const {
        if (!has(key)) throw Error(Errc::InvalidArgument, "missing required option '" + key + "'");
        return values_->at(key).back();
    }
    std::string str(const std::string& key, const std::string& fallback) const {
        return has(key) ? values_->at(key).back() : fallback;
    }
    std::optional<std::string> opt(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return values_->at(key).back();
    }
    std::optional<fs::path> path(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return fs::path(values_->at(key).back());
    }
    std::vector<std::string> all(const std::string& key) const {
        return has(key) ? values_->at(key) : std::vector<std::string>{};
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const auto s = str(key);
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) {
            throw Error(Errc::InvalidArgument, "option '" + key + "' expects a non-negative integer, got '" + s + "'");
        }
        return v;
    }
    std::size_t size(const std::string& key, std::size_t fallback) const {
        return static_cast<std::size_t>(u64(key, fallback));
    }
    double real(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const auto s = str(key);
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw Error(Errc::InvalidArgument, "option '" + key + "' expects a number, got '" + s + "'");
        }
    }
    bool flag(const std::string& key) const {
        if (!has(key)) return false;
        auto v = to_lower_ascii(str(key));
        if (v == "1" || v == "true" || v == "yes" || v == "on" || v.empty()) return true;
        if (v == "0" || v == "false" || v == "no" || v == "off") return false;
        throw Error(Errc::InvalidArgument, "option '" + key + "' expects a boolean, got '" + v + "'");
    }

private:
    const std::map<std::string, std::vector<std::string>>* values_;
};

EmbeddingProviderConfig embedder_config(const Opts& o) {
    EmbeddingProviderConfig c;
    auto kind = o.str("embedder", "test");
    if (kind == "test") {
        c.kind = EmbeddingProviderConfig::Kind::Test;
    } else if (kind == "remote") {
        c.kind = EmbeddingProviderConfig::Kind::Remote;
        c.model_id = "all-mpnet-base-v2";
        c.dim = 768;
    } else {
        throw Error(Errc::InvalidArgument, "embedder must be 'test' or 'remote'");
    }
    c.model_id = o.str("embed-model", c.model_id);
    c.dim = o.size("embed-dim", c.dim);
    c.base_url = o.str("embed-url", c.base_url);
    c.api_key_env = o.str("embed-key-env", c.api_key_env);
    c.batch_size = o.size("embed-batch", c.batch_size);
    c.max_parallel = o.size("embed-parallel", c.max_parallel);
    return c;
}

ProviderConfig provider_config(const Opts& o) {
    ProviderConfig c;
    c.dialect = dialect_from_name(o.str("provider", "mock-oracle"));
    switch (c.dialect) {
        case Dialect::OpenAIChat:
            c.model_id = "gpt-4";
            c.api_key_env = "OPENAI_API_KEY";
            break;
        case Dialect::AnthropicMessages:
            c.model_id = "claude-2";
            c.api_key_env = "ANTHROPIC_API_KEY";
            break;
        case Dialect::CohereGenerate:
            c.model_id = "command-nightly";
            c.api_key_env = "COHERE_API_KEY";
            break;
        case Dialect::MockReplay:
            c.model_id = "mock-replay";
            break;
        case Dialect::MockCentroidOracle:
            c.model_id = "mock-oracle";
            break;
    }
    c.base_url = default_base_url(c.dialect);
    c.model_id = o.str("model", c.model_id);
    c.base_url = o.str("base-url", c.base_url);
    c.api_key_env = o.str("api-key-env", c.api_key_env);
    if (auto p = o.path("replay")) c.replay_path = *p;
    if (c.dialect == Dialect::MockReplay && c.replay_path.empty()) {
        throw Error(Errc::InvalidArgument, "the mock-replay provider needs a replay file");
    }
    c.max_parallel = o.size("max-parallel", c.max_parallel);
    c.retry.max_attempts = static_cast<int>(o.u64("max-attempts", static_cast<std::uint64_t>(c.retry.max_attempts)));
    c.retry.base_delay_ms = static_cast<std::int64_t>(o.u64("base-delay-ms", static_cast<std::uint64_t>(c.retry.base_delay_ms)));
    c.retry.backoff_factor = o.real("backoff-factor", c.retry.backoff_factor);
    c.context_limit_tokens = o.size("context-limit", c.context_limit_tokens);
    c.reserved_completion_tokens = o.size("reserved-tokens", c.reserved_completion_tokens);
    c.max_tokens = o.size("max-tokens", c.max_tokens);
    c.timeout_ms = static_cast<std::int64_t>(o.u64("timeout-ms", static_cast<std::uint64_t>(c.timeout_ms)));
    c.fail_fast = o.flag("fail-fast");
    return c;
}

pipeline::RunOptions run_options(const Opts& o) {
    pipeline::RunOptions r;
    r.exemplars = o.str("exemplars");
    r.test = o.str("test");
    r.labels = o.path("labels");
    r.placement = placement_from_name(o.str("placement", "system"));
    r.provider = provider_config(o);
    r.live = o.flag("live");
    r.run_dir = o.str("run-dir");
    r.run_id = o.opt("run-id");
    r.template_file = o.path("template");
    r.pricing = o.path("pricing");
    r.cache = o.path("cache");
    r.embedder = embedder_config(o);
    r.chars_per_token = o.real("chars-per-token", r.chars_per_token);
    r.k = o.size("k", r.k);
    if (o.has("order")) r.order = exemplar_order_from_name(o.str("order"));
    if (o.has("seed")) r.seed = o.u64("seed", 0);
    r.limit = o.size("limit", 0);
    return r;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string run_summary(const pipeline::RunManifest& m) {
    std::size_t errors = 0, unknown = 0;
    for (const auto& r : m.records) {
        if (r.error) ++errors;
        if (r.prediction.is_unknown()) ++unknown;
    }
    std::ostringstream s;
    s << "run " << m.run_id << " (" << m.mode << ", " << m.setting << "): " << m.records.size()
      << " records, " << errors << " failed, " << unknown << " unknown, mean prompt estimate "
      << fmt4(m.mean_estimated_tokens()) << " tokens";
    for (const auto& d : m.drift) s << "\ndrift: " << d;
    return s.str();
}

irag_result* make_result(std::string summary, std::string path) {
    return new irag_result{std::move(summary), std::move(path)};
}

template <typename F>
irag_status command(const irag_options* opts, irag_result** out, F&& body) {
    return guarded([&] {
        if (!out) throw Error(Errc::InvalidArgument, "result pointer is null");
        *out = nullptr;
        Opts o(opts);
        *out = body(o);
    });
}

}  // namespace

extern "C" {

const char* irag_last_error(void) { return g_last_error.c_str(); }
const char* irag_last_error_code(void) { return g_last_code.c_str(); }
const char* irag_version(void) { return "0.1.0"; }

irag_options* irag_options_new(void) { return new (std::nothrow) irag_options(); }

irag_status irag_options_set(irag_options* opts, const char* key, const char* value) {
    return guarded([&] {
        if (!opts || !key || !value) throw Error(Errc::InvalidArgument, "null argument");
        opts->values[key].push_back(value);
    });
}

irag_status irag_options_load_file(irag_options* opts, const char* path) {
    return guarded([&] {
        if (!opts || !path) throw Error(Errc::InvalidArgument, "null argument");
        auto j = nlohmann::json::parse(read_file(path), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(Errc::InvalidArgument, std::string(path) + " is not a JSON object");
        }
        auto scalar = [&](const std::string& key, const nlohmann::json& v) -> std::string {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
            if (v.is_number()) return v.dump();
            throw Error(Errc::InvalidArgument, "config key '" + key + "' must be a string, number or boolean");
        };
        for (const auto& [key, v] : j.items()) {
            if (key == "api-key" || key == "api_key" || key == "embed-key" || key == "embed_key") {
                throw Error(Errc::InvalidArgument,
                            "config key '" + key + "': API keys are read from environment variables only");
            }
            auto& slot = opts->values[key];
            slot.clear();
            if (v.is_array()) {
                for (const auto& e : v) slot.push_back(scalar(key, e));
            } else {
                slot.push_back(scalar(key, v));
            }
        }
    });
}

void irag_options_free(irag_options* opts) { delete opts; }

const char* irag_result_summary(const irag_result* result) { return result ? result->summary.c_str() : ""; }
const char* irag_result_path(const irag_result* result) { return result ? result->path.c_str() : ""; }
void irag_result_free(irag_result* result) { delete result; }

irag_status irag_cmd_ingest(const irag_options* opts, irag_result** out) {
    return command(opts, out, [](const Opts& o) {
        pipeline::IngestOptions io{o.str("input"), o.path("labels"), o.str("out"), o.path("labels-out")};
        auto s = pipeline::cmd_ingest(io);
        return make_result("ingested " + std::to_string(s.items) + " items over " + std::to_string(s.classes) +
                               " classes",
                           io.out.string());
    });
}

irag_status irag_cmd_embed(const irag_options* opts, irag_result** out) {
    return command(opts, out, [](const Opts& o) {
        pipeline::EmbedOptions eo;
        for (const auto& p : o.all("input")) eo.inputs.emplace_back(p);
        eo.cache = o.str("cache");
        eo.provider = embedder_config(o);
        eo.live = o.flag("live");
        auto s = pipeline::cmd_embed(eo);
        return make_result("embedded " + std::to_string(s.texts) + " distinct texts; cache holds " +
                               std::to_string(s.cache_size) + " vectors; " + std::to_string(s.provider_calls) +
                               " encoder calls",
                           eo.cache.string());
    });
}

irag_status irag_cmd_sample(const irag_options* opts, irag_result** out) {
    return command(opts, out, [](const Opts& o) {
        pipeline::SampleOptions so;
        so.train = o.str("train");
        so.labels = o.path("labels");
        so.strategy = o.str("strategy", "random");
        so.shots = o.size("shots", so.shots);
        so.seed = o.u64("seed", 0);
        so.curated = o.path("curated");
        so.generated = o.path("generated");
        so.original_per_class = o.size("original", so.shots);
        so.generated_per_class = o.size("generated-per-class", 0);
        so.out = o.str("out");
        auto s = pipeline::cmd_sample(so);
        return make_result("sampled " + std::to_string(s.exemplars) + " exemplars over " +
                               std::to_string(s.classes) + " classes",
                           so.out.string());
    });
}

irag_status irag_cmd_run_fewshot(const irag_options* opts, irag_result** out) {
    return command(opts, out, [opts](const Opts& o) {
        const irag_options* effective = opts;
        irag_options local;
        if (!o.has("exemplars") && o.has("train")) {
            // Sample into the run directory first, then classify with that set.
            pipeline::SampleOptions so;
            so.train = o.str("train");
            so.labels = o.path("labels");
            so.shots = o.size("shots", so.shots);
            so.seed = o.u64("seed", 0);
            so.out = fs::path(o.str("run-dir")) / "exemplars.jsonl";
            pipeline::cmd_sample(so);
            local.values = opts->values;
            local.values["exemplars"] = {so.out.string()};
            effective = &local;
        }
        auto r = run_options(Opts(effective));
        auto m = pipeline::cmd_run_fewshot(r);
        return make_result(run_summary(m), (r.run_dir / "manifest.json").string());
    });
}

irag_status irag_cmd_run_rag(const irag_options* opts, irag_result** out) {
    return command(opts, out, [](const Opts& o) {
        auto r = run_options(o);
        auto m = pipeline::cmd_run_rag(r);
        return make_result(run_summary(m) + "\nretrieval fraction " + m.config.value("retrieval_fraction", ""),
                           (r.run_dir / "manifest.json").string());
    });
}

irag_status irag_cmd_run_replay(const irag_options* opts, irag_result** out) {
    return command(opts, out, [](const Opts& o) {
        fs::path dir = o.str("run-dir");
        auto m = pipeline::cmd_run_replay(o.str("manifest"), dir, o.opt("run-id"));
        return make_result(run_summary(m), (dir / "manifest.json").string());
    });
}

irag_status irag_cmd_evaluate(const irag_options* opts, irag_result** out) {
    return command(opts, out, [](const Opts& o) {
        auto manifest = pipeline::manifest_path(o.str("manifest"));
        auto dir = o.path("out-dir");
        auto report = pipeline::cmd_evaluate(manifest, dir, o.size("top", 10));
        auto where = (dir ? *dir : manifest.parent_path()) / "eval.json";
        return make_result(report.to_text(), where.string());
    });
}

irag_status irag_cmd_cost(const irag_options* opts, irag_result** out) {
    return command(opts, out, [](const Opts& o) {
        std::vector<fs::path> runs;
        for (const auto& r : o.all("run")) runs.emplace_back(r);
        auto dir = o.path("out-dir");
        auto report = pipeline::cmd_cost(runs, o.str("pricing"), dir);
        return make_result(report.to_text(), dir ? (*dir / "cost.csv").string() : std::string());
    });
}

irag_status irag_cmd_augment(const irag_options* opts, irag_result** out) {
    return command(opts, out, [](const Opts& o) {
        pipeline::AugmentOptions a;
        a.seeds = o.str("seeds");
        a.labels = o.path("labels");
        a.groups_override = o.path("groups");
        a.num_groups = o.size("num-groups", a.num_groups);
        a.seeds_per_class = o.size("seeds-per-class", a.seeds_per_class);
        a.per_class = o.size("per-class", a.per_class);
        a.dump_only = o.flag("dump-only");
        a.provider = a.dump_only && !o.has("provider") ? ProviderConfig{} : provider_config(o);
        a.live = o.flag("live");
        a.cache = o.path("cache");
        a.embedder = embedder_config(o);
        a.out = o.str("out", "");
        if (!a.dump_only && a.out.empty()) throw Error(Errc::InvalidArgument, "missing required option 'out'");
        a.rejections = o.path("rejections");
        a.groups_out = o.path("groups-out");
        a.dump_requests = o.path("dump-requests");
        a.run_dir = o.path("run-dir");
        auto s = pipeline::cmd_augment(a);
        std::string summary = std::to_string(s.groups) + " groups, " + std::to_string(s.demanded_lines) +
                              " lines requested";
        if (!a.dump_only) {
            summary += ", " + std::to_string(s.candidate_lines) + " returned, " + std::to_string(s.survivors) +
                       " kept, " + std::to_string(s.rejected) + " rejected";
        }
        return make_result(summary, a.dump_only ? (a.dump_requests ? a.dump_requests->string() : "")
                                                : a.out.string());
    });
}

irag_status irag_labelset_load(const char* path, irag_labelset** out) {
    return guarded([&] {
        if (!path || !out) throw Error(Errc::InvalidArgument, "null argument");
        *out = new irag_labelset{LabelSet::load(path)};
    });
}

size_t irag_labelset_size(const irag_labelset* labels) { return labels ? labels->labels.size() : 0; }

const char* irag_labelset_name(const irag_labelset* labels, size_t index) {
    if (!labels || index >= labels->labels.size()) return nullptr;
    return labels->labels.name(index).c_str();
}

irag_status irag_parse_prediction(const irag_labelset* labels, const char* raw, int64_t* label,
                                  const char** rule) {
    return guarded([&] {
        if (!labels || !raw || !label) throw Error(Errc::InvalidArgument, "null argument");
        auto p = parse_prediction(raw, labels->labels);
        *label = p.label ? static_cast<int64_t>(*p.label) : -1;
        // Rule names are string literals with static storage.
        if (rule) *rule = parse_rule_name(p.rule).data();
    });
}

void irag_labelset_free(irag_labelset* labels) { delete labels; }

irag_status irag_canonicalize(const char* label_text, char* buf, size_t buf_len, size_t* needed) {
    return guarded([&] {
        if (!label_text) throw Error(Errc::InvalidArgument, "null argument");
        auto c = canonicalize(label_text);
        if (needed) *needed = c.size();
        if (!buf || buf_len <= c.size()) throw Error(Errc::InvalidArgument, "buffer too small");
        std::memcpy(buf, c.c_str(), c.size() + 1);
    });
}

irag_status irag_test_embed(const char* text, size_t dim, float* out) {
    return guarded([&] {
        if (!text || !out) throw Error(Errc::InvalidArgument, "null argument");
        auto v = test_embed(text, dim);
        std::memcpy(out, v.data(), dim * sizeof(float));
    });
}

irag_status irag_index_build(const float* rows, size_t count, size_t dim, irag_index** out) {
    return guarded([&] {
        if (!out || (!rows && count > 0)) throw Error(Errc::InvalidArgument, "null argument");
        std::vector<EmbeddingVector> vs;
        vs.reserve(count);
        for (size_t i = 0; i < count; ++i) {
            vs.push_back(EmbeddingVector::from_unit(std::vector<float>(rows + i * dim, rows + (i + 1) * dim)));
        }
        *out = new irag_index{ExemplarIndex::build(vs)};
    });
}

irag_status irag_index_top_k(const irag_index* index, const float* query, size_t k, size_t* ids,
                             double* similarities) {
    return guarded([&] {
        if (!index || !query || !ids) throw Error(Errc::InvalidArgument, "null argument");
        const auto dim = index->index.dim();
        auto q = EmbeddingVector::from_unit(std::vector<float>(query, query + dim));
        auto hits = index->index.top_k(q, k);
        for (size_t i = 0; i < hits.size(); ++i) {
            ids[i] = hits[i].exemplar_id;
            if (similarities) similarities[i] = hits[i].similarity;
        }
    });
}

void irag_index_free(irag_index* index) { delete index; }

}  // extern "C"

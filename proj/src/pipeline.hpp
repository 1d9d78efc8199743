#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "augmentor.hpp"
#include "corpus.hpp"
#include "embedder.hpp"
#include "evaluator.hpp"
#include "gateway.hpp"
#include "ledger.hpp"
#include "promptkit.hpp"

namespace intentrag::pipeline {

namespace fs = std::filesystem;

// ---- ingest ----------------------------------------------------------------

struct IngestOptions {
    fs::path input;
    std::optional<fs::path> labels;
    fs::path out;
    std::optional<fs::path> labels_out;
};

struct IngestSummary {
    std::size_t items = 0;
    std::size_t classes = 0;
};

IngestSummary cmd_ingest(const IngestOptions& opts);

// ---- embed -----------------------------------------------------------------

struct EmbedOptions {
    std::vector<fs::path> inputs;
    fs::path cache;
    EmbeddingProviderConfig provider;
    bool live = false;
};

struct EmbedSummary {
    std::size_t texts = 0;
    std::size_t cache_size = 0;
    std::size_t provider_calls = 0;
};

EmbedSummary cmd_embed(const EmbedOptions& opts);

// ---- sample ----------------------------------------------------------------

struct SampleOptions {
    fs::path train;
    std::optional<fs::path> labels;
    std::string strategy = "random";  // random | curated | mixed
    std::size_t shots = 3;
    std::uint64_t seed = 0;
    std::optional<fs::path> curated;
    std::optional<fs::path> generated;
    std::size_t original_per_class = 3;
    std::size_t generated_per_class = 0;
    fs::path out;
};

struct SampleSummary {
    std::size_t exemplars = 0;
    std::size_t classes = 0;
    std::size_t per_class = 0;
};

SampleSummary cmd_sample(const SampleOptions& opts);

// ---- run -------------------------------------------------------------------

struct RunOptions {
    fs::path exemplars;  // the N-shot set, or the retrieval pool for RAG
    fs::path test;
    std::optional<fs::path> labels;
    Placement placement = Placement::SystemContext;
    ProviderConfig provider;
    bool live = false;
    fs::path run_dir;
    std::optional<std::string> run_id;
    std::optional<fs::path> template_file;
    std::optional<fs::path> pricing;
    std::optional<fs::path> cache;
    EmbeddingProviderConfig embedder;
    double chars_per_token = 4.0;
    std::size_t k = 5;
    ExemplarOrder order = ExemplarOrder::AscendingSimilarity;
    std::optional<std::uint64_t> seed;  // recorded only
    std::size_t limit = 0;              // 0 = every test item
};

struct ManifestRecord {
    std::size_t index = 0;
    std::string query;
    std::size_t gold = 0;
    std::string replay_key;
    std::vector<std::size_t> exemplar_ids;
    std::vector<RetrievalHit> hits;
    std::size_t estimated_tokens = 0;
    std::string raw_text;
    Prediction prediction;
    UsageRecord usage;
    std::int64_t latency_ms = 0;
    std::optional<ItemError> error;
};

struct RunManifest {
    std::string run_id;
    std::string mode;     // fewshot | rag
    std::string setting;  // "3-shot", "5 similar (RAG)"
    nlohmann::ordered_json config;
    nlohmann::ordered_json inputs;
    std::vector<std::string> labels;
    std::vector<ManifestRecord> records;
    std::vector<std::string> drift;

    nlohmann::ordered_json to_json() const;
    static RunManifest from_json(const nlohmann::ordered_json& j);
    void save(const fs::path& path) const;
    static RunManifest load(const fs::path& run_dir_or_file);

    double mean_estimated_tokens() const;
};

fs::path manifest_path(const fs::path& run_dir_or_file);

RunManifest cmd_run_fewshot(const RunOptions& opts);
RunManifest cmd_run_rag(const RunOptions& opts);

// Re-executes a manifest's configuration against a MockReplay backend built from its own
// records. Input drift (changed hashes) is reported in the new manifest.
RunManifest cmd_run_replay(const fs::path& manifest, const fs::path& run_dir,
                           std::optional<std::string> run_id = std::nullopt);

// Replay entries for every delivered record, keyed like MockReplayBackend.
void export_replay(const RunManifest& manifest, const fs::path& path);

// ---- evaluate / cost -------------------------------------------------------

// Writes eval.json, eval.txt and eval.csv into out_dir (default: the manifest's directory).
EvalReport cmd_evaluate(const fs::path& manifest, std::optional<fs::path> out_dir = std::nullopt,
                        std::size_t top_n = 10);

EvalReport evaluate_manifest(const RunManifest& manifest, std::size_t top_n = 10);

// Runs are run directories (manifest.json + ledger.jsonl). Writes cost.txt and cost.csv.
CostReport cmd_cost(const std::vector<fs::path>& runs, const fs::path& pricing,
                    std::optional<fs::path> out_dir = std::nullopt);

// ---- augment ---------------------------------------------------------------

struct AugmentOptions {
    fs::path seeds;  // exemplar file supplying the seed examples per class
    std::optional<fs::path> labels;
    std::optional<fs::path> groups_override;
    std::size_t num_groups = 10;
    std::size_t seeds_per_class = 3;
    std::size_t per_class = 20;
    ProviderConfig provider;
    bool live = false;
    std::optional<fs::path> cache;
    EmbeddingProviderConfig embedder;
    fs::path out;
    std::optional<fs::path> rejections;
    std::optional<fs::path> groups_out;
    std::optional<fs::path> dump_requests;
    std::optional<fs::path> run_dir;
    bool dump_only = false;
};

struct AugmentSummary {
    std::size_t groups = 0;
    std::size_t demanded_lines = 0;
    std::size_t candidate_lines = 0;
    std::size_t survivors = 0;
    std::size_t rejected = 0;
};

AugmentSummary cmd_augment(const AugmentOptions& opts);

// ---- shared helpers --------------------------------------------------------

std::string new_run_id();
LabelSet resolve_labels(const std::optional<fs::path>& labels, const fs::path& fallback_dataset);

}  // namespace intentrag::pipeline

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "common/text.hpp"
#include "pipeline.hpp"
#include "support.hpp"

using namespace intentrag;
using namespace intentrag::pipeline;
using nlohmann::json;
using testsupport::TempDir;

namespace {

fs::path fixture(const std::string& name) { return testsupport::fixtures() / name; }

RunOptions oracle_run(const TempDir& dir, const std::string& name) {
    RunOptions o;
    o.exemplars = fixture("banking77_exemplars_231.jsonl");
    o.test = fixture("banking77_queries.jsonl");
    o.labels = fixture("banking77_labels.txt");
    o.run_dir = dir / name;
    o.run_id = name;
    o.cache = dir / "cache.fiec";
    return o;
}

void write_pricing(const fs::path& path) {
    write_file(path, R"({"effective_date":"2023-11-01","models":{"mock-oracle":{"input_per_1k":"0.03","output_per_1k":"0.06"}}})");
}

}  // namespace

TEST(Pipeline, FewShotRunWritesManifestLedgerAndEval) {
    TempDir dir;
    auto m = cmd_run_fewshot(oracle_run(dir, "fewshot"));
    EXPECT_EQ(m.mode, "fewshot");
    EXPECT_EQ(m.setting, "3-shot");
    ASSERT_EQ(m.records.size(), 12u);
    for (const auto& r : m.records) {
        EXPECT_EQ(r.exemplar_ids.size(), 231u);
        EXPECT_FALSE(r.error.has_value());
        EXPECT_EQ(r.replay_key, sha256_hex(r.query));
        EXPECT_TRUE(r.usage.estimated);
    }
    EXPECT_TRUE(fs::exists(dir / "fewshot" / "manifest.json"));
    EXPECT_EQ(UsageLedger::read_file(dir / "fewshot" / "ledger.jsonl").size(), 12u);
    EXPECT_EQ(m.inputs["test"]["sha256"], sha256_file_hex(fixture("banking77_queries.jsonl")));
    EXPECT_EQ(m.config["template"]["version"], "builtin-v1");

    auto loaded = RunManifest::load(dir / "fewshot");
    EXPECT_EQ(loaded.to_json().dump(), m.to_json().dump());

    auto report = cmd_evaluate(dir / "fewshot");
    EXPECT_EQ(report.instances, 12u);
    EXPECT_TRUE(fs::exists(dir / "fewshot" / "eval.json"));
    EXPECT_TRUE(fs::exists(dir / "fewshot" / "eval.txt"));
    EXPECT_TRUE(fs::exists(dir / "fewshot" / "eval.csv"));
}

TEST(Pipeline, RagRecordsRetrievalAndUsesFewerTokens) {
    TempDir dir;
    auto full = cmd_run_fewshot(oracle_run(dir, "full"));
    auto opts = oracle_run(dir, "rag5");
    auto rag5 = cmd_run_rag(opts);
    opts = oracle_run(dir, "rag20");
    opts.k = 20;
    auto rag20 = cmd_run_rag(opts);
    EXPECT_EQ(rag5.setting, "5 similar (RAG)");
    EXPECT_EQ(rag5.config["retrieval_fraction"], "2.2%");
    EXPECT_EQ(rag20.config["retrieval_fraction"], "8.7%");
    for (const auto& r : rag5.records) {
        ASSERT_EQ(r.hits.size(), 5u);
        EXPECT_EQ(r.exemplar_ids.size(), 5u);
        // Ascending order puts the best hit next to the query.
        EXPECT_EQ(r.exemplar_ids.back(), r.hits.front().exemplar_id);
    }
    EXPECT_LT(rag5.mean_estimated_tokens(), rag20.mean_estimated_tokens());
    EXPECT_LT(rag20.mean_estimated_tokens(), full.mean_estimated_tokens());

    opts = oracle_run(dir, "rag-too-big");
    opts.k = 232;
    EXPECT_ERRC(cmd_run_rag(opts), Errc::KOutOfRange);
}

TEST(Pipeline, ReplayReproducesEvalByteForByte) {
    TempDir dir;
    cmd_run_fewshot(oracle_run(dir, "orig"));
    cmd_evaluate(dir / "orig");
    auto replayed = cmd_run_replay(dir / "orig", dir / "again");
    EXPECT_TRUE(replayed.drift.empty());
    EXPECT_EQ(replayed.config["replayed_from"], "orig");
    EXPECT_EQ(replayed.config["provider"]["dialect"], "mock-replay");
    cmd_evaluate(dir / "again");
    EXPECT_EQ(read_file(dir / "orig" / "eval.json"), read_file(dir / "again" / "eval.json"));
    EXPECT_EQ(read_file(dir / "orig" / "eval.txt"), read_file(dir / "again" / "eval.txt"));
}

TEST(Pipeline, ReplayReportsDrift) {
    TempDir dir;
    write_file(dir / "test.jsonl", read_file(fixture("banking77_queries.jsonl")));
    auto opts = oracle_run(dir, "orig");
    opts.test = dir / "test.jsonl";
    cmd_run_fewshot(opts);
    write_file(dir / "test.jsonl", read_file(dir / "test.jsonl") +
                                        "{\"text\":\"Where is my new card?\",\"label\":\"card_arrival\"}\n");
    auto replayed = cmd_run_replay(dir / "orig", dir / "again");
    ASSERT_EQ(replayed.drift.size(), 1u);
    EXPECT_NE(replayed.drift[0].find("test"), std::string::npos);
    EXPECT_EQ(replayed.records.size(), 13u);
    EXPECT_TRUE(replayed.records.back().prediction.is_unknown());  // no recorded response
}

TEST(Pipeline, RefusesToReuseRunDirectory) {
    TempDir dir;
    cmd_run_fewshot(oracle_run(dir, "once"));
    EXPECT_ERRC(cmd_run_fewshot(oracle_run(dir, "once")), Errc::InvalidArgument);
    EXPECT_ERRC(cmd_run_replay(dir / "once", dir / "once"), Errc::InvalidArgument);
    EXPECT_ERRC(RunManifest::load(dir / "nowhere"), Errc::MissingManifest);
}

TEST(Pipeline, NetworkProvidersNeedLive) {
    TempDir dir;
    auto opts = oracle_run(dir, "net");
    opts.provider.dialect = Dialect::OpenAIChat;
    opts.provider.model_id = "gpt-4";
    opts.provider.api_key_env = "INTENTRAG_TEST_UNSET_KEY";
    EXPECT_ERRC(cmd_run_fewshot(opts), Errc::InvalidArgument);
    EXPECT_FALSE(fs::exists(dir / "net" / "ledger.jsonl"));

    EmbedOptions e;
    e.inputs = {fixture("banking77_queries.jsonl")};
    e.cache = dir / "remote.fiec";
    e.provider.kind = EmbeddingProviderConfig::Kind::Remote;
    e.provider.base_url = "http://127.0.0.1:9";
    EXPECT_ERRC(cmd_embed(e), Errc::ProviderUnavailable);
}

TEST(Pipeline, ContextOverflowStopsBeforeAnyCall) {
    TempDir dir;
    auto opts = oracle_run(dir, "small-window");
    opts.provider.context_limit_tokens = 4096;
    EXPECT_ERRC(cmd_run_fewshot(opts), Errc::ContextOverflow);
    EXPECT_FALSE(fs::exists(dir / "small-window" / "ledger.jsonl") &&
                 !UsageLedger::read_file(dir / "small-window" / "ledger.jsonl").empty());
}

TEST(Pipeline, CostJoinsEvaluation) {
    TempDir dir;
    cmd_run_fewshot(oracle_run(dir, "a"));
    auto opts = oracle_run(dir, "b");
    opts.k = 5;
    cmd_run_rag(opts);
    write_pricing(dir / "pricing.json");
    auto report = cmd_cost({dir / "a", dir / "b"}, dir / "pricing.json", dir.path());
    ASSERT_EQ(report.rows.size(), 2u);
    EXPECT_EQ(report.rows[0].setting, "3-shot");
    EXPECT_EQ(report.rows[1].setting, "5 similar (RAG)");
    EXPECT_TRUE(report.rows[0].micro_f1.has_value());
    EXPECT_TRUE(report.rows[0].estimated);
    EXPECT_GT(report.rows[0].total_cost, report.rows[1].total_cost);
    EXPECT_TRUE(fs::exists(dir / "cost.txt"));
    EXPECT_TRUE(fs::exists(dir / "cost.csv"));
}

TEST(Pipeline, SampleIngestAndEmbed) {
    TempDir dir;
    IngestOptions in;
    in.input = fixture("banking77_exemplars_231.jsonl");
    in.labels = fixture("banking77_labels.txt");
    in.out = dir / "canonical.jsonl";
    auto ingest = cmd_ingest(in);
    EXPECT_EQ(ingest.items, 231u);
    EXPECT_EQ(ingest.classes, 77u);

    SampleOptions s;
    s.train = dir / "canonical.jsonl";
    s.labels = fixture("banking77_labels.txt");
    s.shots = 2;
    s.seed = 9;
    s.out = dir / "two.jsonl";
    auto sampled = cmd_sample(s);
    EXPECT_EQ(sampled.exemplars, 154u);
    s.out = dir / "two-again.jsonl";
    cmd_sample(s);
    EXPECT_EQ(read_file(dir / "two.jsonl"), read_file(dir / "two-again.jsonl"));

    EmbedOptions e;
    e.inputs = {dir / "two.jsonl", fixture("banking77_queries.jsonl")};
    e.cache = dir / "c.fiec";
    auto first = cmd_embed(e);
    EXPECT_EQ(first.texts, 166u);
    EXPECT_GT(first.provider_calls, 0u);
    auto second = cmd_embed(e);
    EXPECT_EQ(second.provider_calls, 0u);
    EXPECT_EQ(second.cache_size, first.cache_size);
}

TEST(Pipeline, AugmentWithReplayedGenerator) {
    TempDir dir;
    write_file(dir / "groups.json", [] {
        auto labels = LabelSet::load(fixture("banking77_labels.txt"));
        json groups = json::array();
        groups.push_back({"top_up_failed", "top_up_reverted"});
        json rest = json::array();
        for (const auto& n : labels.names())
            if (n != "top_up_failed" && n != "top_up_reverted") rest.push_back(n);
        groups.push_back(rest);
        return groups.dump();
    }());

    AugmentOptions a;
    a.seeds = fixture("banking77_exemplars_231.jsonl");
    a.labels = fixture("banking77_labels.txt");
    a.groups_override = dir / "groups.json";
    a.per_class = 2;
    a.provider.dialect = Dialect::MockReplay;
    a.provider.model_id = "gpt-4";
    a.dump_requests = dir / "requests.jsonl";
    a.dump_only = true;
    a.out = dir / "generated.jsonl";
    cmd_augment(a);
    auto lines = split_lines(read_file(dir / "requests.jsonl"));
    ASSERT_EQ(lines.size(), 2u);
    // Groups are numbered by their smallest label, so the large group comes first.
    auto first = json::parse(lines[1]);
    EXPECT_EQ(first["labels"], json({"top_up_failed", "top_up_reverted"}));
    EXPECT_EQ(first["demanded_lines"], 4);

    std::vector<std::pair<std::string, ReplayEntry>> entries;
    entries.emplace_back(first["replay_key"].get<std::string>(),
                         ReplayEntry{"top_up_failed\tMy top-up bounced back twice\n"
                                     "topup_failed\tThis label is not canonical\n"
                                     "top_up_reverted\tThe money I topped up disappeared\n"
                                     "just some chatter",
                                     std::nullopt, std::nullopt, 0});
    MockReplayBackend::write_file(dir / "replay.jsonl", entries);
    a.provider.replay_path = dir / "replay.jsonl";
    a.dump_only = false;
    a.dump_requests.reset();
    a.run_dir = dir / "augment-run";
    auto summary = cmd_augment(a);
    EXPECT_EQ(summary.groups, 2u);
    EXPECT_EQ(summary.survivors, 2u);
    auto generated = load_dataset(dir / "generated.jsonl", DataFormat::Jsonl, LabelSet::load(fixture("banking77_labels.txt")));
    ASSERT_EQ(generated.items.size(), 2u);
    EXPECT_EQ(generated.items[0].origin, Origin::Generated);
    auto rejections = json::parse(read_file(dir / "generated.jsonl.rejections.json"));
    EXPECT_EQ(rejections["rejections_by_reason"]["unknown_label"], 1);
    EXPECT_EQ(rejections["rejections_by_reason"]["malformed"], 1);
    EXPECT_EQ(rejections["rejections_by_reason"]["request_failed"], 1);

    a.provider.dialect = Dialect::MockCentroidOracle;
    EXPECT_ERRC(cmd_augment(a), Errc::InvalidArgument);
}

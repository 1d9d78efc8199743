#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "intentrag/intentrag.h"

namespace {

using Command = irag_status (*)(const irag_options*, irag_result**);

struct Pending {
    std::vector<std::pair<std::string, std::string>> values;
    std::string config;
};

struct Spec {
    const char* name;
    const char* help;
    enum Kind { Value, Repeated, Flag } kind = Value;
};

void add_one(CLI::App* app, Pending& pending, const Spec& s) {
    const std::string key = s.name;
    const std::string flag = "--" + key;
    switch (s.kind) {
        case Spec::Flag:
            app->add_flag_callback(flag, [&pending, key] { pending.values.emplace_back(key, "true"); }, s.help);
            break;
        case Spec::Repeated:
            app->add_option_function<std::vector<std::string>>(
                   flag,
                   [&pending, key](const std::vector<std::string>& vs) {
                       for (const auto& v : vs) pending.values.emplace_back(key, v);
                   },
                   s.help)
                ->expected(1, -1);
            break;
        case Spec::Value:
            app->add_option_function<std::string>(
                flag, [&pending, key](const std::string& v) { pending.values.emplace_back(key, v); }, s.help);
            break;
    }
}

void add_all(CLI::App* app, Pending& pending, std::initializer_list<std::initializer_list<Spec>> groups) {
    app->add_option("--config", pending.config, "JSON file of option values; flags override it");
    for (const auto& g : groups) {
        for (const auto& s : g) add_one(app, pending, s);
    }
}

void add_options(CLI::App* app, Pending& pending, std::initializer_list<Spec> specs) {
    add_all(app, pending, {specs});
}

const std::initializer_list<Spec> kProviderSpecs = {
    {"provider", "openai | anthropic | cohere | mock-replay | mock-oracle (default)"},
    {"model", "provider model id"},
    {"base-url", "provider endpoint"},
    {"api-key-env", "environment variable holding the API key"},
    {"replay", "replay JSONL for the mock-replay provider"},
    {"live", "allow network providers", Spec::Flag},
    {"max-parallel", "concurrent provider calls"},
    {"max-attempts", "attempts per call, including the first"},
    {"base-delay-ms", "first retry delay"},
    {"backoff-factor", "retry delay multiplier"},
    {"context-limit", "provider context window in tokens"},
    {"reserved-tokens", "tokens held back for the answer"},
    {"max-tokens", "completion token cap"},
    {"timeout-ms", "HTTP timeout"},
    {"fail-fast", "abort the batch on the first failed item", Spec::Flag},
};

const std::initializer_list<Spec> kEmbedderSpecs = {
    {"embedder", "test (default) | remote"},
    {"embed-model", "embedding model id"},
    {"embed-dim", "embedding dimension"},
    {"embed-url", "remote embedding endpoint"},
    {"embed-key-env", "environment variable holding the embedding API key"},
    {"embed-batch", "texts per embedding request"},
    {"embed-parallel", "concurrent embedding requests"},
    {"cache", "embedding cache file"},
};

int run(Command cmd, const Pending& pending) {
    std::unique_ptr<irag_options, decltype(&irag_options_free)> opts(irag_options_new(), irag_options_free);
    if (!opts) {
        std::fprintf(stderr, "error: out of memory\n");
        return IRAG_INTERNAL;
    }
    if (!pending.config.empty() && irag_options_load_file(opts.get(), pending.config.c_str()) != IRAG_OK) {
        std::fprintf(stderr, "error: %s\n", irag_last_error());
        return IRAG_USAGE;
    }
    for (const auto& [k, v] : pending.values) irag_options_set(opts.get(), k.c_str(), v.c_str());

    irag_result* result = nullptr;
    auto status = cmd(opts.get(), &result);
    if (status != IRAG_OK) {
        std::fprintf(stderr, "error: %s\n", irag_last_error());
        return status;
    }
    std::printf("%s\n", irag_result_summary(result));
    if (*irag_result_path(result)) std::printf("wrote %s\n", irag_result_path(result));
    irag_result_free(result);
    return IRAG_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot and retrieval-augmented intent classification experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(irag_version()));

    Pending pending;
    Command chosen = nullptr;

    auto* ingest = app.add_subcommand("ingest", "Validate a CSV/JSONL dataset and write canonical JSONL");
    add_options(ingest, pending,
                {{"input", "dataset file (.csv or .jsonl)"},
                 {"labels", "declared label list"},
                 {"out", "canonical JSONL output"},
                 {"labels-out", "write the resolved label list here"}});
    ingest->callback([&] { chosen = irag_cmd_ingest; });

    auto* embed = app.add_subcommand("embed", "Embed dataset texts into the cache");
    add_all(embed, pending,
            {{{"input", "dataset file(s)", Spec::Repeated}}, kEmbedderSpecs, {{"live", "allow a remote embedder", Spec::Flag}}});
    embed->callback([&] { chosen = irag_cmd_embed; });

    auto* sample = app.add_subcommand("sample", "Draw an N-shot exemplar set");
    add_options(sample, pending,
                {{"train", "training dataset"},
                 {"labels", "declared label list"},
                 {"strategy", "random (default) | curated | mixed"},
                 {"shots", "exemplars per class"},
                 {"seed", "sampling seed"},
                 {"curated", "curated exemplar file"},
                 {"generated", "generated examples for mixed sets"},
                 {"original", "original exemplars per class in a mixed set"},
                 {"generated-per-class", "generated exemplars per class in a mixed set"},
                 {"out", "exemplar JSONL output"}});
    sample->callback([&] { chosen = irag_cmd_sample; });

    auto* run_cmd = app.add_subcommand("run", "Classify a test set");
    run_cmd->require_subcommand(1);
    const std::initializer_list<Spec> run_specs = {
        {"exemplars", "exemplar file (N-shot set or retrieval pool)"},
        {"test", "test dataset"},
        {"labels", "declared label list"},
        {"placement", "system (default) | history"},
        {"run-dir", "new run directory"},
        {"run-id", "explicit run id"},
        {"template", "prompt template file"},
        {"pricing", "pricing file recorded in the manifest"},
        {"chars-per-token", "token estimate ratio"},
        {"seed", "seed recorded in the manifest"},
        {"limit", "classify only the first n test items"},
    };
    auto* fewshot = run_cmd->add_subcommand("fewshot", "Every exemplar in every prompt");
    add_all(fewshot, pending, {run_specs, kProviderSpecs, kEmbedderSpecs, {{"train", "sample the exemplars from this dataset instead of --exemplars"},
                                {"shots", "exemplars per class when sampling with --train"}}});
    fewshot->callback([&] { chosen = irag_cmd_run_fewshot; });

    auto* rag = run_cmd->add_subcommand("rag", "Only the k most similar exemplars per prompt");
    add_all(rag, pending,
            {run_specs, kProviderSpecs, kEmbedderSpecs,
             {{"k", "exemplars retrieved per query"}, {"order", "ascending (default) | descending"}}});
    rag->callback([&] { chosen = irag_cmd_run_rag; });

    auto* replay = run_cmd->add_subcommand("replay", "Re-run a manifest against its own recorded responses");
    add_options(replay, pending,
                {{"manifest", "manifest file or run directory"},
                 {"run-dir", "new run directory"},
                 {"run-id", "explicit run id"}});
    replay->callback([&] { chosen = irag_cmd_run_replay; });

    auto* evaluate = app.add_subcommand("evaluate", "Score a run");
    add_options(evaluate, pending,
                {{"manifest", "manifest file or run directory"},
                 {"out-dir", "report directory (default: the run directory)"},
                 {"top", "rows in the misclassification tables"}});
    evaluate->callback([&] { chosen = irag_cmd_evaluate; });

    auto* cost = app.add_subcommand("cost", "Price one or more runs");
    add_options(cost, pending,
                {{"run", "run directory or manifest", Spec::Repeated},
                 {"pricing", "pricing file"},
                 {"out-dir", "write cost.txt and cost.csv here"}});
    cost->callback([&] { chosen = irag_cmd_cost; });

    auto* augment = app.add_subcommand("augment", "Generate synthetic examples for confusable label groups");
    add_all(augment, pending,
            {{{"seeds", "exemplar file with seed examples"},
              {"labels", "declared label list"},
              {"groups", "group override file"},
              {"num-groups", "number of confusable groups"},
              {"seeds-per-class", "seed examples shown per class"},
              {"per-class", "examples requested per class"},
              {"out", "generated JSONL output"},
              {"rejections", "rejection report path"},
              {"groups-out", "write the groups used here"},
              {"dump-requests", "write generation prompts as JSONL"},
              {"dump-only", "stop after writing the prompts", Spec::Flag},
              {"run-dir", "directory for the usage ledger"}},
             kProviderSpecs,
             kEmbedderSpecs});
    augment->callback([&] { chosen = irag_cmd_augment; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : IRAG_USAGE;
    }
    if (!chosen) return IRAG_USAGE;
    return run(chosen, pending);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "common/decimal.hpp"

namespace intentrag {

struct UsageRecord {
    std::string run_id;
    std::size_t call_index = 0;
    std::string model_id;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool estimated = false;
    int attempts = 1;
    bool delivered = true;

    friend bool operator==(const UsageRecord&, const UsageRecord&) = default;
};

struct ModelPrice {
    Decimal input_per_1k;
    Decimal output_per_1k;
};

// Operator-supplied, dated prices. File format (JSON):
//   {"effective_date": "2023-11-01",
//    "models": {"gpt-4": {"input_per_1k": "0.03", "output_per_1k": "0.06"}}}
// Prices may be strings or JSON numbers; numbers are read through their shortest
// round-trip text, never as binary fractions.
struct PricingTable {
    std::string effective_date;
    std::map<std::string, ModelPrice> models;

    static PricingTable load(const std::filesystem::path& path);
    const ModelPrice& at(const std::string& model_id) const;
};

// prompt/1000 * input + completion/1000 * output, exact.
Decimal price_call(const UsageRecord& usage, const PricingTable& pricing);

// Append-only JSONL store of usage records, one file per run directory.
class UsageLedger {
public:
    UsageLedger() = default;
    explicit UsageLedger(std::filesystem::path file);

    void append(const UsageRecord& record);
    void append(const std::vector<UsageRecord>& records);
    std::vector<UsageRecord> records() const;
    std::vector<UsageRecord> records_for(const std::string& run_id) const;
    bool has_run(const std::string& run_id) const;

    static std::vector<UsageRecord> read_file(const std::filesystem::path& file);

private:
    std::optional<std::filesystem::path> file_;
    mutable std::mutex mutex_;
    std::vector<UsageRecord> records_;
};

std::string usage_to_json_line(const UsageRecord& record);

struct RunUsage {
    std::string run_id;
    std::string setting;  // e.g. "3-shot", "5 similar (RAG)"
    std::vector<UsageRecord> records;
    std::optional<double> micro_f1;  // joined from an evaluation, when available
};

struct CostRow {
    std::string run_id;
    std::string model_id;
    std::string setting;
    std::size_t calls_delivered = 0;
    std::size_t calls_attempted = 0;
    std::int64_t total_prompt_tokens = 0;
    std::int64_t total_completion_tokens = 0;
    Decimal total_cost;
    bool estimated = false;
    std::optional<double> micro_f1;
};

struct CostReport {
    std::string pricing_date;
    std::vector<CostRow> rows;

    Decimal total_cost() const;
    std::string to_text() const;
    std::string to_csv() const;
};

// One row per (run, model). A row mixing in estimator-derived usage is flagged.
CostReport build_report(const std::vector<RunUsage>& runs, const PricingTable& pricing);

// Convenience over an in-memory ledger; throws UnknownRun for ids it has never seen.
CostReport build_report(const UsageLedger& ledger, const std::vector<std::string>& run_ids,
                        const PricingTable& pricing);

}  // namespace intentrag

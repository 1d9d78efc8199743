#include <gtest/gtest.h>

#include "common/text.hpp"
#include "ledger.hpp"
#include "support.hpp"

using namespace intentrag;
using testsupport::TempDir;

namespace {

PricingTable gpt4_pricing() {
    PricingTable t;
    t.effective_date = "2023-11-01";
    t.models.emplace("gpt-4", ModelPrice{Decimal::parse("0.03"), Decimal::parse("0.06")});
    return t;
}

UsageRecord call(const std::string& run, std::size_t i, std::int64_t prompt, std::int64_t completion,
                 const std::string& model = "gpt-4") {
    UsageRecord r;
    r.run_id = run;
    r.call_index = i;
    r.model_id = model;
    r.prompt_tokens = prompt;
    r.completion_tokens = completion;
    return r;
}

// Nano-dollar integer arithmetic, independent of Decimal.
std::string nano_to_string(long long nano) {
    auto whole = std::to_string(nano / 1000000000LL);
    auto frac = std::to_string(1000000000LL + nano % 1000000000LL).substr(1);
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    return frac.empty() ? whole : whole + "." + frac;
}

}  // namespace

TEST(PriceCall, Arithmetic) {
    auto p = gpt4_pricing();
    EXPECT_EQ(price_call(call("r", 0, 1000, 100), p).to_string(), "0.036");
    EXPECT_EQ(price_call(call("r", 0, 0, 0), p).to_string(), "0");
    EXPECT_EQ(price_call(call("r", 0, 2000, 10), p).to_string(), "0.0606");
    EXPECT_ERRC(price_call(call("r", 0, 1, 1, "claude-2"), p), Errc::UnpricedModel);
    EXPECT_ERRC(price_call(call("r", 0, -1, 1), p), Errc::InvalidArgument);
}

TEST(PriceCall, FixtureRunTotalsExactly) {
    auto p = gpt4_pricing();
    UsageLedger ledger;
    for (std::size_t i = 0; i < 3080; ++i) ledger.append(call("gpt4-3shot", i, 2000, 10));
    auto report = build_report(ledger, {"gpt4-3shot"}, p);
    ASSERT_EQ(report.rows.size(), 1u);
    const auto& row = report.rows[0];
    EXPECT_EQ(row.calls_delivered, 3080u);
    EXPECT_EQ(row.total_cost.to_string(), "186.648");

    const long long oracle = 3080LL * (2000LL * 30000 + 10LL * 60000);
    EXPECT_EQ(row.total_cost.to_string(), nano_to_string(oracle));

    auto aggregate = price_call(call("x", 0, row.total_prompt_tokens, row.total_completion_tokens), p);
    EXPECT_EQ(aggregate, row.total_cost);
    EXPECT_EQ(row.total_cost.to_fixed(2), "186.65");
}

TEST(Report, RowsPerRunAndAdditivity) {
    auto p = gpt4_pricing();
    p.models.emplace("claude-2", ModelPrice{Decimal::parse("0.008"), Decimal::parse("0.024")});
    UsageLedger ledger;
    for (std::size_t i = 0; i < 10; ++i) ledger.append(call("a", i, 500, 5));
    for (std::size_t i = 0; i < 4; ++i) ledger.append(call("b", i, 100, 3));
    ledger.append(call("b", 4, 100, 3, "claude-2"));
    auto both = build_report(ledger, {"a", "b"}, p);
    ASSERT_EQ(both.rows.size(), 3u);
    EXPECT_EQ(both.rows[0].run_id, "a");
    EXPECT_EQ(both.rows[1].model_id, "gpt-4");
    EXPECT_EQ(both.rows[2].model_id, "claude-2");
    auto a = build_report(ledger, {"a"}, p);
    auto b = build_report(ledger, {"b"}, p);
    EXPECT_EQ(both.total_cost(), a.total_cost() + b.total_cost());
    EXPECT_ERRC(build_report(ledger, {"nope"}, p), Errc::UnknownRun);
}

TEST(Report, EmptyRunIsZero) {
    auto report = build_report(std::vector<RunUsage>{{"empty", "0-shot", {}, std::nullopt}}, gpt4_pricing());
    ASSERT_EQ(report.rows.size(), 1u);
    EXPECT_EQ(report.rows[0].calls_delivered, 0u);
    EXPECT_EQ(report.total_cost().to_string(), "0");
}

TEST(Report, EstimatedUsageIsFlaggedAndAttemptsCounted) {
    auto est = call("r", 0, 100, 1);
    est.estimated = true;
    auto retried = call("r", 1, 100, 1);
    retried.attempts = 3;
    auto lost = call("r", 2, 0, 0);
    lost.delivered = false;
    lost.attempts = 5;
    auto report = build_report(std::vector<RunUsage>{{"r", "3-shot", {est, retried, lost}, 0.845}}, gpt4_pricing());
    const auto& row = report.rows[0];
    EXPECT_TRUE(row.estimated);
    EXPECT_EQ(row.calls_delivered, 2u);
    EXPECT_EQ(row.calls_attempted, 9u);
    auto text = report.to_text();
    EXPECT_NE(text.find("estimated"), std::string::npos);
    EXPECT_NE(text.find("84.5"), std::string::npos);
    EXPECT_NE(text.find("(prices effective 2023-11-01)"), std::string::npos);
    auto csv = report.to_csv();
    EXPECT_EQ(csv.rfind("run_id,model,", 0), 0u);
    EXPECT_NE(csv.find("r,gpt-4,3-shot,84.5,2,9,200,2,"), std::string::npos) << csv;
    EXPECT_NE(csv.find(",true\n"), std::string::npos);
}

TEST(LedgerFile, AppendOnlyJsonlRoundTrip) {
    TempDir dir;
    auto path = dir / "ledger.jsonl";
    {
        UsageLedger ledger(path);
        ledger.append(call("r1", 0, 10, 1));
        ledger.append(std::vector<UsageRecord>{call("r1", 1, 20, 2), call("r2", 0, 30, 3)});
    }
    {
        UsageLedger again(path);
        again.append(call("r3", 0, 1, 1));
    }
    auto recs = UsageLedger::read_file(path);
    ASSERT_EQ(recs.size(), 4u);
    EXPECT_EQ(recs[1], call("r1", 1, 20, 2));
    EXPECT_EQ(recs[3].run_id, "r3");
    write_file(dir / "bad.jsonl", "{\"run_id\":\"x\"}\n");
    EXPECT_ERRC(UsageLedger::read_file(dir / "bad.jsonl"), Errc::MalformedRecord);
}

TEST(Pricing, LoadsStringsAndNumbersExactly) {
    TempDir dir;
    write_file(dir / "p.json", R"({"effective_date":"2023-11-01","models":{
        "gpt-4":{"input_per_1k":"0.03","output_per_1k":0.06},
        "command-nightly":{"input_per_1k":0.0015,"output_per_1k":"0.002"}}})");
    auto p = PricingTable::load(dir / "p.json");
    EXPECT_EQ(p.effective_date, "2023-11-01");
    EXPECT_EQ(p.at("gpt-4").output_per_1k.to_string(), "0.06");
    EXPECT_EQ(p.at("command-nightly").input_per_1k.to_string(), "0.0015");
    EXPECT_ERRC(p.at("gpt-5"), Errc::UnpricedModel);
    write_file(dir / "neg.json", R"({"models":{"m":{"input_per_1k":"-1","output_per_1k":"0"}}})");
    EXPECT_ERRC(PricingTable::load(dir / "neg.json"), Errc::InvalidArgument);
    write_file(dir / "none.json", R"({"prices":{}})");
    EXPECT_ERRC(PricingTable::load(dir / "none.json"), Errc::MalformedRecord);
}

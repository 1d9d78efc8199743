#include "ledger.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "common/text.hpp"

namespace intentrag {

using nlohmann::json;

namespace {

Decimal price_from_json(const json& v, const std::string& where) {
    if (v.is_string()) return Decimal::parse(v.get<std::string>());
    if (v.is_number_integer() || v.is_number_unsigned()) return Decimal::parse(v.dump());
    if (v.is_number_float()) {
        // dump() yields the shortest text that round-trips, i.e. the literal the operator wrote.
        auto text = v.dump();
        if (text.find_first_of("eE") != std::string::npos) {
            throw Error(Errc::InvalidArgument, where + ": write prices as plain decimals");
        }
        return Decimal::parse(text);
    }
    throw Error(Errc::InvalidArgument, where + ": price must be a decimal string or number");
}

std::string fmt_f1(const std::optional<double>& v) {
    if (!v) return "-";
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << (*v * 100.0);
    return ss.str();
}

}  // namespace

PricingTable PricingTable::load(const std::filesystem::path& path) {
    auto j = json::parse(intentrag::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("models") || !j["models"].is_object()) {
        throw Error(Errc::MalformedRecord, path.string() + ": pricing file needs a \"models\" object");
    }
    PricingTable table;
    table.effective_date = j.value("effective_date", "");
    for (const auto& [model, entry] : j["models"].items()) {
        if (!entry.is_object() || !entry.contains("input_per_1k") || !entry.contains("output_per_1k")) {
            throw Error(Errc::MalformedRecord, "pricing entry for " + model + " needs input_per_1k/output_per_1k");
        }
        ModelPrice price{price_from_json(entry["input_per_1k"], model),
                         price_from_json(entry["output_per_1k"], model)};
        if (price.input_per_1k.is_negative() || price.output_per_1k.is_negative()) {
            throw Error(Errc::InvalidArgument, "negative price for " + model);
        }
        table.models.emplace(model, price);
    }
    return table;
}

const ModelPrice& PricingTable::at(const std::string& model_id) const {
    auto it = models.find(model_id);
    if (it == models.end()) throw Error(Errc::UnpricedModel, model_id);
    return it->second;
}

Decimal price_call(const UsageRecord& usage, const PricingTable& pricing) {
    if (usage.prompt_tokens < 0 || usage.completion_tokens < 0) {
        throw Error(Errc::InvalidArgument, "negative token count");
    }
    const auto& price = pricing.at(usage.model_id);
    return (price.input_per_1k * usage.prompt_tokens).div_exact(1000) +
           (price.output_per_1k * usage.completion_tokens).div_exact(1000);
}

std::string usage_to_json_line(const UsageRecord& r) {
    json j = {{"run_id", r.run_id},
              {"call_index", r.call_index},
              {"model_id", r.model_id},
              {"prompt_tokens", r.prompt_tokens},
              {"completion_tokens", r.completion_tokens},
              {"estimated", r.estimated},
              {"attempts", r.attempts},
              {"delivered", r.delivered}};
    return j.dump();
}

UsageLedger::UsageLedger(std::filesystem::path file) : file_(std::move(file)) {
    if (std::filesystem::exists(*file_)) records_ = read_file(*file_);
}

void UsageLedger::append(const UsageRecord& record) { append(std::vector<UsageRecord>{record}); }

void UsageLedger::append(const std::vector<UsageRecord>& records) {
    std::lock_guard lock(mutex_);
    if (file_) {
        if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
        std::ofstream out(*file_, std::ios::app | std::ios::binary);
        if (!out) throw Error(Errc::Io, "cannot append to " + file_->string());
        for (const auto& r : records) out << usage_to_json_line(r) << '\n';
    }
    records_.insert(records_.end(), records.begin(), records.end());
}

std::vector<UsageRecord> UsageLedger::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<UsageRecord> UsageLedger::records_for(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    std::vector<UsageRecord> out;
    std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
                 [&](const auto& r) { return r.run_id == run_id; });
    return out;
}

bool UsageLedger::has_run(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    return std::any_of(records_.begin(), records_.end(),
                       [&](const auto& r) { return r.run_id == run_id; });
}

std::vector<UsageRecord> UsageLedger::read_file(const std::filesystem::path& file) {
    std::vector<UsageRecord> out;
    std::size_t line_no = 0;
    for (const auto& line : split_lines(intentrag::read_file(file))) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(Errc::MalformedRecord, file.string() + " line " + std::to_string(line_no));
        }
        UsageRecord r;
        try {
            r.run_id = j.at("run_id").get<std::string>();
            r.call_index = j.at("call_index").get<std::size_t>();
            r.model_id = j.at("model_id").get<std::string>();
            r.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
            r.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
            r.estimated = j.value("estimated", false);
            r.attempts = j.value("attempts", 1);
            r.delivered = j.value("delivered", true);
        } catch (const json::exception& e) {
            throw Error(Errc::MalformedRecord,
                        file.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

Decimal CostReport::total_cost() const {
    Decimal sum;
    for (const auto& r : rows) sum += r.total_cost;
    return sum;
}

std::string CostReport::to_text() const {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"model", "setting", "micro-F1", "calls", "attempts", "prompt_tok", "compl_tok",
                     "cost_usd", "flags"});
    for (const auto& r : rows) {
        cells.push_back({r.model_id, r.setting, fmt_f1(r.micro_f1), std::to_string(r.calls_delivered),
                         std::to_string(r.calls_attempted), std::to_string(r.total_prompt_tokens),
                         std::to_string(r.total_completion_tokens), r.total_cost.to_fixed(2),
                         r.estimated ? "estimated" : ""});
    }
    std::vector<std::size_t> widths(cells.front().size(), 0);
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
    }
    std::string out;
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) line += "  ";
            line += row[i];
            if (i + 1 < row.size()) line.append(widths[i] - row[i].size(), ' ');
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    out += "total_cost_usd " + total_cost().to_string();
    if (!pricing_date.empty()) out += " (prices effective " + pricing_date + ")";
    out += "\n";
    return out;
}

std::string CostReport::to_csv() const {
    std::string out =
        "run_id,model,setting,micro_f1,calls_delivered,calls_attempted,prompt_tokens,"
        "completion_tokens,cost_usd,estimated\n";
    for (const auto& r : rows) {
        out += csv_escape(r.run_id) + "," + csv_escape(r.model_id) + "," + csv_escape(r.setting) + "," +
               (r.micro_f1 ? fmt_f1(r.micro_f1) : "") + "," + std::to_string(r.calls_delivered) + "," +
               std::to_string(r.calls_attempted) + "," + std::to_string(r.total_prompt_tokens) + "," +
               std::to_string(r.total_completion_tokens) + "," + r.total_cost.to_string() + "," +
               (r.estimated ? "true" : "false") + "\n";
    }
    return out;
}

CostReport build_report(const std::vector<RunUsage>& runs, const PricingTable& pricing) {
    CostReport report;
    report.pricing_date = pricing.effective_date;
    for (const auto& run : runs) {
        std::vector<std::string> models;
        for (const auto& r : run.records) {
            if (std::find(models.begin(), models.end(), r.model_id) == models.end()) {
                models.push_back(r.model_id);
            }
        }
        if (models.empty()) {
            CostRow row;
            row.run_id = run.run_id;
            row.model_id = "-";
            row.setting = run.setting;
            row.micro_f1 = run.micro_f1;
            report.rows.push_back(std::move(row));
            continue;
        }
        for (const auto& model : models) {
            CostRow row;
            row.run_id = run.run_id;
            row.model_id = model;
            row.setting = run.setting;
            row.micro_f1 = run.micro_f1;
            for (const auto& r : run.records) {
                if (r.model_id != model) continue;
                row.calls_attempted += static_cast<std::size_t>(std::max(r.attempts, 0));
                if (r.delivered) ++row.calls_delivered;
                row.total_prompt_tokens += r.prompt_tokens;
                row.total_completion_tokens += r.completion_tokens;
                row.total_cost += price_call(r, pricing);
                row.estimated = row.estimated || r.estimated;
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

CostReport build_report(const UsageLedger& ledger, const std::vector<std::string>& run_ids,
                        const PricingTable& pricing) {
    std::vector<RunUsage> runs;
    for (const auto& id : run_ids) {
        if (!ledger.has_run(id)) throw Error(Errc::UnknownRun, id);
        runs.push_back({id, id, ledger.records_for(id), std::nullopt});
    }
    return build_report(runs, pricing);
}

}  // namespace intentrag

#include "corpus.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "common/text.hpp"

namespace intentrag {

using nlohmann::json;

std::string_view origin_name(Origin origin) noexcept {
    switch (origin) {
        case Origin::Original: return "original";
        case Origin::Curated: return "curated";
        case Origin::Generated: return "generated";
    }
    return "original";
}

Origin origin_from_name(std::string_view name) {
    auto n = canonicalize(name);
    if (n == "original") return Origin::Original;
    if (n == "curated") return Origin::Curated;
    if (n == "generated") return Origin::Generated;
    throw Error(Errc::MalformedRecord, "unknown origin '" + std::string(name) + "'");
}

DataFormat format_from_path(const std::filesystem::path& path) {
    auto ext = to_lower_ascii(path.extension().string());
    if (ext == ".csv") return DataFormat::Csv;
    if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return DataFormat::Jsonl;
    throw Error(Errc::InvalidArgument, "cannot infer dataset format from '" + path.string() + "'");
}

namespace {

struct RawRecord {
    std::size_t number;  // 1-based
    std::string text;
    std::string label;
    std::optional<std::string> origin;
    std::optional<long long> rank;
};

Error record_error(Errc code, std::size_t number, const std::string& what) {
    return Error(code, "record #" + std::to_string(number) + ": " + what);
}

std::vector<RawRecord> read_csv_records(const std::filesystem::path& path) {
    auto rows = parse_csv(read_file(path));
    std::vector<RawRecord> out;
    if (rows.empty()) return out;

    const auto& header = rows.front();
    std::optional<std::size_t> text_col, label_col, origin_col, rank_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto h = to_lower_ascii(trim(header[i]));
        if (h == "text") text_col = i;
        else if (h == "label" || h == "category") label_col = i;
        else if (h == "origin") origin_col = i;
        else if (h == "rank") rank_col = i;
    }
    if (!text_col || !label_col) {
        throw Error(Errc::MalformedRecord, path.string() + ": CSV header must contain text,label");
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw record_error(Errc::MalformedRecord, r,
                               "expected " + std::to_string(header.size()) + " fields, got " +
                                   std::to_string(row.size()));
        }
        RawRecord rec{r, row[*text_col], row[*label_col], std::nullopt, std::nullopt};
        if (origin_col) rec.origin = row[*origin_col];
        if (rank_col) {
            try {
                rec.rank = std::stoll(row[*rank_col]);
            } catch (const std::exception&) {
                throw record_error(Errc::MalformedRecord, r, "rank is not an integer");
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<RawRecord> read_jsonl_records(const std::filesystem::path& path) {
    std::vector<RawRecord> out;
    std::size_t number = 0;
    for (const auto& line : split_lines(read_file(path))) {
        if (trim(line).empty()) continue;
        ++number;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw record_error(Errc::MalformedRecord, number, "not a JSON object");
        }
        auto text = j.find("text");
        auto label = j.find("label");
        if (text == j.end() || !text->is_string() || label == j.end() || !label->is_string()) {
            throw record_error(Errc::MalformedRecord, number, "missing string fields text/label");
        }
        RawRecord rec{number, text->get<std::string>(), label->get<std::string>(), std::nullopt,
                      std::nullopt};
        if (auto o = j.find("origin"); o != j.end() && o->is_string()) {
            rec.origin = o->get<std::string>();
        }
        if (auto r = j.find("rank"); r != j.end()) {
            if (!r->is_number_integer()) {
                throw record_error(Errc::MalformedRecord, number, "rank is not an integer");
            }
            rec.rank = r->get<long long>();
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<RawRecord> read_records(const std::filesystem::path& path, DataFormat format) {
    return format == DataFormat::Csv ? read_csv_records(path) : read_jsonl_records(path);
}

LabeledUtterance resolve(const RawRecord& rec, const LabelSet& labels, Origin default_origin) {
    if (trim(rec.text).empty()) {
        throw record_error(Errc::EmptyText, rec.number, "text is empty");
    }
    auto index = labels.find(rec.label);
    if (!index) {
        throw record_error(Errc::UnknownLabel, rec.number, "label '" + rec.label + "' is not declared");
    }
    Origin origin = rec.origin ? origin_from_name(*rec.origin) : default_origin;
    return LabeledUtterance{std::string(trim(rec.text)), *index, origin};
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::vector<std::vector<std::size_t>> indices_by_class(const LabelSet& labels,
                                                       const std::vector<LabeledUtterance>& items) {
    std::vector<std::vector<std::size_t>> by_class(labels.size());
    for (std::size_t i = 0; i < items.size(); ++i) by_class.at(items[i].label).push_back(i);
    return by_class;
}

Error shortage(Errc code, const LabelSet& labels, std::size_t c, std::size_t have, std::size_t need) {
    return Error(code, "class '" + labels.name(c) + "' has " + std::to_string(have) + ", needs " +
                           std::to_string(need));
}

}  // namespace

LabelSet infer_label_set(const std::filesystem::path& path, DataFormat format) {
    std::set<std::string> names;
    for (const auto& rec : read_records(path, format)) {
        auto c = canonicalize(rec.label);
        if (c.empty()) throw record_error(Errc::UnknownLabel, rec.number, "label is empty");
        names.insert(c);
    }
    return LabelSet(std::vector<std::string>(names.begin(), names.end()));
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const std::optional<LabelSet>& declared, Split split) {
    auto records = read_records(path, format);
    Dataset ds;
    ds.split = split;
    if (declared) {
        ds.labels = *declared;
    } else {
        std::set<std::string> names;
        for (const auto& rec : records) names.insert(canonicalize(rec.label));
        names.erase("");
        ds.labels = LabelSet(std::vector<std::string>(names.begin(), names.end()));
    }
    ds.items.reserve(records.size());
    for (const auto& rec : records) ds.items.push_back(resolve(rec, ds.labels, Origin::Original));
    return ds;
}

std::vector<std::string> read_texts(const std::filesystem::path& path) {
    std::vector<std::string> out;
    for (auto& rec : read_records(path, format_from_path(path))) {
        if (trim(rec.text).empty()) throw record_error(Errc::EmptyText, rec.number, "text is empty");
        out.emplace_back(trim(rec.text));
    }
    return out;
}

void save_dataset_jsonl(const std::filesystem::path& path, const LabelSet& labels,
                        const std::vector<LabeledUtterance>& items) {
    std::string out;
    for (const auto& u : items) {
        json j = {{"text", u.text}, {"label", labels.name(u.label)}};
        if (u.origin != Origin::Original) j["origin"] = origin_name(u.origin);
        out += j.dump() + "\n";
    }
    write_file(path, out);
}

std::vector<std::size_t> ExemplarSet::count_per_class() const {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& e : exemplars) ++counts.at(e.label);
    return counts;
}

std::size_t SeededShuffler::below(std::size_t bound) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t b = bound;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % b);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % b);
}

ExemplarSet sample_few_shot(const Dataset& dataset, const SamplingPlan& plan) {
    ExemplarSet out{dataset.labels, {}};
    const std::size_t n = plan.n_per_class;
    if (n == 0) return out;
    out.exemplars.reserve(n * dataset.labels.size());

    if (const auto* random = std::get_if<RandomSeeded>(&plan.strategy)) {
        auto by_class = indices_by_class(dataset.labels, dataset.items);
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            auto& idx = by_class[c];
            if (idx.size() < n) throw shortage(Errc::ClassShortage, dataset.labels, c, idx.size(), n);
            // Each class draws from its own stream so one class's size never shifts another's sample.
            SeededShuffler shuffler(splitmix64(random->seed ^ splitmix64(c)));
            shuffler.shuffle(idx);
            for (std::size_t i = 0; i < n; ++i) {
                auto item = dataset.items[idx[i]];
                item.origin = Origin::Original;
                out.exemplars.push_back(std::move(item));
            }
        }
        return out;
    }

    if (const auto* curated = std::get_if<CuratedFile>(&plan.strategy)) {
        auto records = read_records(curated->path, format_from_path(curated->path));
        std::vector<std::vector<std::pair<long long, LabeledUtterance>>> by_class(dataset.labels.size());
        for (const auto& rec : records) {
            auto u = resolve(rec, dataset.labels, Origin::Curated);
            u.origin = Origin::Curated;
            by_class[u.label].emplace_back(rec.rank.value_or(0), std::move(u));
        }
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            auto& entries = by_class[c];
            if (entries.empty()) {
                throw Error(Errc::CuratedFileMissingClass,
                            "curated file has no entries for '" + dataset.labels.name(c) + "'");
            }
            if (entries.size() < n) throw shortage(Errc::ClassShortage, dataset.labels, c, entries.size(), n);
            std::stable_sort(entries.begin(), entries.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (std::size_t i = 0; i < n; ++i) out.exemplars.push_back(entries[i].second);
        }
        return out;
    }

    throw Error(Errc::InvalidArgument,
                "mixed plans combine two exemplar sets; use mix_augmented");
}

ExemplarSet mix_augmented(const ExemplarSet& original, const ExemplarSet& generated,
                          const Mixed& mix) {
    if (!(original.labels == generated.labels)) {
        throw Error(Errc::InvalidArgument, "original and generated sets use different label sets");
    }
    const auto& labels = original.labels;
    auto orig_idx = indices_by_class(labels, original.exemplars);
    auto gen_idx = indices_by_class(labels, generated.exemplars);

    ExemplarSet out{labels, {}};
    out.exemplars.reserve((mix.original_per_class + mix.generated_per_class) * labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) {
        if (orig_idx[c].size() < mix.original_per_class) {
            throw shortage(Errc::ClassShortage, labels, c, orig_idx[c].size(), mix.original_per_class);
        }
        if (gen_idx[c].size() < mix.generated_per_class) {
            throw shortage(Errc::GeneratedShortage, labels, c, gen_idx[c].size(),
                           mix.generated_per_class);
        }
        for (std::size_t i = 0; i < mix.original_per_class; ++i) {
            out.exemplars.push_back(original.exemplars[orig_idx[c][i]]);
        }
        for (std::size_t i = 0; i < mix.generated_per_class; ++i) {
            out.exemplars.push_back(generated.exemplars[gen_idx[c][i]]);
        }
    }
    return out;
}

ExemplarSet group_by_class(const LabelSet& labels, std::vector<LabeledUtterance> items) {
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.label < b.label; });
    for (const auto& u : items) {
        if (u.label >= labels.size()) throw Error(Errc::UnknownLabel, "label index out of range");
    }
    return ExemplarSet{labels, std::move(items)};
}

void save_exemplars(const std::filesystem::path& path, const ExemplarSet& set) {
    std::string out;
    for (std::size_t i = 0; i < set.exemplars.size(); ++i) {
        const auto& u = set.exemplars[i];
        json j = {{"id", i},
                  {"text", u.text},
                  {"label", set.labels.name(u.label)},
                  {"origin", origin_name(u.origin)}};
        out += j.dump() + "\n";
    }
    write_file(path, out);
}

ExemplarSet load_exemplars(const std::filesystem::path& path, const LabelSet& labels) {
    ExemplarSet set{labels, {}};
    for (const auto& rec : read_jsonl_records(path)) {
        set.exemplars.push_back(resolve(rec, labels, Origin::Original));
    }
    return set;
}

}  // namespace intentrag

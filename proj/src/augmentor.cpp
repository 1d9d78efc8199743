#include "augmentor.hpp"

#include <algorithm>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "common/text.hpp"
#include "retriever.hpp"

namespace intentrag {

using nlohmann::json;
using nlohmann::ordered_json;

void validate_partition(const std::vector<LabelGroup>& groups, std::size_t label_count) {
    std::vector<int> seen(label_count, 0);
    for (const auto& g : groups) {
        if (g.member_labels.empty()) throw Error(Errc::InvalidPartition, "empty group");
        for (auto l : g.member_labels) {
            if (l >= label_count) throw Error(Errc::InvalidPartition, "label index out of range");
            if (seen[l]++) throw Error(Errc::InvalidPartition, "label " + std::to_string(l) + " in two groups");
        }
    }
    for (std::size_t l = 0; l < label_count; ++l) {
        if (!seen[l]) throw Error(Errc::InvalidPartition, "label " + std::to_string(l) + " in no group");
    }
}

namespace {

void number_groups(std::vector<LabelGroup>& groups) {
    for (auto& g : groups) std::sort(g.member_labels.begin(), g.member_labels.end());
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) { return a.member_labels.front() < b.member_labels.front(); });
    for (std::size_t i = 0; i < groups.size(); ++i) groups[i].group_id = i;
}

}  // namespace

std::vector<LabelGroup> load_group_override(const std::filesystem::path& path, const LabelSet& labels) {
    auto j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw Error(Errc::InvalidPartition, path.string() + " is not a JSON array of arrays");
    }
    std::vector<LabelGroup> groups;
    for (const auto& arr : j) {
        if (!arr.is_array()) throw Error(Errc::InvalidPartition, "group entries must be arrays");
        LabelGroup g;
        for (const auto& name : arr) {
            if (!name.is_string()) throw Error(Errc::InvalidPartition, "label names must be strings");
            auto idx = labels.find(name.get<std::string>());
            if (!idx) throw Error(Errc::InvalidPartition, "unknown label '" + name.get<std::string>() + "'");
            g.member_labels.push_back(*idx);
        }
        if (g.member_labels.empty()) throw Error(Errc::InvalidPartition, "empty group");
        groups.push_back(std::move(g));
    }
    validate_partition(groups, labels.size());
    number_groups(groups);
    return groups;
}

void save_groups(const std::filesystem::path& path, const std::vector<LabelGroup>& groups,
                 const LabelSet& labels) {
    json j = json::array();
    for (const auto& g : groups) {
        json arr = json::array();
        for (auto l : g.member_labels) arr.push_back(labels.name(l));
        j.push_back(std::move(arr));
    }
    write_file(path, j.dump(2) + "\n");
}

std::vector<LabelGroup> build_groups(const ExemplarSet& exemplars,
                                     std::span<const EmbeddingVector> vectors, std::size_t g,
                                     const std::optional<std::filesystem::path>& override_file) {
    const auto& labels = exemplars.labels;
    if (override_file) return load_group_override(*override_file, labels);
    if (g < 1 || g > labels.size()) {
        throw Error(Errc::InvalidArgument,
                    "group count " + std::to_string(g) + " outside [1, " + std::to_string(labels.size()) + "]");
    }

    auto model = CentroidModel::fit(exemplars, vectors);
    const std::size_t dim = model.dim();

    struct Cluster {
        std::vector<std::size_t> members;
        EmbeddingVector centroid;
    };
    std::vector<Cluster> clusters;
    clusters.reserve(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) clusters.push_back({{c}, model.centroid(c)});

    while (clusters.size() > g) {
        std::size_t bi = 0, bj = 1;
        double best = -2.0;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                double s = dot(clusters[i].centroid.values(), clusters[j].centroid.values());
                if (s > best) {
                    best = s;
                    bi = i;
                    bj = j;
                }
            }
        }
        auto& into = clusters[bi];
        into.members.insert(into.members.end(), clusters[bj].members.begin(), clusters[bj].members.end());
        std::sort(into.members.begin(), into.members.end());
        std::vector<double> sum(dim, 0.0);
        for (auto m : into.members) {
            auto v = model.centroid(m).values();
            for (std::size_t d = 0; d < dim; ++d) sum[d] += v[d];
        }
        std::vector<float> mean(dim);
        for (std::size_t d = 0; d < dim; ++d) mean[d] = static_cast<float>(sum[d] / into.members.size());
        try {
            into.centroid = EmbeddingVector::normalized(mean);
        } catch (const Error& e) {
            if (e.code() != Errc::ZeroVector) throw;
            throw Error(Errc::ZeroCentroid, "merged group centroid cancels out");
        }
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    std::vector<LabelGroup> groups;
    for (auto& c : clusters) groups.push_back({0, std::move(c.members)});
    number_groups(groups);
    return groups;
}

std::vector<GenerationRequest> make_generation_requests(const std::vector<LabelGroup>& groups,
                                                        const ExemplarSet& seeds,
                                                        std::size_t seeds_per_class,
                                                        std::size_t n_generate_per_class) {
    std::vector<std::vector<std::string>> by_class(seeds.labels.size());
    for (const auto& e : seeds.exemplars) {
        if (by_class[e.label].size() < seeds_per_class) by_class[e.label].push_back(e.text);
    }
    std::vector<GenerationRequest> out;
    for (const auto& g : groups) {
        GenerationRequest req{g, {}, n_generate_per_class};
        for (auto l : g.member_labels) {
            if (by_class.at(l).size() < seeds_per_class) {
                throw Error(Errc::ClassShortage, "class '" + seeds.labels.name(l) + "' has " +
                                                     std::to_string(by_class[l].size()) + " seeds, needs " +
                                                     std::to_string(seeds_per_class));
            }
            req.seed_exemplars.push_back(by_class[l]);
        }
        out.push_back(std::move(req));
    }
    return out;
}

PromptBundle render_generation_prompt(const GenerationRequest& request, const LabelSet& labels) {
    const auto& members = request.group.member_labels;
    const bool single = members.size() == 1;

    std::string system =
        "You are a data generation assistant. You write realistic customer questions for a banking "
        "customer-service intent classifier.";

    std::string user = single ? "Here is an intent class with example customer questions:\n"
                              : "The following intent classes are easily confused with each other:\n";
    for (std::size_t i = 0; i < members.size(); ++i) {
        user += "\nClass: " + labels.name(members[i]) + "\nExamples:\n";
        for (const auto& s : request.seed_exemplars.at(i)) user += "- " + s + "\n";
    }
    const auto n = std::to_string(request.n_generate_per_class);
    user += "\nGenerate " + n + " new customer questions for " +
            (single ? std::string("this class") : "each class above") + " (" +
            std::to_string(request.demanded_lines()) + " lines in total).";
    if (!single) {
        user += " Pay close attention to what distinguishes these confusable classes: every question "
                "must clearly belong to its own class and not to any other class listed here.";
    }
    user += " Do not repeat the examples.\n\n"
            "Output one example per line as <class name><TAB><question>, using the class names "
            "exactly as written above, with no numbering and no other text.";

    PromptBundle bundle;
    bundle.placement = Placement::SystemContext;
    bundle.messages = {{Role::System, system}, {Role::User, user}};
    bundle.estimated_tokens = estimate_tokens(bundle);
    return bundle;
}

std::vector<GeneratedCandidate> parse_generation_output(std::string_view raw, std::size_t group_id,
                                                        std::vector<Rejection>* malformed) {
    std::vector<GeneratedCandidate> out;
    for (const auto& line : split_lines(raw)) {
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            if (malformed) malformed->push_back({"", line, group_id, "malformed"});
            continue;
        }
        out.push_back({std::string(trim(line.substr(0, tab))), std::string(trim(line.substr(tab + 1))),
                       group_id});
    }
    return out;
}

FilterResult filter_generated(std::span<const GeneratedCandidate> candidates, const ExemplarSet& existing,
                              const LabelSet& labels, std::optional<std::size_t> max_per_class) {
    FilterResult r;
    r.survivors.labels = labels;
    r.per_class.assign(labels.size(), 0);

    std::unordered_set<std::string> seen_existing;
    for (const auto& e : existing.exemplars) seen_existing.insert(normalize_for_dedup(e.text));
    std::unordered_set<std::string> seen_candidates;

    for (const auto& c : candidates) {
        auto reject = [&](const char* reason) { r.rejections.push_back({c.label_text, c.text, c.group_id, reason}); };
        auto label = labels.find(c.label_text);
        if (!label) {
            reject("unknown_label");
            continue;
        }
        auto key = normalize_for_dedup(c.text);
        if (key.empty()) {
            reject("empty_text");
            continue;
        }
        if (seen_existing.count(key)) {
            reject("duplicate_existing");
            continue;
        }
        if (!seen_candidates.insert(key).second) {
            reject("duplicate_candidate");
            continue;
        }
        if (max_per_class && r.per_class[*label] >= *max_per_class) {
            reject("over_quota");
            continue;
        }
        ++r.per_class[*label];
        r.survivors.exemplars.push_back({std::string(trim(c.text)), *label, Origin::Generated});
        r.survivor_groups.push_back(c.group_id);
    }
    return r;
}

void save_generated(const std::filesystem::path& path, const FilterResult& result) {
    std::string out;
    const auto& labels = result.survivors.labels;
    for (std::size_t i = 0; i < result.survivors.exemplars.size(); ++i) {
        const auto& u = result.survivors.exemplars[i];
        ordered_json j = {{"text", u.text},
                          {"label", labels.name(u.label)},
                          {"origin", "generated"},
                          {"group_id", result.survivor_groups.at(i)}};
        out += j.dump() + "\n";
    }
    write_file(path, out);
}

std::string rejection_report_json(const FilterResult& result, std::size_t demanded_lines,
                                  std::size_t candidate_lines) {
    const auto& labels = result.survivors.labels;
    ordered_json j;
    j["demanded_lines"] = demanded_lines;
    j["candidate_lines"] = candidate_lines;
    j["survivors"] = result.survivors.exemplars.size();
    j["rejected"] = result.rejections.size();
    ordered_json reasons = ordered_json::object();
    for (const auto& rej : result.rejections) {
        reasons[rej.reason] = reasons.value(rej.reason, 0) + 1;
    }
    j["rejections_by_reason"] = reasons;
    ordered_json per = ordered_json::object();
    for (std::size_t c = 0; c < labels.size(); ++c) per[labels.name(c)] = result.per_class[c];
    j["survivors_per_class"] = per;
    auto& list = j["rejections"] = ordered_json::array();
    for (const auto& rej : result.rejections) {
        list.push_back({{"group_id", rej.group_id},
                        {"label", rej.label_text},
                        {"text", rej.text},
                        {"reason", rej.reason}});
    }
    return j.dump(2) + "\n";
}

}  // namespace intentrag

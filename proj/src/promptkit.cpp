#include "promptkit.hpp"

#include <cmath>

#include "common/digest.hpp"
#include "common/error.hpp"
#include "common/text.hpp"

namespace intentrag {

namespace {

constexpr std::string_view kClassesMarker = "{{classes}}";
constexpr std::string_view kExamplesMarker = "{{examples}}";
constexpr std::string_view kQueryMarker = "{{query}}";
constexpr std::string_view kUserDelimiter = "=== user ===";

constexpr std::string_view kBuiltinSystem =
    "You are an expert assistant in the field of customer service. Your task is to help "
    "workers in the customer service department of a company. Your task is to classify the "
    "customer's question in order to help the customer service worker to answer the "
    "question.\n"
    "\n"
    "In order to help the worker, you MUST respond with the number and the name of one of the "
    "following classes you know. If you cannot answer the question, respond: \"-1 Unknown\".\n"
    "\n"
    "In case you reply with something else, you will be penalized.\n"
    "\n"
    "The classes are:\n"
    "{{classes}}{{examples}}";

constexpr std::string_view kExamplesHeader =
    "\n\nHere are some examples of questions and their classes:\n";

std::string replace_all(std::string s, std::string_view marker, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = s.find(marker, pos)) != std::string::npos) {
        s.replace(pos, marker.size(), value);
        pos += value.size();
    }
    return s;
}

// Example lines are one per line, so embedded line breaks become spaces.
std::string single_line(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

std::string fill(const std::string& part, std::string_view classes, std::string_view examples,
                 std::string_view query) {
    auto s = replace_all(part, kClassesMarker, classes);
    s = replace_all(std::move(s), kExamplesMarker, examples);
    return replace_all(std::move(s), kQueryMarker, query);
}

}  // namespace

std::string_view role_name(Role role) noexcept {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string_view placement_name(Placement placement) noexcept {
    return placement == Placement::SystemContext ? "system" : "history";
}

Placement placement_from_name(std::string_view name) {
    auto n = canonicalize(name);
    if (n == "system" || n == "system_context") return Placement::SystemContext;
    if (n == "history" || n == "chat_history") return Placement::ChatHistory;
    throw Error(Errc::InvalidArgument, "unknown placement '" + std::string(name) + "'");
}

const ChatMessage& PromptBundle::final_user_message() const {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == Role::User) return *it;
    }
    throw Error(Errc::EmptyQuery, "bundle has no user message");
}

std::size_t estimate_tokens(std::string_view text, const TokenEstimator& estimator) {
    if (!(estimator.chars_per_token > 0.0)) {
        throw Error(Errc::InvalidArgument, "chars_per_token must be positive");
    }
    return static_cast<std::size_t>(
        std::ceil(static_cast<double>(utf8_length(text)) / estimator.chars_per_token));
}

std::size_t estimate_tokens(const PromptBundle& bundle, const TokenEstimator& estimator) {
    std::size_t chars = 0;
    for (const auto& m : bundle.messages) chars += utf8_length(m.content);
    if (!(estimator.chars_per_token > 0.0)) {
        throw Error(Errc::InvalidArgument, "chars_per_token must be positive");
    }
    return static_cast<std::size_t>(std::ceil(static_cast<double>(chars) / estimator.chars_per_token));
}

PromptTemplate PromptTemplate::builtin() {
    return PromptTemplate{"builtin-v1", std::string(kBuiltinSystem), std::string(kQueryMarker)};
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
    auto text = read_file(path);
    PromptTemplate t;
    t.version = "file:" + path.filename().string();
    std::string delim = "\n" + std::string(kUserDelimiter) + "\n";
    if (auto pos = text.find(delim); pos != std::string::npos) {
        t.system = text.substr(0, pos);
        t.user = text.substr(pos + delim.size());
        while (!t.user.empty() && (t.user.back() == '\n' || t.user.back() == '\r')) t.user.pop_back();
    } else {
        t.system = text;
        while (!t.system.empty() && (t.system.back() == '\n' || t.system.back() == '\r')) {
            t.system.pop_back();
        }
        t.user = std::string(kQueryMarker);
    }
    if (t.system.find(kClassesMarker) == std::string::npos) {
        throw Error(Errc::InvalidArgument, "template " + path.string() + " lacks {{classes}}");
    }
    if (t.user.find(kQueryMarker) == std::string::npos &&
        t.system.find(kQueryMarker) == std::string::npos) {
        throw Error(Errc::InvalidArgument, "template " + path.string() + " lacks {{query}}");
    }
    return t;
}

std::string PromptTemplate::hash() const {
    return sha256_hex(system + "\n" + std::string(kUserDelimiter) + "\n" + user);
}

std::vector<PromptExample> examples_from_set(const ExemplarSet& set) {
    std::vector<PromptExample> out;
    out.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        out.push_back({i, set.exemplars[i].text, set.exemplars[i].label});
    }
    return out;
}

ExemplarOrder exemplar_order_from_name(std::string_view name) {
    auto n = canonicalize(name);
    if (n == "ascending" || n == "asc") return ExemplarOrder::AscendingSimilarity;
    if (n == "descending" || n == "desc") return ExemplarOrder::DescendingSimilarity;
    throw Error(Errc::InvalidArgument, "unknown exemplar order '" + std::string(name) + "'");
}

std::vector<PromptExample> examples_from_hits(const ExemplarSet& set,
                                              std::span<const RetrievalHit> hits,
                                              ExemplarOrder order) {
    std::vector<PromptExample> out;
    out.reserve(hits.size());
    auto push = [&](const RetrievalHit& h) {
        const auto& u = set.exemplars.at(h.exemplar_id);
        out.push_back({h.exemplar_id, u.text, u.label});
    };
    // Hits arrive best-first.
    if (order == ExemplarOrder::DescendingSimilarity) {
        for (const auto& h : hits) push(h);
    } else {
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) push(*it);
    }
    return out;
}

PromptBundle render_classification_prompt(const LabelSet& labels,
                                          std::span<const PromptExample> examples,
                                          std::string_view query, Placement placement,
                                          const PromptTemplate& tmpl,
                                          const TokenEstimator& estimator) {
    if (labels.empty()) throw Error(Errc::EmptyLabelSet, "no labels to list");
    if (trim(query).empty()) throw Error(Errc::EmptyQuery, "query is empty");

    std::string classes;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) classes += '\n';
        classes += format_answer(labels, i);
    }

    std::string examples_block;
    if (placement == Placement::SystemContext && !examples.empty()) {
        examples_block = kExamplesHeader;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            if (i > 0) examples_block += '\n';
            examples_block += single_line(examples[i].text) + " " + labels.name(examples[i].label);
        }
    }

    PromptBundle bundle;
    bundle.placement = placement;
    bundle.messages.push_back({Role::System, fill(tmpl.system, classes, examples_block, query)});
    if (placement == Placement::ChatHistory) {
        for (const auto& ex : examples) {
            bundle.messages.push_back({Role::User, single_line(ex.text)});
            bundle.messages.push_back({Role::Assistant, format_answer(labels, ex.label)});
        }
    }
    bundle.messages.push_back({Role::User, fill(tmpl.user, classes, examples_block, query)});
    for (const auto& ex : examples) bundle.exemplar_ids_used.push_back(ex.id);
    bundle.estimated_tokens = estimate_tokens(bundle, estimator);
    return bundle;
}

}  // namespace intentrag

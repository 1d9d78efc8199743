#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "labelspace.hpp"
#include "retriever.hpp"

namespace intentrag {

enum class Role { System, User, Assistant };
enum class Placement { SystemContext, ChatHistory };

std::string_view role_name(Role role) noexcept;
std::string_view placement_name(Placement placement) noexcept;
Placement placement_from_name(std::string_view name);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct PromptBundle {
    std::vector<ChatMessage> messages;
    std::size_t estimated_tokens = 0;
    Placement placement = Placement::SystemContext;
    std::vector<std::size_t> exemplar_ids_used;

    const ChatMessage& final_user_message() const;
    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

struct TokenEstimator {
    double chars_per_token = 4.0;
};

// ceil(code points / ratio) summed over message contents.
std::size_t estimate_tokens(const PromptBundle& bundle, const TokenEstimator& estimator = {});
std::size_t estimate_tokens(std::string_view text, const TokenEstimator& estimator = {});

// System and user halves with {{classes}}, {{examples}} and {{query}} markers. In a
// template file, a line reading "=== user ===" starts the user half; without it the
// user message is just the query.
struct PromptTemplate {
    std::string version;
    std::string system;
    std::string user;

    static PromptTemplate builtin();
    static PromptTemplate from_file(const std::filesystem::path& path);
    std::string hash() const;
};

struct PromptExample {
    std::size_t id = 0;
    std::string text;
    std::size_t label = 0;
};

// Every exemplar, in set order (grouped by class for sampled sets).
std::vector<PromptExample> examples_from_set(const ExemplarSet& set);

enum class ExemplarOrder { AscendingSimilarity, DescendingSimilarity };
ExemplarOrder exemplar_order_from_name(std::string_view name);

// Retrieved exemplars arranged for the prompt. Ascending puts the best match next to the query.
std::vector<PromptExample> examples_from_hits(const ExemplarSet& set,
                                              std::span<const RetrievalHit> hits,
                                              ExemplarOrder order = ExemplarOrder::AscendingSimilarity);

PromptBundle render_classification_prompt(const LabelSet& labels,
                                          std::span<const PromptExample> examples,
                                          std::string_view query, Placement placement,
                                          const PromptTemplate& tmpl = PromptTemplate::builtin(),
                                          const TokenEstimator& estimator = {});

}  // namespace intentrag

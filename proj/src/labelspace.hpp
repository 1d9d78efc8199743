#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace intentrag {

// Trim, lowercase, turn runs of whitespace/hyphens/underscores into a single
// underscore and strip punctuation from both ends. "Top-Up  Failed" -> "top_up_failed".
std::string canonicalize(std::string_view label_text);

// Ordered, dense, zero-based label space. Names are stored canonicalized.
class LabelSet {
public:
    LabelSet() = default;
    // Throws InvalidArgument on duplicate or empty canonical names.
    explicit LabelSet(const std::vector<std::string>& names);

    // One label per line, or a JSON array of strings.
    static LabelSet load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const noexcept { return names_.size(); }
    bool empty() const noexcept { return names_.empty(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    // Resolves raw label text through canonicalization.
    std::optional<std::size_t> find(std::string_view label_text) const;

    friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.names_ == b.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class ParseRule { IndexMatch, UnknownMarker, ExactName, UniqueSubstring, Fallback };

std::string_view parse_rule_name(ParseRule rule) noexcept;
std::optional<ParseRule> parse_rule_from_name(std::string_view name) noexcept;

struct Prediction {
    std::optional<std::size_t> label;  // nullopt = Unknown
    std::string raw_text;
    ParseRule rule = ParseRule::Fallback;
    // Leading number and trailing name disagree; the number was used.
    bool name_disagreement = false;

    bool is_unknown() const noexcept { return !label.has_value(); }
};

// Total: every string maps to a label or Unknown.
Prediction parse_prediction(std::string_view raw, const LabelSet& labels);

// "<index> <canonical_name>", the answer format the classification prompt asks for.
std::string format_answer(const LabelSet& labels, std::size_t index);

}  // namespace intentrag

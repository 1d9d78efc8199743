#include "labelspace.hpp"

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "common/text.hpp"

namespace intentrag {

namespace {

bool is_separator(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == '-' ||
           c == '_';
}

bool is_ascii_punct(char c) noexcept {
    auto u = static_cast<unsigned char>(c);
    return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
           (u >= 123 && u <= 126);
}

bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }

}  // namespace

std::string canonicalize(std::string_view label_text) {
    std::string lowered = to_lower_ascii(trim(label_text));
    std::string out;
    out.reserve(lowered.size());
    bool in_run = false;
    for (char c : lowered) {
        if (is_separator(c)) {
            in_run = true;
            continue;
        }
        if (in_run && !out.empty()) out.push_back('_');
        in_run = false;
        out.push_back(c);
    }
    // Separators at the ends were never emitted; strip remaining punctuation,
    // which may expose underscores that sat between punctuation and text.
    std::size_t b = 0;
    std::size_t e = out.size();
    while (b < e && (is_ascii_punct(out[b]))) ++b;
    while (e > b && (is_ascii_punct(out[e - 1]))) --e;
    return out.substr(b, e - b);
}

LabelSet::LabelSet(const std::vector<std::string>& names) {
    names_.reserve(names.size());
    for (const auto& raw : names) {
        auto canonical = canonicalize(raw);
        if (canonical.empty()) {
            throw Error(Errc::InvalidArgument, "label '" + raw + "' is empty after canonicalization");
        }
        auto [it, inserted] = index_.emplace(canonical, names_.size());
        if (!inserted) {
            throw Error(Errc::InvalidArgument, "duplicate label '" + canonical + "'");
        }
        names_.push_back(std::move(canonical));
    }
}

LabelSet LabelSet::load(const std::filesystem::path& path) {
    auto contents = read_file(path);
    auto body = trim(contents);
    std::vector<std::string> names;
    if (!body.empty() && body.front() == '[') {
        auto j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_array()) {
            throw Error(Errc::MalformedRecord, "label file " + path.string() + " is not a JSON array");
        }
        for (const auto& v : j) {
            if (!v.is_string()) {
                throw Error(Errc::MalformedRecord, "label file entries must be strings");
            }
            names.push_back(v.get<std::string>());
        }
    } else {
        for (auto& line : split_lines(contents)) {
            if (!trim(line).empty()) names.push_back(line);
        }
    }
    return LabelSet(names);
}

void LabelSet::save(const std::filesystem::path& path) const {
    std::string out;
    for (const auto& n : names_) out += n + "\n";
    write_file(path, out);
}

std::optional<std::size_t> LabelSet::find(std::string_view label_text) const {
    auto it = index_.find(canonicalize(label_text));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string_view parse_rule_name(ParseRule rule) noexcept {
    switch (rule) {
        case ParseRule::IndexMatch: return "IndexMatch";
        case ParseRule::UnknownMarker: return "UnknownMarker";
        case ParseRule::ExactName: return "ExactName";
        case ParseRule::UniqueSubstring: return "UniqueSubstring";
        case ParseRule::Fallback: return "Fallback";
    }
    return "Fallback";
}

std::optional<ParseRule> parse_rule_from_name(std::string_view name) noexcept {
    for (auto r : {ParseRule::IndexMatch, ParseRule::UnknownMarker, ParseRule::ExactName,
                   ParseRule::UniqueSubstring, ParseRule::Fallback}) {
        if (parse_rule_name(r) == name) return r;
    }
    return std::nullopt;
}

Prediction parse_prediction(std::string_view raw, const LabelSet& labels) {
    Prediction p;
    p.raw_text = std::string(raw);
    std::string_view s = trim(raw);

    // Leading integer, optionally signed. More than 18 digits cannot be a class index.
    std::size_t pos = 0;
    bool negative = false;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) {
        negative = s[pos] == '-';
        ++pos;
    }
    std::size_t digits_begin = pos;
    while (pos < s.size() && is_digit(s[pos])) ++pos;
    std::size_t n_digits = pos - digits_begin;
    if (n_digits > 0 && n_digits <= 18) {
        long long value = std::stoll(std::string(s.substr(digits_begin, n_digits)));
        if (negative) value = -value;
        if (value >= 0 && static_cast<unsigned long long>(value) < labels.size()) {
            auto index = static_cast<std::size_t>(value);
            p.label = index;
            p.rule = ParseRule::IndexMatch;
            auto rest = canonicalize(s.substr(pos));
            p.name_disagreement = !rest.empty() && rest != labels.name(index);
            return p;
        }
        if (value == -1) {
            p.rule = ParseRule::UnknownMarker;
            return p;
        }
    }

    auto first_token_end = s.find_first_of(" \t\r\n");
    if (canonicalize(s.substr(0, first_token_end)) == "unknown") {
        p.rule = ParseRule::UnknownMarker;
        return p;
    }

    auto canonical = canonicalize(s);
    if (auto exact = labels.find(canonical); exact && !canonical.empty()) {
        p.label = *exact;
        p.rule = ParseRule::ExactName;
        return p;
    }

    std::optional<std::size_t> match;
    std::size_t matches = 0;
    for (std::size_t i = 0; i < labels.size() && matches < 2; ++i) {
        if (canonical.find(labels.name(i)) != std::string::npos) {
            match = i;
            ++matches;
        }
    }
    if (matches == 1) {
        p.label = match;
        p.rule = ParseRule::UniqueSubstring;
        return p;
    }
    p.rule = ParseRule::Fallback;
    return p;
}

std::string format_answer(const LabelSet& labels, std::size_t index) {
    return std::to_string(index) + " " + labels.name(index);
}

}  // namespace intentrag

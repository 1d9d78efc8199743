#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "embedder.hpp"
#include "promptkit.hpp"

namespace intentrag {

struct LabelGroup {
    std::size_t group_id = 0;
    std::vector<std::size_t> member_labels;  // ascending

    friend bool operator==(const LabelGroup&, const LabelGroup&) = default;
};

// Override file: JSON array of arrays of canonical label names forming a partition.
std::vector<LabelGroup> load_group_override(const std::filesystem::path& path, const LabelSet& labels);
void save_groups(const std::filesystem::path& path, const std::vector<LabelGroup>& groups,
                 const LabelSet& labels);

// Throws InvalidPartition unless every label appears in exactly one group.
void validate_partition(const std::vector<LabelGroup>& groups, std::size_t label_count);

// Confusable-label groups. With an override the file decides; otherwise start from one
// group per class centroid and repeatedly merge the pair of groups whose centroids are most
// similar (group centroid = normalized mean of member class centroids) until g remain.
// Groups are numbered by their smallest member label.
std::vector<LabelGroup> build_groups(const ExemplarSet& exemplars,
                                     std::span<const EmbeddingVector> vectors, std::size_t g,
                                     const std::optional<std::filesystem::path>& override_file = std::nullopt);

struct GenerationRequest {
    LabelGroup group;
    std::vector<std::vector<std::string>> seed_exemplars;  // per member, same order
    std::size_t n_generate_per_class = 20;

    std::size_t demanded_lines() const noexcept { return n_generate_per_class * group.member_labels.size(); }
};

// Takes the first `seeds_per_class` exemplars of each member class.
std::vector<GenerationRequest> make_generation_requests(const std::vector<LabelGroup>& groups,
                                                        const ExemplarSet& seeds,
                                                        std::size_t seeds_per_class = 3,
                                                        std::size_t n_generate_per_class = 20);

// System + User bundle; the model is asked for "<canonical_label>\t<text>" lines.
PromptBundle render_generation_prompt(const GenerationRequest& request, const LabelSet& labels);

struct GeneratedCandidate {
    std::string label_text;
    std::string text;
    std::size_t group_id = 0;
};

struct Rejection {
    std::string label_text;
    std::string text;
    std::size_t group_id = 0;
    std::string reason;  // malformed, empty_text, unknown_label, duplicate_existing, duplicate_candidate, over_quota
};

// Lines without a tab are reported in `malformed`.
std::vector<GeneratedCandidate> parse_generation_output(std::string_view raw, std::size_t group_id,
                                                        std::vector<Rejection>* malformed = nullptr);

struct FilterResult {
    ExemplarSet survivors;                  // origin = Generated, in candidate order
    std::vector<std::size_t> survivor_groups;  // parallel to survivors.exemplars
    std::vector<Rejection> rejections;
    std::vector<std::size_t> per_class;
};

// Drops unknown labels, empty texts, and exact duplicates (case-insensitive, whitespace
// normalized) of `existing` or of earlier candidates; optionally caps survivors per class.
FilterResult filter_generated(std::span<const GeneratedCandidate> candidates, const ExemplarSet& existing,
                              const LabelSet& labels,
                              std::optional<std::size_t> max_per_class = std::nullopt);

// JSONL with text, label, origin "generated" and group_id.
void save_generated(const std::filesystem::path& path, const FilterResult& result);
std::string rejection_report_json(const FilterResult& result, std::size_t demanded_lines,
                                  std::size_t candidate_lines);

}  // namespace intentrag

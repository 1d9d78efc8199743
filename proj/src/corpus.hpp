#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "labelspace.hpp"

namespace intentrag {

enum class Origin { Original, Curated, Generated };
enum class Split { Train, Test, Validation };
enum class DataFormat { Csv, Jsonl };

std::string_view origin_name(Origin origin) noexcept;
Origin origin_from_name(std::string_view name);
DataFormat format_from_path(const std::filesystem::path& path);

struct LabeledUtterance {
    std::string text;
    std::size_t label = 0;
    Origin origin = Origin::Original;

    friend bool operator==(const LabeledUtterance&, const LabeledUtterance&) = default;
};

struct Dataset {
    LabelSet labels;
    std::vector<LabeledUtterance> items;
    Split split = Split::Train;
};

// Canonical label names found in a dataset file, sorted; used when no label set is declared.
LabelSet infer_label_set(const std::filesystem::path& path, DataFormat format);

// CSV needs a `text,label` header; JSONL needs `text` and `label` keys per line.
// An optional `origin` field is honored. With no declared label set one is inferred.
Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const std::optional<LabelSet>& declared = std::nullopt,
                     Split split = Split::Train);

// The `text` field of every record, in file order, without label resolution.
std::vector<std::string> read_texts(const std::filesystem::path& path);

void save_dataset_jsonl(const std::filesystem::path& path, const LabelSet& labels,
                        const std::vector<LabeledUtterance>& items);

struct RandomSeeded {
    std::uint64_t seed = 0;
};
struct CuratedFile {
    std::filesystem::path path;
};
struct Mixed {
    std::size_t original_per_class = 0;
    std::size_t generated_per_class = 0;
};

struct SamplingPlan {
    std::size_t n_per_class = 0;
    std::variant<RandomSeeded, CuratedFile, Mixed> strategy;
};

// Exemplars grouped by class in label-index order. An exemplar's id is its position.
struct ExemplarSet {
    LabelSet labels;
    std::vector<LabeledUtterance> exemplars;

    std::size_t size() const noexcept { return exemplars.size(); }
    std::vector<std::size_t> count_per_class() const;
};

ExemplarSet sample_few_shot(const Dataset& dataset, const SamplingPlan& plan);

ExemplarSet mix_augmented(const ExemplarSet& original, const ExemplarSet& generated,
                          const Mixed& mix);

// Groups arbitrary utterances by class (stable within a class).
ExemplarSet group_by_class(const LabelSet& labels, std::vector<LabeledUtterance> items);

// Exemplar files are dataset JSONL plus `id` and `origin` fields.
void save_exemplars(const std::filesystem::path& path, const ExemplarSet& set);
ExemplarSet load_exemplars(const std::filesystem::path& path, const LabelSet& labels);

// Fisher-Yates over std::mt19937_64 with rejection sampling for the bound, so the
// permutation does not depend on the standard library's distribution code.
class SeededShuffler {
public:
    explicit SeededShuffler(std::uint64_t seed) : engine_(seed) {}

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }
    std::size_t below(std::size_t bound);

private:
    std::mt19937_64 engine_;
};

}  // namespace intentrag

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelspace.hpp"

namespace intentrag {

// Gold class x (predicted class, then one trailing Unknown column).
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(LabelSet labels);

    const LabelSet& labels() const noexcept { return labels_; }
    std::size_t classes() const noexcept { return labels_.size(); }
    std::size_t unknown_column() const noexcept { return labels_.size(); }

    std::size_t at(std::size_t gold, std::size_t column) const;
    std::size_t unknown(std::size_t gold) const { return at(gold, unknown_column()); }
    void add(std::size_t gold, std::optional<std::size_t> predicted, std::size_t n = 1);

    std::size_t total() const noexcept { return total_; }
    std::size_t row_sum(std::size_t gold) const;
    std::size_t column_sum(std::size_t column) const;
    std::size_t diagonal_sum() const;

private:
    LabelSet labels_;
    std::vector<std::size_t> counts_;
    std::size_t total_ = 0;
};

ConfusionMatrix confusion(std::span<const Prediction> predictions, std::span<const std::size_t> golds,
                          const LabelSet& labels);

double micro_f1(const ConfusionMatrix& m);
double macro_f1(const ConfusionMatrix& m);

struct LabelMetrics {
    std::size_t label = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    double misclassification_rate = 0.0;
};

std::vector<LabelMetrics> per_label_metrics(const ConfusionMatrix& m);

struct Misclassified {
    std::size_t label = 0;
    double misclassification_rate = 0.0;
    // Most frequent wrong column; nullopt when nothing was wrong, or Unknown when
    // `dominant_is_unknown` is set.
    std::optional<std::size_t> dominant_wrong_prediction;
    bool dominant_is_unknown = false;
};

// Highest misclassification rate first, ties by label index.
std::vector<Misclassified> top_misclassified(const ConfusionMatrix& m, std::size_t n);

struct ConfusionPair {
    std::size_t gold = 0;
    std::optional<std::size_t> predicted;  // nullopt = Unknown
    std::size_t count = 0;
};

struct EvalReport {
    std::size_t instances = 0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    std::vector<LabelMetrics> per_label;
    std::vector<ConfusionPair> top_confusions;
    std::vector<Misclassified> top_misclassified;
    std::map<std::string, std::size_t> parse_rules;
    std::size_t name_disagreements = 0;
    std::optional<ConfusionMatrix> matrix;

    std::string to_text() const;
    std::string to_csv() const;
    std::string to_json() const;
};

EvalReport evaluate(std::span<const Prediction> predictions, std::span<const std::size_t> golds,
                    const LabelSet& labels, std::size_t top_n = 10);

}  // namespace intentrag

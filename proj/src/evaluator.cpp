#include "evaluator.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "common/text.hpp"

namespace intentrag {

using nlohmann::ordered_json;

ConfusionMatrix::ConfusionMatrix(LabelSet labels)
    : labels_(std::move(labels)), counts_(labels_.size() * (labels_.size() + 1), 0) {}

std::size_t ConfusionMatrix::at(std::size_t gold, std::size_t column) const {
    if (gold >= classes() || column > classes()) throw Error(Errc::InvalidArgument, "cell out of range");
    return counts_[gold * (classes() + 1) + column];
}

void ConfusionMatrix::add(std::size_t gold, std::optional<std::size_t> predicted, std::size_t n) {
    std::size_t column = predicted.value_or(unknown_column());
    if (gold >= classes() || column > classes()) {
        throw Error(Errc::UnknownLabel, "gold or predicted label out of range");
    }
    counts_[gold * (classes() + 1) + column] += n;
    total_ += n;
}

std::size_t ConfusionMatrix::row_sum(std::size_t gold) const {
    std::size_t s = 0;
    for (std::size_t c = 0; c <= classes(); ++c) s += at(gold, c);
    return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t column) const {
    std::size_t s = 0;
    for (std::size_t g = 0; g < classes(); ++g) s += at(g, column);
    return s;
}

std::size_t ConfusionMatrix::diagonal_sum() const {
    std::size_t s = 0;
    for (std::size_t c = 0; c < classes(); ++c) s += at(c, c);
    return s;
}

ConfusionMatrix confusion(std::span<const Prediction> predictions, std::span<const std::size_t> golds,
                          const LabelSet& labels) {
    if (predictions.size() != golds.size()) {
        throw Error(Errc::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                              std::to_string(golds.size()) + " golds");
    }
    ConfusionMatrix m(labels);
    for (std::size_t i = 0; i < golds.size(); ++i) m.add(golds[i], predictions[i].label);
    return m;
}

double micro_f1(const ConfusionMatrix& m) {
    if (m.total() == 0) throw Error(Errc::EmptyEvaluation, "no instances");
    // One prediction per instance: micro precision = micro recall = accuracy.
    return static_cast<double>(m.diagonal_sum()) / static_cast<double>(m.total());
}

std::vector<LabelMetrics> per_label_metrics(const ConfusionMatrix& m) {
    std::vector<LabelMetrics> out;
    out.reserve(m.classes());
    for (std::size_t c = 0; c < m.classes(); ++c) {
        LabelMetrics lm;
        lm.label = c;
        const double diag = static_cast<double>(m.at(c, c));
        const auto row = m.row_sum(c);
        const auto col = m.column_sum(c);
        lm.support = row;
        lm.precision = col == 0 ? 0.0 : diag / static_cast<double>(col);
        lm.recall = row == 0 ? 0.0 : diag / static_cast<double>(row);
        lm.f1 = (lm.precision + lm.recall) == 0.0
                    ? 0.0
                    : 2.0 * lm.precision * lm.recall / (lm.precision + lm.recall);
        lm.misclassification_rate = row == 0 ? 0.0 : 1.0 - lm.recall;
        out.push_back(lm);
    }
    return out;
}

double macro_f1(const ConfusionMatrix& m) {
    if (m.total() == 0) throw Error(Errc::EmptyEvaluation, "no instances");
    double sum = 0.0;
    for (const auto& lm : per_label_metrics(m)) sum += lm.f1;
    return sum / static_cast<double>(m.classes());
}

std::vector<Misclassified> top_misclassified(const ConfusionMatrix& m, std::size_t n) {
    if (n < 1) throw Error(Errc::InvalidArgument, "n must be >= 1");
    std::vector<Misclassified> all;
    all.reserve(m.classes());
    for (std::size_t c = 0; c < m.classes(); ++c) {
        Misclassified x;
        x.label = c;
        const auto row = m.row_sum(c);
        const auto wrong = row - m.at(c, c);
        x.misclassification_rate = row == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(row);
        std::size_t best_count = 0;
        for (std::size_t col = 0; col <= m.classes(); ++col) {
            if (col == c) continue;
            if (m.at(c, col) > best_count) {
                best_count = m.at(c, col);
                x.dominant_is_unknown = col == m.unknown_column();
                x.dominant_wrong_prediction = x.dominant_is_unknown ? std::nullopt
                                                                    : std::optional<std::size_t>(col);
            }
        }
        all.push_back(x);
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.misclassification_rate > b.misclassification_rate;
    });
    all.resize(std::min(n, all.size()));
    return all;
}

EvalReport evaluate(std::span<const Prediction> predictions, std::span<const std::size_t> golds,
                    const LabelSet& labels, std::size_t top_n) {
    auto m = confusion(predictions, golds, labels);
    EvalReport r;
    r.instances = m.total();
    r.micro_f1 = micro_f1(m);
    r.macro_f1 = macro_f1(m);
    r.per_label = per_label_metrics(m);
    r.top_misclassified = top_misclassified(m, std::max<std::size_t>(top_n, 1));
    for (std::size_t g = 0; g < m.classes(); ++g) {
        for (std::size_t c = 0; c <= m.classes(); ++c) {
            if (c == g || m.at(g, c) == 0) continue;
            r.top_confusions.push_back(
                {g, c == m.unknown_column() ? std::nullopt : std::optional<std::size_t>(c), m.at(g, c)});
        }
    }
    std::stable_sort(r.top_confusions.begin(), r.top_confusions.end(),
                     [](const auto& a, const auto& b) { return a.count > b.count; });
    if (r.top_confusions.size() > top_n) r.top_confusions.resize(top_n);
    for (const auto& p : predictions) {
        ++r.parse_rules[std::string(parse_rule_name(p.rule))];
        if (p.name_disagreement) ++r.name_disagreements;
    }
    r.matrix = std::move(m);
    return r;
}

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", v * 100.0);
    return buf;
}

std::string num(double v, int places = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

std::string column_name(const LabelSet& labels, std::optional<std::size_t> col) {
    return col ? labels.name(*col) : "Unknown";
}

}  // namespace

std::string EvalReport::to_text() const {
    const auto& labels = matrix->labels();
    std::string out;
    out += "instances " + std::to_string(instances) + "\n";
    out += "micro-F1  " + num(micro_f1) + "\n";
    out += "macro-F1  " + num(macro_f1) + "\n";
    out += "\nTop misclassified labels\n";
    std::size_t w = 5;
    for (const auto& x : top_misclassified) w = std::max(w, labels.name(x.label).size());
    for (const auto& x : top_misclassified) {
        auto name = labels.name(x.label);
        out += "  " + name + std::string(w - name.size(), ' ') + "  " + pct(x.misclassification_rate);
        if (x.dominant_wrong_prediction || x.dominant_is_unknown) {
            out += "  -> " + column_name(labels, x.dominant_wrong_prediction);
        }
        out += "\n";
    }
    if (!top_confusions.empty()) {
        out += "\nTop confusions (gold -> predicted)\n";
        for (const auto& p : top_confusions) {
            out += "  " + labels.name(p.gold) + " -> " + column_name(labels, p.predicted) + "  " +
                   std::to_string(p.count) + "\n";
        }
    }
    if (!parse_rules.empty()) {
        out += "\nParse rules\n";
        for (const auto& [rule, n] : parse_rules) out += "  " + rule + " " + std::to_string(n) + "\n";
        out += "  name disagreements " + std::to_string(name_disagreements) + "\n";
    }
    return out;
}

std::string EvalReport::to_csv() const {
    const auto& labels = matrix->labels();
    std::string out = "label,precision,recall,f1,support,misclassification_rate\n";
    for (const auto& lm : per_label) {
        out += csv_escape(labels.name(lm.label)) + "," + num(lm.precision, 6) + "," + num(lm.recall, 6) +
               "," + num(lm.f1, 6) + "," + std::to_string(lm.support) + "," +
               num(lm.misclassification_rate, 6) + "\n";
    }
    return out;
}

std::string EvalReport::to_json() const {
    const auto& labels = matrix->labels();
    ordered_json j;
    j["instances"] = instances;
    j["micro_f1"] = micro_f1;
    j["macro_f1"] = macro_f1;
    j["labels"] = labels.names();
    auto& per = j["per_label"] = ordered_json::array();
    for (const auto& lm : per_label) {
        per.push_back({{"label", labels.name(lm.label)},
                       {"precision", lm.precision},
                       {"recall", lm.recall},
                       {"f1", lm.f1},
                       {"support", lm.support},
                       {"misclassification_rate", lm.misclassification_rate}});
    }
    auto& top = j["top_misclassified"] = ordered_json::array();
    for (const auto& x : top_misclassified) {
        ordered_json e = {{"label", labels.name(x.label)},
                          {"misclassification_rate", x.misclassification_rate}};
        if (x.dominant_wrong_prediction || x.dominant_is_unknown) {
            e["dominant_wrong_prediction"] = column_name(labels, x.dominant_wrong_prediction);
        } else {
            e["dominant_wrong_prediction"] = nullptr;
        }
        top.push_back(std::move(e));
    }
    auto& conf = j["top_confusions"] = ordered_json::array();
    for (const auto& p : top_confusions) {
        conf.push_back({{"gold", labels.name(p.gold)},
                        {"predicted", column_name(labels, p.predicted)},
                        {"count", p.count}});
    }
    j["parse_rules"] = parse_rules;
    j["name_disagreements"] = name_disagreements;
    auto& cm = j["confusion_matrix"] = ordered_json::object();
    cm["columns"] = labels.names();
    cm["columns"].push_back("Unknown");
    auto& rows = cm["rows"] = ordered_json::array();
    for (std::size_t g = 0; g < matrix->classes(); ++g) {
        auto row = ordered_json::array();
        for (std::size_t c = 0; c <= matrix->classes(); ++c) row.push_back(matrix->at(g, c));
        rows.push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

}  // namespace intentrag

#include "retriever.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "common/error.hpp"

namespace intentrag {

namespace {

Error dim_mismatch(std::size_t expected, std::size_t got) {
    return Error(Errc::DimensionMismatch,
                 "expected " + std::to_string(expected) + ", got " + std::to_string(got));
}

}  // namespace

ExemplarIndex ExemplarIndex::build(std::span<const EmbeddingVector> vectors) {
    if (vectors.empty()) throw Error(Errc::EmptyIndex, "no exemplar vectors");
    const std::size_t dim = vectors.front().dim();
    std::vector<float> data;
    data.reserve(vectors.size() * dim);
    for (const auto& v : vectors) {
        if (v.dim() != dim) throw dim_mismatch(dim, v.dim());
        data.insert(data.end(), v.values().begin(), v.values().end());
    }
    return ExemplarIndex(std::move(data), vectors.size(), dim);
}

ExemplarIndex ExemplarIndex::build(const ExemplarSet& exemplars,
                                   std::span<const EmbeddingVector> vectors) {
    if (exemplars.size() != vectors.size()) {
        throw Error(Errc::LengthMismatch, std::to_string(exemplars.size()) + " exemplars vs " +
                                              std::to_string(vectors.size()) + " vectors");
    }
    return build(vectors);
}

std::span<const float> ExemplarIndex::row(std::size_t id) const {
    if (id >= count_) throw Error(Errc::InvalidArgument, "exemplar id out of range");
    return {data_.data() + id * dim_, dim_};
}

std::vector<RetrievalHit> ExemplarIndex::top_k(const EmbeddingVector& query, std::size_t k) const {
    if (k < 1 || k > count_) {
        throw Error(Errc::KOutOfRange,
                    "k=" + std::to_string(k) + " outside [1, " + std::to_string(count_) + "]");
    }
    if (query.dim() != dim_) throw dim_mismatch(dim_, query.dim());

    std::vector<RetrievalHit> scored(count_);
    for (std::size_t i = 0; i < count_; ++i) {
        scored[i].exemplar_id = i;
        scored[i].similarity = dot(query.values(), row(i));
    }
    auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.exemplar_id < b.exemplar_id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                      better);
    scored.resize(k);
    for (std::size_t r = 0; r < k; ++r) scored[r].rank = r + 1;
    return scored;
}

std::string format_retrieval_fraction(std::size_t k, std::size_t n) {
    if (n == 0) throw Error(Errc::InvalidArgument, "pool size must be positive");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * static_cast<double>(k) / static_cast<double>(n));
    return buf;
}

CentroidModel CentroidModel::fit(const ExemplarSet& exemplars,
                                 std::span<const EmbeddingVector> vectors) {
    if (exemplars.size() != vectors.size()) {
        throw Error(Errc::LengthMismatch, std::to_string(exemplars.size()) + " exemplars vs " +
                                              std::to_string(vectors.size()) + " vectors");
    }
    const auto& labels = exemplars.labels;
    if (vectors.empty()) throw Error(Errc::EmptyClass, "no exemplars to fit");
    const std::size_t dim = vectors.front().dim();

    std::vector<std::vector<double>> sums(labels.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(labels.size(), 0);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].dim() != dim) throw dim_mismatch(dim, vectors[i].dim());
        auto c = exemplars.exemplars[i].label;
        ++counts[c];
        auto vals = vectors[i].values();
        for (std::size_t d = 0; d < dim; ++d) sums[c][d] += vals[d];
    }

    CentroidModel model;
    model.labels_ = labels;
    model.dim_ = dim;
    model.centroids_.reserve(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) {
        if (counts[c] == 0) throw Error(Errc::EmptyClass, "class '" + labels.name(c) + "' has no exemplars");
        std::vector<float> mean(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            mean[d] = static_cast<float>(sums[c][d] / static_cast<double>(counts[c]));
        }
        try {
            model.centroids_.push_back(EmbeddingVector::normalized(mean));
        } catch (const Error& e) {
            if (e.code() != Errc::ZeroVector) throw;
            throw Error(Errc::ZeroCentroid, "class '" + labels.name(c) + "' vectors cancel out");
        }
    }
    return model;
}

std::pair<std::size_t, double> CentroidModel::predict(const EmbeddingVector& query) const {
    if (query.dim() != dim_) throw dim_mismatch(dim_, query.dim());
    std::size_t best = 0;
    double best_sim = dot(query.values(), centroids_.front().values());
    for (std::size_t c = 1; c < centroids_.size(); ++c) {
        double s = dot(query.values(), centroids_[c].values());
        if (s > best_sim) {
            best = c;
            best_sim = s;
        }
    }
    return {best, best_sim};
}

}  // namespace intentrag

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "embedder.hpp"

namespace intentrag {

struct RetrievalHit {
    std::size_t exemplar_id = 0;
    double similarity = 0.0;
    std::size_t rank = 0;  // 1-based

    friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

// Exact cosine search over unit vectors stored row-major. Immutable after build;
// exemplar ids are insertion positions, which also break similarity ties.
class ExemplarIndex {
public:
    static ExemplarIndex build(std::span<const EmbeddingVector> vectors);
    static ExemplarIndex build(const ExemplarSet& exemplars, std::span<const EmbeddingVector> vectors);

    std::size_t size() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const float> row(std::size_t id) const;

    // Exactly k hits, similarity descending, ties by ascending id.
    std::vector<RetrievalHit> top_k(const EmbeddingVector& query, std::size_t k) const;

private:
    ExemplarIndex(std::vector<float> data, std::size_t count, std::size_t dim)
        : data_(std::move(data)), count_(count), dim_(dim) {}

    std::vector<float> data_;
    std::size_t count_;
    std::size_t dim_;
};

// "2.2%": k/n as a percentage at one decimal.
std::string format_retrieval_fraction(std::size_t k, std::size_t n);

// Nearest-centroid classifier over exemplar embeddings.
class CentroidModel {
public:
    static CentroidModel fit(const ExemplarSet& exemplars, std::span<const EmbeddingVector> vectors);

    const LabelSet& labels() const noexcept { return labels_; }
    std::size_t dim() const noexcept { return dim_; }
    const EmbeddingVector& centroid(std::size_t label) const { return centroids_.at(label); }

    // Argmax of dot product over centroids; ties go to the lowest label index.
    std::pair<std::size_t, double> predict(const EmbeddingVector& query) const;

private:
    LabelSet labels_;
    std::size_t dim_ = 0;
    std::vector<EmbeddingVector> centroids_;
};

}  // namespace intentrag

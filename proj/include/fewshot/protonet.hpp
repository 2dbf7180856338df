#pragma once

#include <span>
#include <vector>

#include "fewshot/feature_ops.hpp"

namespace fewshot {

struct Prediction {
  std::size_t query_index = 0;  // position in Episode::query
  std::vector<double> scores;   // cosine similarity to each prototype
  std::uint32_t predicted_class = 0;  // episode-local; argmax, lowest index on ties
};

/// Nearest prototype by cosine similarity for every row of `queries`.
std::vector<Prediction> classify_rows(const Matrix& queries, const Prototypes& protos);

std::vector<Prediction> classify(const EmbeddingSet& set, const Episode& episode, const Prototypes& protos);

/// Fraction of queries whose prediction matches their episode-local class.
double episode_accuracy(std::span<const Prediction> preds, const Episode& episode);

}  // namespace fewshot

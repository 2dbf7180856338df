#include "fewshot/protonet.hpp"

#include <string>

#include "fewshot/error.hpp"

namespace fewshot {

std::vector<Prediction> classify_rows(const Matrix& queries, const Prototypes& protos) {
  if (queries.cols() != protos.matrix.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(queries.cols()) +
                                                  " vs prototype dim " +
                                                  std::to_string(protos.matrix.cols()));
  }
  if (protos.n_way() == 0) throw Error(ErrorCode::DimensionMismatch, "no prototypes");

  std::vector<Prediction> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    Prediction& p = out[static_cast<std::size_t>(i)];
    p.query_index = static_cast<std::size_t>(i);
    p.scores.resize(protos.n_way());
    double best = 0.0;
    for (Eigen::Index j = 0; j < protos.matrix.rows(); ++j) {
      const double s = cosine_sim(queries.row(i).transpose(), protos.matrix.row(j).transpose());
      p.scores[static_cast<std::size_t>(j)] = s;
      if (j == 0 || s > best) {
        best = s;
        p.predicted_class = static_cast<std::uint32_t>(j);
      }
    }
  }
  return out;
}

std::vector<Prediction> classify(const EmbeddingSet& set, const Episode& episode, const Prototypes& protos) {
  if (protos.n_way() != episode.n_way()) {
    throw Error(ErrorCode::DimensionMismatch, "prototype count differs from episode n_way");
  }
  return classify_rows(set.gather(episode.query), protos);
}

double episode_accuracy(std::span<const Prediction> preds, const Episode& episode) {
  if (preds.size() != episode.query.size()) {
    throw Error(ErrorCode::LengthMismatch, "predictions do not cover every query");
  }
  if (preds.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : preds) {
    if (p.predicted_class == episode.query_class(p.query_index)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace fewshot

#include "fewshot/pseudo_pair.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fewshot/error.hpp"
#include "fewshot/feature_ops.hpp"

namespace fewshot {

std::size_t PairAssignment::num_selected() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
}

PairAssignment assign_pairs(const Matrix& batch, double rho) {
  const auto b = static_cast<std::size_t>(batch.rows());
  if (b < 2) throw Error(ErrorCode::BatchTooSmall, "pairing needs at least 2 rows");
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidConfig, "rho must be in (0, 1]");

  // Similarities through the normalized Gram matrix; cosine_sim semantics
  // (zero rows have similarity 0 to everything) carry over since zero rows
  // stay zero under normalize_rows.
  const Matrix unit = normalize_rows(batch);
  const Matrix gram = unit * unit.transpose();

  PairAssignment out;
  out.pair_of.resize(b);
  out.similarity.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    bool first = true;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      const double s = std::clamp(gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), -1.0, 1.0);
      if (first || s > out.similarity[i]) {
        out.similarity[i] = s;
        out.pair_of[i] = static_cast<std::uint32_t>(j);
        first = false;
      }
    }
  }

  const auto keep = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(b) - 1e-12));
  std::vector<std::size_t> order(b);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return out.similarity[x] > out.similarity[y]; });
  out.selected.assign(b, false);
  for (std::size_t k = 0; k < std::min(keep, b); ++k) out.selected[order[k]] = true;
  return out;
}

double bce_pair_loss(const Matrix& batch, const PairAssignment& assignment) {
  const auto b = static_cast<std::size_t>(batch.rows());
  if (assignment.batch_size() != b || assignment.selected.size() != b) {
    throw Error(ErrorCode::LengthMismatch, "assignment does not match batch size");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!assignment.selected[i]) continue;
    const Vector zi = l2_normalize(batch.row(static_cast<Eigen::Index>(i)).transpose());
    const Vector zj = l2_normalize(batch.row(assignment.pair_of[i]).transpose());
    const double inner = std::clamp(zi.dot(zj), kPairInnerClamp, 1.0);
    total += -std::log(inner);
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double pair_label_agreement(const PairAssignment& assignment, std::span<const std::uint32_t> labels) {
  if (labels.size() != assignment.batch_size()) {
    throw Error(ErrorCode::LengthMismatch, "label count does not match batch size");
  }
  std::size_t agree = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!assignment.selected[i]) continue;
    ++total;
    if (labels[i] == labels[assignment.pair_of[i]]) ++agree;
  }
  return total == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace fewshot

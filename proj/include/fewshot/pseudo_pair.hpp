#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fewshot/embed_store.hpp"

namespace fewshot {

/// Nearest-neighbor pseudo-label pairs within a batch of cls features.
struct PairAssignment {
  std::vector<std::uint32_t> pair_of;   // cosine-nearest other row, lowest index on ties
  std::vector<double> similarity;       // cosine_sim(z_i, z_pair_of[i])
  std::vector<bool> selected;           // top ceil(rho * B) rows by similarity

  std::size_t batch_size() const noexcept { return pair_of.size(); }
  std::size_t num_selected() const;
};

/// Pairs every row of `batch` (B x d, B >= 2) with its cosine-nearest
/// neighbor and marks the ceil(rho * B) most similar pairs as selected
/// (ties in similarity go to the lower row index).
PairAssignment assign_pairs(const Matrix& batch, double rho = 1.0);

/// Mean over selected rows of -log <l2n(z_i), l2n(z_pair)>, with the inner
/// product clamped to [1e-7, 1].
double bce_pair_loss(const Matrix& batch, const PairAssignment& assignment);

inline constexpr double kPairInnerClamp = 1e-7;

/// Fraction of selected pairs whose two rows share a label.
double pair_label_agreement(const PairAssignment& assignment, std::span<const std::uint32_t> labels);

}  // namespace fewshot

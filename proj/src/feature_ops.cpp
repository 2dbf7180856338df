#include "fewshot/feature_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fewshot/error.hpp"

namespace fewshot {

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::Concat: return "concat";
    case FusionMode::Sum: return "sum";
    case FusionMode::ClsOnly: return "cls-only";
  }
  return "?";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "concat") return FusionMode::Concat;
  if (name == "sum") return FusionMode::Sum;
  if (name == "cls-only") return FusionMode::ClsOnly;
  throw Error(ErrorCode::InvalidConfig, "unknown fusion mode '" + std::string(name) + "'");
}

Vector l2_normalize(const Vector& v) {
  const double norm = v.norm();
  if (norm == 0.0) return v;
  return v / norm;
}

double cosine_sim(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "cosine_sim operands differ in size");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = a.dot(b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

Prototypes compute_prototypes(const EmbeddingSet& set, const Episode& episode) {
  Prototypes p;
  p.matrix = Matrix::Zero(static_cast<Eigen::Index>(episode.n_way()), static_cast<Eigen::Index>(set.dim()));
  for (std::size_t j = 0; j < episode.n_way(); ++j) {
    auto row = p.matrix.row(static_cast<Eigen::Index>(j));
    for (auto r : episode.support_of(j)) row += set.features().row(r).cast<double>();
    row /= static_cast<double>(episode.k_shot);
  }
  p.source = PrototypeSource::SupportMean;
  return p;
}

Vector fuse_tokens(const Vector& cls, const Matrix& patches, const Vector& attn, FusionMode mode) {
  if (patches.rows() != attn.size() || patches.cols() != cls.size()) {
    throw Error(ErrorCode::DimensionMismatch, "patch block does not match cls/attention sizes");
  }
  if ((attn.array() < 0.0).any()) throw Error(ErrorCode::NegativeAttention, "attention weight < 0");
  const double total = attn.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroAttention, "attention weights sum to zero");

  switch (mode) {
    case FusionMode::ClsOnly:
      return cls;
    case FusionMode::Sum:
      return cls + (patches.transpose() * attn) / total;
    case FusionMode::Concat: {
      Vector out(2 * cls.size());
      out << cls, (patches.transpose() * attn) / total;
      return out;
    }
  }
  return cls;
}

EmbeddingSet fuse_set(const TokenEmbeddingSet& tokens, FusionMode mode) {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(tokens.dim());
  MatrixF fused(n, mode == FusionMode::Concat ? 2 * d : d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    fused.row(i) =
        fuse_tokens(tokens.cls(idx), tokens.patches(idx), tokens.attn(idx), mode).cast<float>().transpose();
  }
  std::vector<std::uint32_t> labels(tokens.labels().begin(), tokens.labels().end());
  return EmbeddingSet::create(std::move(fused), std::move(labels),
                              static_cast<std::uint32_t>(tokens.num_classes()));
}

EmbeddingSet as_fused(const LoadedSet& loaded, FusionMode mode) {
  if (const auto* set = std::get_if<EmbeddingSet>(&loaded)) return *set;
  return fuse_set(std::get<TokenEmbeddingSet>(loaded), mode);
}

}  // namespace fewshot

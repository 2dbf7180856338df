#pragma once

#include <string_view>

#include "fewshot/embed_store.hpp"
#include "fewshot/episode.hpp"

namespace fewshot {

enum class PrototypeSource { SupportMean, OptaTransported };

struct Prototypes {
  Matrix matrix;  // N x dim
  PrototypeSource source = PrototypeSource::SupportMean;

  std::size_t n_way() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix.cols()); }
};

enum class FusionMode { Concat, Sum, ClsOnly };

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);

/// Unit-norm copy of v; the zero vector maps to itself.
Vector l2_normalize(const Vector& v);

/// Cosine similarity in [-1, 1]; 0 when either side is the zero vector.
double cosine_sim(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Row-wise l2_normalize.
Matrix normalize_rows(const Matrix& m);

/// Row j is the mean of class j's K support rows (raw, unnormalized features).
Prototypes compute_prototypes(const EmbeddingSet& set, const Episode& episode);

/// Attention-weighted patch mean m = sum_i a_i patch_i / sum_i a_i, fused with
/// the cls token: concat -> [cls | m] (2d), sum -> cls + m, cls-only -> cls.
Vector fuse_tokens(const Vector& cls, const Matrix& patches, const Vector& attn, FusionMode mode);

/// Applies fuse_tokens to every sample; the result is stored as float32.
EmbeddingSet fuse_set(const TokenEmbeddingSet& tokens, FusionMode mode);

/// The fused view of whatever `load` returned.
EmbeddingSet as_fused(const LoadedSet& loaded, FusionMode mode);

}  // namespace fewshot

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace fewshot {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class SetKind : std::uint8_t { Fused = 0, Tokens = 1 };

/// Labeled n x d feature matrix with a per-class row index.
///
/// Features are held as 32-bit floats exactly as stored on disk; every
/// accessor that feeds numerics widens to double. Instances are immutable
/// and always valid: construction goes through `create`, which enforces
/// label range, finiteness and non-empty classes.
class EmbeddingSet {
 public:
  static EmbeddingSet create(MatrixF features, std::vector<std::uint32_t> labels,
                             std::uint32_t num_classes);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  std::size_t num_classes() const noexcept { return class_index_.size(); }

  const MatrixF& features() const noexcept { return features_; }
  std::span<const std::uint32_t> labels() const noexcept { return labels_; }
  std::uint32_t label(std::size_t row) const { return labels_.at(row); }

  /// Row indices of every sample of `cls`, ascending.
  std::span<const std::uint32_t> class_rows(std::size_t cls) const { return class_index_.at(cls); }

  Vector row(std::size_t i) const;
  /// Stacks the selected rows (widened to double) in the given order.
  Matrix gather(std::span<const std::uint32_t> rows) const;

  /// Bit-level equality of features plus equality of labels and class count.
  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b);

 private:
  EmbeddingSet() = default;

  MatrixF features_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::vector<std::uint32_t>> class_index_;
};

/// Per-sample cls token, p patch tokens and p attention weights.
class TokenEmbeddingSet {
 public:
  /// `cls` is n x d, `patches` is n x (p*d) with each sample's patches
  /// row-major, `attention` is n x p.
  static TokenEmbeddingSet create(MatrixF cls, MatrixF patches, MatrixF attention,
                                  std::vector<std::uint32_t> labels, std::uint32_t num_classes);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(cls_.cols()); }
  std::size_t num_patches() const noexcept { return static_cast<std::size_t>(attention_.cols()); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::span<const std::uint32_t> labels() const noexcept { return labels_; }

  const MatrixF& cls_tokens() const noexcept { return cls_; }
  const MatrixF& patch_tokens() const noexcept { return patches_; }
  const MatrixF& attention() const noexcept { return attention_; }

  Vector cls(std::size_t i) const;
  /// p x d matrix of sample i's patch tokens.
  Matrix patches(std::size_t i) const;
  Vector attn(std::size_t i) const;

  friend bool operator==(const TokenEmbeddingSet& a, const TokenEmbeddingSet& b);

 private:
  TokenEmbeddingSet() = default;

  MatrixF cls_;
  MatrixF patches_;
  MatrixF attention_;
  std::vector<std::uint32_t> labels_;
  std::size_t num_classes_ = 0;
};

using LoadedSet = std::variant<EmbeddingSet, TokenEmbeddingSet>;

// FSE1 layout (all integers little-endian):
//   "FSE1" | u32 n | u32 d | u32 c | u8 kind
//   kind 0: n*d f32 features (row-major), n u32 labels
//   kind 1: u32 p, per sample [d f32 cls][p*d f32 patches][p f32 attn], n u32 labels
inline constexpr std::size_t kHeaderBytes = 4 + 12 + 1;

std::vector<std::uint8_t> encode(const EmbeddingSet& set);
std::vector<std::uint8_t> encode(const TokenEmbeddingSet& set);
LoadedSet decode(std::span<const std::uint8_t> bytes);

LoadedSet load(const std::filesystem::path& path);
void save(const EmbeddingSet& set, const std::filesystem::path& path);
void save(const TokenEmbeddingSet& set, const std::filesystem::path& path);

/// CSV with header "label,f0,...,f{d-1}"; the class count is max label + 1.
EmbeddingSet load_csv(const std::filesystem::path& path);
EmbeddingSet parse_csv(std::string_view text);

}  // namespace fewshot

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fewshot/embed_store.hpp"

namespace fewshot {

struct EpisodeSpec {
  std::uint32_t n_way = 5;
  std::uint32_t k_shot = 1;
  std::uint32_t q_query = 15;

  /// Throws InvalidConfig unless N >= 2, K >= 1, Q >= 1.
  void validate() const;
};

/// One N-way K-shot Q-query task. `support` and `query` are class-major:
/// row j of each block belongs to `classes[j]`.
struct Episode {
  std::vector<std::uint32_t> classes;
  std::vector<std::uint32_t> support;  // N*K
  std::vector<std::uint32_t> query;    // N*Q
  std::uint32_t k_shot = 0;
  std::uint32_t q_query = 0;
  std::uint64_t episode_id = 0;

  std::size_t n_way() const noexcept { return classes.size(); }
  std::span<const std::uint32_t> support_of(std::size_t j) const {
    return std::span(support).subspan(j * k_shot, k_shot);
  }
  std::span<const std::uint32_t> query_of(std::size_t j) const {
    return std::span(query).subspan(j * q_query, q_query);
  }
  /// Episode-local class index of query i.
  std::uint32_t query_class(std::size_t i) const noexcept {
    return static_cast<std::uint32_t>(i / q_query);
  }
};

/// Classes with at least K+Q samples, ascending.
std::vector<std::uint32_t> eligible_classes(const EmbeddingSet& set, const EpisodeSpec& spec);

/// Pure function of (set, spec, seed, episode_id). Classes are drawn by a
/// partial Fisher-Yates over the eligible class list; each class's K+Q rows
/// by a partial Fisher-Yates over its class_index positions (first K support).
Episode sample_episode(const EmbeddingSet& set, const EpisodeSpec& spec, std::uint64_t seed,
                       std::uint64_t episode_id);

/// Throws DimensionMismatch / InvalidConfig if `episode` does not index into `set`
/// consistently (rows in range, labels matching, support/query disjoint).
void validate_episode(const EmbeddingSet& set, const Episode& episode);

}  // namespace fewshot

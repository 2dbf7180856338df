#include "fewshot/episode.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>

#include "fewshot/error.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

void EpisodeSpec::validate() const {
  if (n_way < 2) throw Error(ErrorCode::InvalidConfig, "n_way must be >= 2");
  if (k_shot < 1) throw Error(ErrorCode::InvalidConfig, "k_shot must be >= 1");
  if (q_query < 1) throw Error(ErrorCode::InvalidConfig, "q_query must be >= 1");
}

std::vector<std::uint32_t> eligible_classes(const EmbeddingSet& set, const EpisodeSpec& spec) {
  const std::size_t need = static_cast<std::size_t>(spec.k_shot) + spec.q_query;
  std::vector<std::uint32_t> out;
  for (std::size_t c = 0; c < set.num_classes(); ++c) {
    if (set.class_rows(c).size() >= need) out.push_back(static_cast<std::uint32_t>(c));
  }
  return out;
}

Episode sample_episode(const EmbeddingSet& set, const EpisodeSpec& spec, std::uint64_t seed,
                       std::uint64_t episode_id) {
  spec.validate();
  std::vector<std::uint32_t> pool = eligible_classes(set, spec);
  if (pool.size() < spec.n_way) {
    // Distinguish "too few classes at all" from "classes too small".
    if (set.num_classes() < spec.n_way) {
      throw Error(ErrorCode::NotEnoughClasses, "set has " + std::to_string(set.num_classes()) +
                                                   " classes, episode needs " +
                                                   std::to_string(spec.n_way));
    }
    throw Error(ErrorCode::NotEnoughSamplesInClass,
                "only " + std::to_string(pool.size()) + " classes have >= " +
                    std::to_string(spec.k_shot + spec.q_query) + " samples, episode needs " +
                    std::to_string(spec.n_way));
  }

  Rng rng(child_seed(seed, episode_id));
  for (std::uint32_t j = 0; j < spec.n_way; ++j) {
    const auto pick = j + rng.below(pool.size() - j);
    std::swap(pool[j], pool[pick]);
  }

  Episode ep;
  ep.episode_id = episode_id;
  ep.k_shot = spec.k_shot;
  ep.q_query = spec.q_query;
  ep.classes.assign(pool.begin(), pool.begin() + spec.n_way);
  ep.support.reserve(static_cast<std::size_t>(spec.n_way) * spec.k_shot);
  ep.query.reserve(static_cast<std::size_t>(spec.n_way) * spec.q_query);

  const std::uint32_t take = spec.k_shot + spec.q_query;
  std::vector<std::uint32_t> positions;
  for (const auto cls : ep.classes) {
    const auto rows = set.class_rows(cls);
    positions.resize(rows.size());
    std::iota(positions.begin(), positions.end(), 0u);
    for (std::uint32_t t = 0; t < take; ++t) {
      const auto pick = t + rng.below(positions.size() - t);
      std::swap(positions[t], positions[pick]);
    }
    for (std::uint32_t t = 0; t < spec.k_shot; ++t) ep.support.push_back(rows[positions[t]]);
    for (std::uint32_t t = spec.k_shot; t < take; ++t) ep.query.push_back(rows[positions[t]]);
  }
  return ep;
}

void validate_episode(const EmbeddingSet& set, const Episode& episode) {
  const std::size_t n = episode.n_way();
  if (episode.k_shot == 0 || episode.q_query == 0 ||
      episode.support.size() != n * episode.k_shot || episode.query.size() != n * episode.q_query) {
    throw Error(ErrorCode::InvalidConfig, "episode block sizes do not match N, K, Q");
  }
  std::unordered_set<std::uint32_t> seen;
  auto check = [&](std::uint32_t row, std::size_t j) {
    if (row >= set.size()) throw Error(ErrorCode::DimensionMismatch, "episode row out of range");
    if (set.label(row) != episode.classes[j]) {
      throw Error(ErrorCode::InvalidConfig, "episode row " + std::to_string(row) + " not in class " +
                                                std::to_string(episode.classes[j]));
    }
    if (!seen.insert(row).second) {
      throw Error(ErrorCode::InvalidConfig, "episode row " + std::to_string(row) + " used twice");
    }
  };
  for (std::size_t j = 0; j < n; ++j) {
    for (auto r : episode.support_of(j)) check(r, j);
    for (auto r : episode.query_of(j)) check(r, j);
  }
}

}  // namespace fewshot

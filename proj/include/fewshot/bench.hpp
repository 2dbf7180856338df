#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewshot/opta.hpp"

namespace fewshot {

enum class Method { Proto, Opta };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

struct EvalConfig {
  SinkhornConfig sinkhorn;
  CostMetric metric = CostMetric::SqEuclideanNormalized;
  FusionMode fusion = FusionMode::Concat;  // recorded in the report; fusion itself happens at load time
  std::size_t threads = 1;
  bool keep_per_episode = true;
  /// Called with the number of finished episodes at every multiple of 1000.
  std::function<void(std::size_t)> progress;
};

struct EvalReport {
  Method method = Method::Proto;
  EpisodeSpec spec;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_episode_acc;  // empty unless kept
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample std, n-1 divisor
  double ci95 = 0.0;     // 1.96 * std / sqrt(episodes)
  double epsilon = 0.0;
  std::size_t sinkhorn_iters = 0;
  double sinkhorn_tol = 0.0;
  std::size_t passes = 0;
  CostMetric metric = CostMetric::SqEuclideanNormalized;
  FusionMode fusion = FusionMode::Concat;
  std::size_t sinkhorn_nonconverged = 0;
  double wall_time_s = 0.0;
};

struct SampleStats {
  double mean = 0.0;
  double std = 0.0;
  double ci95 = 0.0;
};

/// Mean, n-1 sample std and 1.96 * std / sqrt(n), accumulated in index order.
SampleStats sample_stats(std::span<const double> values);

double episode_accuracy_for(const EmbeddingSet& set, const Episode& episode, Method method,
                            const EvalConfig& cfg, std::size_t* nonconverged = nullptr);

/// Evaluates episodes 0..episodes-1 (episode i uses child_seed(seed, i)).
/// The report (excluding wall time) is identical for every thread count.
EvalReport run_eval(const EmbeddingSet& set, const EpisodeSpec& spec, Method method, const EvalConfig& cfg,
                    std::size_t episodes, std::uint64_t seed);

/// One run_eval per (K, Q) grid point, all with the same base seed.
std::vector<EvalReport> sweep(const EmbeddingSet& set, std::uint32_t n_way, std::span<const std::uint32_t> k_list,
                              std::span<const std::uint32_t> q_list, Method method, const EvalConfig& cfg,
                              std::size_t episodes, std::uint64_t seed);

/// Canonical report JSON: sorted keys, floats at 17 significant digits, no
/// whitespace. Wall time is only written when `include_timing` is set.
std::string report_to_json(const EvalReport& report, bool include_timing = false);
nlohmann::json report_json_value(const EvalReport& report, bool include_timing = false);

/// Canonical serialization used for reports: sorted keys, %.17g floats.
std::string canonical_dump(const nlohmann::json& value);

/// "k,q,mean_acc,ci95" header plus one row per report.
std::string sweep_to_csv(std::span<const EvalReport> reports);

struct SynthSpec {
  std::uint32_t classes = 5;
  std::uint32_t per_class = 100;
  std::uint32_t dim = 32;
  double mean_radius = 4.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class means uniform on the radius-R sphere; samples = mean + N(0, sigma^2 I).
/// Rows are class-major with balanced labels.
EmbeddingSet generate_synthetic(const SynthSpec& spec);

/// generate_synthetic rows as cls tokens, plus `patches` noisy copies of each
/// row (same sigma) with attention weights uniform in [0.05, 1.05).
TokenEmbeddingSet generate_synthetic_tokens(const SynthSpec& spec, std::uint32_t patches);

}  // namespace fewshot

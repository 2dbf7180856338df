#include "fewshot/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "fewshot/error.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

std::string_view to_string(Method method) { return method == Method::Proto ? "proto" : "opta"; }

Method parse_method(std::string_view name) {
  if (name == "proto") return Method::Proto;
  if (name == "opta") return Method::Opta;
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(name) + "'");
}

SampleStats sample_stats(std::span<const double> values) {
  SampleStats s;
  const std::size_t n = values.size();
  if (n == 0) return s;
  // Shift by the first value: exact for constant input, stable otherwise.
  const double shift = values[0];
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  const double centre = sum / static_cast<double>(n);
  s.mean = shift + centre;
  if (n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - shift - centre) * (v - shift - centre);
    s.std = std::sqrt(ss / static_cast<double>(n - 1));
  }
  s.ci95 = 1.96 * s.std / std::sqrt(static_cast<double>(n));
  return s;
}

double episode_accuracy_for(const EmbeddingSet& set, const Episode& episode, Method method,
                            const EvalConfig& cfg, std::size_t* nonconverged) {
  if (method == Method::Proto) {
    const auto preds = classify(set, episode, compute_prototypes(set, episode));
    return episode_accuracy(preds, episode);
  }
  const auto result = opta_run(set, episode, cfg.sinkhorn, cfg.metric);
  if (nonconverged != nullptr) *nonconverged += result.nonconverged_solves;
  return episode_accuracy(result.predictions, episode);
}

EvalReport run_eval(const EmbeddingSet& set, const EpisodeSpec& spec, Method method, const EvalConfig& cfg,
                    std::size_t episodes, std::uint64_t seed) {
  spec.validate();
  cfg.sinkhorn.validate();
  if (episodes == 0) throw Error(ErrorCode::InvalidConfig, "episodes must be >= 1");
  // Fail fast on infeasible specs instead of inside a worker.
  sample_episode(set, spec, seed, 0);

  const auto start = std::chrono::steady_clock::now();

  struct Slot {
    double accuracy = 0.0;
    std::size_t nonconverged = 0;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(episodes);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < episodes; i = next.fetch_add(1)) {
      Slot& slot = slots[i];
      try {
        const Episode ep = sample_episode(set, spec, seed, i);
        slot.accuracy = episode_accuracy_for(set, ep, method, cfg, &slot.nonconverged);
      } catch (...) {
        slot.error = std::current_exception();
      }
      const std::size_t finished = done.fetch_add(1) + 1;
      if (cfg.progress && finished % 1000 == 0) {
        std::lock_guard lock(progress_mu);
        cfg.progress(finished);
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, episodes));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  EvalReport report;
  report.method = method;
  report.spec = spec;
  report.episodes = episodes;
  report.seed = seed;
  report.epsilon = cfg.sinkhorn.epsilon;
  report.sinkhorn_iters = cfg.sinkhorn.max_iters;
  report.sinkhorn_tol = cfg.sinkhorn.tol;
  report.passes = cfg.sinkhorn.passes;
  report.metric = cfg.metric;
  report.fusion = cfg.fusion;

  std::vector<double> acc(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    if (slots[i].error) std::rethrow_exception(slots[i].error);
    acc[i] = slots[i].accuracy;
    report.sinkhorn_nonconverged += slots[i].nonconverged;
  }
  const SampleStats stats = sample_stats(acc);
  report.mean_acc = stats.mean;
  report.std_acc = stats.std;
  report.ci95 = stats.ci95;
  if (cfg.keep_per_episode) report.per_episode_acc = std::move(acc);
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<EvalReport> sweep(const EmbeddingSet& set, std::uint32_t n_way, std::span<const std::uint32_t> k_list,
                              std::span<const std::uint32_t> q_list, Method method, const EvalConfig& cfg,
                              std::size_t episodes, std::uint64_t seed) {
  if (k_list.empty() || q_list.empty()) throw Error(ErrorCode::InvalidConfig, "sweep needs at least one K and one Q");
  std::vector<EvalReport> out;
  out.reserve(k_list.size() * q_list.size());
  for (auto k : k_list) {
    for (auto q : q_list) {
      out.push_back(run_eval(set, EpisodeSpec{n_way, k, q}, method, cfg, episodes, seed));
    }
  }
  return out;
}

// --- serialization ----------------------------------------------------------

namespace {

void dump_into(const nlohmann::json& v, std::string& out) {
  switch (v.type()) {
    case nlohmann::json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [key, item] : v.items()) {  // std::map: already sorted
        if (!first) out += ',';
        first = false;
        out += nlohmann::json(key).dump();
        out += ':';
        dump_into(item, out);
      }
      out += '}';
      break;
    }
    case nlohmann::json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        dump_into(v[i], out);
      }
      out += ']';
      break;
    }
    case nlohmann::json::value_t::number_float: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
      out += buf;
      break;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string canonical_dump(const nlohmann::json& value) {
  std::string out;
  dump_into(value, out);
  return out;
}

nlohmann::json report_json_value(const EvalReport& r, bool include_timing) {
  nlohmann::json j;
  j["method"] = to_string(r.method);
  j["n_way"] = r.spec.n_way;
  j["k_shot"] = r.spec.k_shot;
  j["q_query"] = r.spec.q_query;
  j["episodes"] = r.episodes;
  j["seed"] = r.seed;
  j["mean_acc"] = r.mean_acc;
  j["std_acc"] = r.std_acc;
  j["ci95"] = r.ci95;
  j["per_episode_acc"] = r.per_episode_acc;
  j["config"] = {
      {"epsilon", r.epsilon},
      {"sinkhorn_iters", r.sinkhorn_iters},
      {"sinkhorn_tol", r.sinkhorn_tol},
      {"passes", r.passes},
      {"cost_metric", to_string(r.metric)},
      {"fusion", to_string(r.fusion)},
  };
  j["sinkhorn_nonconverged"] = r.sinkhorn_nonconverged;
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

std::string report_to_json(const EvalReport& report, bool include_timing) {
  return canonical_dump(report_json_value(report, include_timing));
}

std::string sweep_to_csv(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << "k,q,mean_acc,ci95\n";
  char buf[80];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%u,%u,%.17g,%.17g\n", r.spec.k_shot, r.spec.q_query, r.mean_acc, r.ci95);
    out << buf;
  }
  return out.str();
}

// --- synthetic data ---------------------------------------------------------

void SynthSpec::validate() const {
  if (classes == 0 || per_class == 0 || dim == 0) {
    throw Error(ErrorCode::InvalidConfig, "classes, per_class and dim must be positive");
  }
  if (!(mean_radius >= 0.0) || !(noise_sigma >= 0.0) || !std::isfinite(mean_radius) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::InvalidConfig, "mean_radius and noise_sigma must be finite and >= 0");
  }
}

EmbeddingSet generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto d = static_cast<Eigen::Index>(spec.dim);

  Matrix means(static_cast<Eigen::Index>(spec.classes), d);
  for (Eigen::Index c = 0; c < means.rows(); ++c) {
    Vector dir(d);
    double norm = 0.0;
    do {
      for (Eigen::Index k = 0; k < d; ++k) dir[k] = rng.normal();
      norm = dir.norm();
    } while (norm == 0.0);
    means.row(c) = (spec.mean_radius / norm) * dir.transpose();
  }

  const std::size_t n = static_cast<std::size_t>(spec.classes) * spec.per_class;
  MatrixF features(static_cast<Eigen::Index>(n), d);
  std::vector<std::uint32_t> labels(n);
  std::size_t row = 0;
  for (std::uint32_t c = 0; c < spec.classes; ++c) {
    for (std::uint32_t s = 0; s < spec.per_class; ++s, ++row) {
      for (Eigen::Index k = 0; k < d; ++k) {
        features(static_cast<Eigen::Index>(row), k) = static_cast<float>(means(c, k) + spec.noise_sigma * rng.normal());
      }
      labels[row] = c;
    }
  }
  return EmbeddingSet::create(std::move(features), std::move(labels), spec.classes);
}

TokenEmbeddingSet generate_synthetic_tokens(const SynthSpec& spec, std::uint32_t patches) {
  if (patches == 0) throw Error(ErrorCode::InvalidConfig, "patches must be positive");
  const EmbeddingSet base = generate_synthetic(spec);
  Rng rng(child_seed(spec.seed, 1));
  const auto n = static_cast<Eigen::Index>(base.size());
  const auto d = static_cast<Eigen::Index>(base.dim());
  const auto p = static_cast<Eigen::Index>(patches);
  MatrixF patch(n, p * d), attn(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index k = 0; k < d; ++k) {
        patch(i, j * d + k) = static_cast<float>(base.features()(i, k) + spec.noise_sigma * rng.normal());
      }
      attn(i, j) = static_cast<float>(0.05 + rng.uniform());
    }
  }
  const auto labels = base.labels();
  return TokenEmbeddingSet::create(base.features(), std::move(patch), std::move(attn),
                                   std::vector<std::uint32_t>(labels.begin(), labels.end()), spec.classes);
}

}  // namespace fewshot

#include "fewshot/opta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fewshot/error.hpp"

namespace fewshot {
namespace {

// Warm-up stages for small eps: eps is divided by this factor per stage,
// starting from the cost range, and each stage gets a bounded budget.
constexpr double kScalingFactor = 4.0;
constexpr std::size_t kStageIters = 200;
constexpr double kStageTol = 1e-6;

struct Potentials {
  Vector f;  // per query (row)
  Vector g;  // per prototype (column)
};

// f_i = eps log r_i - eps LSE_j((g_j - D_ij) / eps), then the same for g.
void sinkhorn_sweep(const Matrix& D, double eps, double log_r, double log_c, Potentials& p) {
  const Eigen::Index m = D.rows();
  const Eigen::Index n = D.cols();
  for (Eigen::Index i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) mx = std::max(mx, (p.g[j] - D(i, j)) / eps);
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) s += std::exp((p.g[j] - D(i, j)) / eps - mx);
    p.f[i] = eps * (log_r - mx - std::log(s));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) mx = std::max(mx, (p.f[i] - D(i, j)) / eps);
    double s = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) s += std::exp((p.f[i] - D(i, j)) / eps - mx);
    p.g[j] = eps * (log_c - mx - std::log(s));
  }
}

Matrix plan_from(const Matrix& D, double eps, const Potentials& p) {
  Matrix out(D.rows(), D.cols());
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
      out(i, j) = std::exp((p.f[i] + p.g[j] - D(i, j)) / eps);
    }
  }
  return out;
}

double marginal_violation(const Matrix& plan, double r, double c) {
  const double rows = (plan.rowwise().sum().array() - r).abs().maxCoeff();
  const double cols = (plan.colwise().sum().array() - c).abs().maxCoeff();
  return std::max(rows, cols);
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidConfig, "epsilon must be > 0");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol must be > 0");
  if (max_iters == 0) throw Error(ErrorCode::InvalidConfig, "max_iters must be positive");
  if (passes == 0) throw Error(ErrorCode::InvalidConfig, "passes must be >= 1");
}

std::string_view to_string(CostMetric metric) {
  switch (metric) {
    case CostMetric::SqEuclideanNormalized: return "sq-euclidean-normalized";
    case CostMetric::Euclidean: return "euclidean";
    case CostMetric::OneMinusCosine: return "one-minus-cosine";
  }
  return "?";
}

CostMetric parse_cost_metric(std::string_view name) {
  if (name == "sq-euclidean-normalized") return CostMetric::SqEuclideanNormalized;
  if (name == "euclidean") return CostMetric::Euclidean;
  if (name == "one-minus-cosine") return CostMetric::OneMinusCosine;
  throw Error(ErrorCode::InvalidConfig, "unknown cost metric '" + std::string(name) + "'");
}

CostMatrix cost_matrix(const Matrix& queries, const Prototypes& protos, CostMetric metric) {
  if (queries.cols() != protos.matrix.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "query and prototype dimensions differ");
  }
  CostMatrix out;
  out.metric = metric;
  out.matrix.resize(queries.rows(), protos.matrix.rows());
  switch (metric) {
    case CostMetric::SqEuclideanNormalized: {
      const Matrix q = normalize_rows(queries);
      const Matrix p = normalize_rows(protos.matrix);
      for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < p.rows(); ++j) out.matrix(i, j) = (q.row(i) - p.row(j)).squaredNorm();
      break;
    }
    case CostMetric::Euclidean:
      for (Eigen::Index i = 0; i < queries.rows(); ++i)
        for (Eigen::Index j = 0; j < protos.matrix.rows(); ++j)
          out.matrix(i, j) = (queries.row(i) - protos.matrix.row(j)).norm();
      break;
    case CostMetric::OneMinusCosine:
      for (Eigen::Index i = 0; i < queries.rows(); ++i)
        for (Eigen::Index j = 0; j < protos.matrix.rows(); ++j)
          out.matrix(i, j) = 1.0 - cosine_sim(queries.row(i).transpose(), protos.matrix.row(j).transpose());
      break;
  }
  if (!out.matrix.allFinite()) throw Error(ErrorCode::NonFiniteCost, "cost matrix has NaN/Inf");
  return out;
}

TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornConfig& cfg) {
  cfg.validate();
  const Matrix& D = cost.matrix;
  if (D.rows() == 0 || D.cols() == 0) throw Error(ErrorCode::DimensionMismatch, "empty cost matrix");
  if (!D.allFinite()) throw Error(ErrorCode::NonFiniteCost, "cost matrix has NaN/Inf");

  const double r = 1.0 / static_cast<double>(D.rows());
  const double c = 1.0 / static_cast<double>(D.cols());
  const double log_r = std::log(r);
  const double log_c = std::log(c);

  Potentials pot{Vector::Zero(D.rows()), Vector::Zero(D.cols())};
  TransportPlan plan;

  // eps-scaling warm start: only the final stage runs at the requested eps.
  const double range = D.maxCoeff() - D.minCoeff();
  double stage_eps = cfg.epsilon;
  while (stage_eps * kScalingFactor < range) stage_eps *= kScalingFactor;
  for (; stage_eps > cfg.epsilon * 1.5; stage_eps /= kScalingFactor) {
    for (std::size_t it = 0; it < kStageIters; ++it) {
      sinkhorn_sweep(D, stage_eps, log_r, log_c, pot);
      ++plan.iters_used;
      if (marginal_violation(plan_from(D, stage_eps, pot), r, c) < kStageTol) break;
    }
  }

  const double eps = cfg.epsilon;
  Potentials best = pot;
  double best_violation = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    sinkhorn_sweep(D, eps, log_r, log_c, pot);
    ++plan.iters_used;
    const double v = marginal_violation(plan_from(D, eps, pot), r, c);
    if (v < best_violation) {
      best_violation = v;
      best = pot;
    }
    if (v < cfg.tol) {
      plan.converged = true;
      break;
    }
  }

  plan.matrix = plan_from(D, eps, best);
  plan.marginal_violation = best_violation;
  if (!plan.matrix.allFinite()) throw Error(ErrorCode::NonFiniteCost, "transport plan became non-finite");
  return plan;
}

Prototypes transport_prototypes(const TransportPlan& plan, const Matrix& queries) {
  if (plan.matrix.rows() != queries.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "plan rows differ from query count");
  }
  Matrix normalized = plan.matrix;
  for (Eigen::Index i = 0; i < normalized.rows(); ++i) {
    const double s = normalized.row(i).sum();
    if (!(s > 0.0)) throw Error(ErrorCode::ZeroRow, "plan row " + std::to_string(i) + " sums to zero");
    normalized.row(i) /= s;
  }
  Prototypes out;
  out.matrix = normalized.transpose() * queries;
  out.source = PrototypeSource::OptaTransported;
  return out;
}

OptaResult opta_run(const EmbeddingSet& set, const Episode& episode, const SinkhornConfig& cfg,
                    CostMetric metric) {
  cfg.validate();
  const Matrix queries = set.gather(episode.query);
  OptaResult result;
  result.prototypes = compute_prototypes(set, episode);
  for (std::size_t pass = 0; pass < cfg.passes; ++pass) {
    const CostMatrix cost = cost_matrix(queries, result.prototypes, metric);
    result.last_plan = sinkhorn(cost, cfg);
    if (!result.last_plan.converged) ++result.nonconverged_solves;
    result.prototypes = transport_prototypes(result.last_plan, queries);
  }
  result.predictions = classify_rows(queries, result.prototypes);
  return result;
}

std::vector<Prediction> opta_classify(const EmbeddingSet& set, const Episode& episode,
                                      const SinkhornConfig& cfg, CostMetric metric) {
  return opta_run(set, episode, cfg, metric).predictions;
}

}  // namespace fewshot

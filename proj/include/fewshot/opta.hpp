#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "fewshot/protonet.hpp"

namespace fewshot {

struct SinkhornConfig {
  double epsilon = 0.1;
  std::size_t max_iters = 1000;
  double tol = 1e-8;        // L-infinity marginal violation
  std::size_t passes = 1;   // OpTA repetitions

  void validate() const;
};

enum class CostMetric { SqEuclideanNormalized, Euclidean, OneMinusCosine };

std::string_view to_string(CostMetric metric);
CostMetric parse_cost_metric(std::string_view name);

struct CostMatrix {
  Matrix matrix;  // NQ x N
  CostMetric metric = CostMetric::SqEuclideanNormalized;
};

/// Coupling between NQ queries and N prototypes with uniform marginals
/// r = 1/NQ and c = 1/N.
struct TransportPlan {
  Matrix matrix;
  bool converged = false;
  std::size_t iters_used = 0;
  double marginal_violation = 0.0;  // L-infinity, both marginals
};

/// Pairwise query-to-prototype distances. The default metric is the squared
/// Euclidean distance between L2-normalized rows, i.e. 2 - 2cos.
CostMatrix cost_matrix(const Matrix& queries, const Prototypes& protos,
                       CostMetric metric = CostMetric::SqEuclideanNormalized);

/// Entropic OT: argmin <pi, D> - eps * H(pi) over the uniform-marginal
/// transportation polytope, solved with log-domain Sinkhorn iterations on the
/// dual potentials (with eps-scaling warm starts for small eps).
///
/// Stops once both marginals are within `tol` (L-infinity). If `max_iters` is
/// exhausted first, the iterate with the smallest violation is returned with
/// converged = false.
TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornConfig& cfg);

/// Row-normalizes the plan (each row sums to 1) and maps the queries through
/// it: P = pi_hat^T * Z. Columns of pi_hat sum to Q, so P is Q-scaled.
Prototypes transport_prototypes(const TransportPlan& plan, const Matrix& queries);

struct OptaResult {
  std::vector<Prediction> predictions;
  Prototypes prototypes;    // final transported prototypes
  TransportPlan last_plan;
  std::size_t nonconverged_solves = 0;
};

/// `cfg.passes` rounds of {cost -> sinkhorn -> transport} starting from the
/// support-mean prototypes, then cosine classification of every query
/// against the final transported prototypes.
OptaResult opta_run(const EmbeddingSet& set, const Episode& episode, const SinkhornConfig& cfg,
                    CostMetric metric = CostMetric::SqEuclideanNormalized);

std::vector<Prediction> opta_classify(const EmbeddingSet& set, const Episode& episode,
                                      const SinkhornConfig& cfg,
                                      CostMetric metric = CostMetric::SqEuclideanNormalized);

}  // namespace fewshot

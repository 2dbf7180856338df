#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fewshot {

struct LossValue {
  std::string label;  // L_cls, L_patch, L_MSE, L_BCE, ema[i]
  double value = 0.0;
};

struct FixtureResult {
  std::string name;
  std::vector<LossValue> values;
};

struct FixtureOptions {
  std::optional<double> rho;     // overrides a fixture's own "rho"
  bool normalize = false;        // mean instead of raw sums for L_patch / L_MSE
};

/// Evaluates every fixture in `doc` (see parse_fixtures). Beyond the
/// distillation fields a fixture may carry "pair_batch" (B x d rows, with an
/// optional "rho") for L_BCE, and "ema": {"teacher", "student", "momentum"}.
std::vector<FixtureResult> evaluate_fixtures(const nlohmann::json& doc, const FixtureOptions& opts = {});

/// One "<name> <label> <value>" line per loss, values at 12 significant digits.
std::string format_fixture_results(const std::vector<FixtureResult>& results);

}  // namespace fewshot

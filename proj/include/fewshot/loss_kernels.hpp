#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fewshot {

// Forward-only reference versions of the teacher/student pretraining
// objectives, for diffing external trainers against plain scalar math.

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kDistributionTol = 1e-6;

/// -sum_k x_k log(max(y_k, 1e-12)). Both inputs must be nonnegative and sum
/// to 1 within 1e-6 (UnnormalizedDistribution otherwise).
double cross_entropy(std::span<const double> x, std::span<const double> y);

struct DistillationFixture {
  std::string name;
  std::vector<double> teacher_cls;
  std::vector<double> student_cls;
  std::vector<bool> mask;                          // length M
  std::vector<std::vector<double>> teacher_patch;  // M x K_out
  std::vector<std::vector<double>> student_patch;  // M x K_out
  std::vector<double> y_masked;                    // Y_m
  std::vector<double> y_target;                    // \bar{Y}_m

  void validate() const;
};

/// H(teacher_cls, student_cls).
double loss_cls(const DistillationFixture& fix);

/// sum_i mask_i * H(teacher_patch_i, student_patch_i); with
/// `normalize_by_mask` the sum is divided by the masked count (0 if none).
double loss_patch(const DistillationFixture& fix, bool normalize_by_mask = false);

/// sum (Y_m - Ybar_m)^2; with `normalize` the mean instead of the sum.
double loss_mse(const DistillationFixture& fix, bool normalize = false);
double loss_mse(std::span<const double> y, std::span<const double> y_target, bool normalize = false);

/// m * teacher + (1 - m) * student, m in [0, 1].
std::vector<double> ema_update(std::span<const double> teacher, std::span<const double> student, double momentum);

/// One fixture object, or {"fixtures": [...]}. Keys: name, teacher_cls,
/// student_cls, mask, teacher_patch, student_patch, y_masked, y_target.
/// Missing patch/MSE blocks default to empty. Throws ParseError.
std::vector<DistillationFixture> parse_fixtures(const nlohmann::json& doc);
DistillationFixture fixture_from_json(const nlohmann::json& obj);

}  // namespace fewshot

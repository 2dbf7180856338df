#include "fewshot/loss_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fewshot/error.hpp"

namespace fewshot {
namespace {

void check_distribution(std::span<const double> p, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::UnnormalizedDistribution, std::string(what) + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDistributionTol) {
    throw Error(ErrorCode::UnnormalizedDistribution, std::string(what) + " sums to " + std::to_string(sum));
  }
}

std::vector<double> numbers(const nlohmann::json& v, const char* key) {
  if (!v.is_array()) throw Error(ErrorCode::ParseError, std::string(key) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw Error(ErrorCode::ParseError, std::string(key) + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

double cross_entropy(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "distributions differ in length");
  check_distribution(x, "target distribution");
  check_distribution(y, "predicted distribution");
  double h = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] == 0.0) continue;
    h -= x[k] * std::log(std::max(y[k], kLogClamp));
  }
  // -x log y with x, y <= 1 is >= 0; only rounding can push it below.
  return std::max(h, 0.0);
}

void DistillationFixture::validate() const {
  if (teacher_patch.size() != mask.size() || student_patch.size() != mask.size()) {
    throw Error(ErrorCode::LengthMismatch, "patch distributions must have one row per mask entry");
  }
  if (y_masked.size() != y_target.size()) {
    throw Error(ErrorCode::LengthMismatch, "Y_m and its target differ in length");
  }
}

double loss_cls(const DistillationFixture& fix) { return cross_entropy(fix.teacher_cls, fix.student_cls); }

double loss_patch(const DistillationFixture& fix, bool normalize_by_mask) {
  fix.validate();
  double total = 0.0;
  std::size_t masked = 0;
  for (std::size_t i = 0; i < fix.mask.size(); ++i) {
    if (!fix.mask[i]) continue;
    total += cross_entropy(fix.teacher_patch[i], fix.student_patch[i]);
    ++masked;
  }
  if (normalize_by_mask) return masked == 0 ? 0.0 : total / static_cast<double>(masked);
  return total;
}

double loss_mse(std::span<const double> y, std::span<const double> y_target, bool normalize) {
  if (y.size() != y_target.size()) throw Error(ErrorCode::LengthMismatch, "Y_m and its target differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double diff = y[i] - y_target[i];
    total += diff * diff;
  }
  if (normalize) return y.empty() ? 0.0 : total / static_cast<double>(y.size());
  return total;
}

double loss_mse(const DistillationFixture& fix, bool normalize) {
  return loss_mse(fix.y_masked, fix.y_target, normalize);
}

std::vector<double> ema_update(std::span<const double> teacher, std::span<const double> student, double momentum) {
  if (teacher.size() != student.size()) throw Error(ErrorCode::LengthMismatch, "teacher and student differ in length");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw Error(ErrorCode::InvalidConfig, "EMA momentum must be in [0, 1]");
  std::vector<double> out(teacher.size());
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    out[i] = momentum * teacher[i] + (1.0 - momentum) * student[i];
  }
  return out;
}

DistillationFixture fixture_from_json(const nlohmann::json& obj) {
  if (!obj.is_object()) throw Error(ErrorCode::ParseError, "fixture must be a JSON object");
  DistillationFixture fix;
  if (obj.contains("name")) {
    if (!obj["name"].is_string()) throw Error(ErrorCode::ParseError, "name must be a string");
    fix.name = obj["name"].get<std::string>();
  }
  for (const char* key : {"teacher_cls", "student_cls"}) {
    if (!obj.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing ") + key);
  }
  fix.teacher_cls = numbers(obj["teacher_cls"], "teacher_cls");
  fix.student_cls = numbers(obj["student_cls"], "student_cls");
  if (obj.contains("mask")) {
    const auto& m = obj["mask"];
    if (!m.is_array()) throw Error(ErrorCode::ParseError, "mask must be an array");
    for (const auto& v : m) {
      if (v.is_boolean()) fix.mask.push_back(v.get<bool>());
      else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) fix.mask.push_back(v.get<int>() == 1);
      else throw Error(ErrorCode::ParseError, "mask entries must be booleans or 0/1");
    }
  }
  for (auto [key, dst] : {std::pair{"teacher_patch", &fix.teacher_patch}, std::pair{"student_patch", &fix.student_patch}}) {
    if (!obj.contains(key)) continue;
    if (!obj[key].is_array()) throw Error(ErrorCode::ParseError, std::string(key) + " must be an array of arrays");
    for (const auto& row : obj[key]) dst->push_back(numbers(row, key));
  }
  if (obj.contains("y_masked")) fix.y_masked = numbers(obj["y_masked"], "y_masked");
  if (obj.contains("y_target")) fix.y_target = numbers(obj["y_target"], "y_target");
  fix.validate();
  return fix;
}

std::vector<DistillationFixture> parse_fixtures(const nlohmann::json& doc) {
  std::vector<DistillationFixture> out;
  if (doc.is_object() && doc.contains("fixtures")) {
    if (!doc["fixtures"].is_array()) throw Error(ErrorCode::ParseError, "fixtures must be an array");
    for (const auto& f : doc["fixtures"]) out.push_back(fixture_from_json(f));
  } else {
    out.push_back(fixture_from_json(doc));
  }
  return out;
}

}  // namespace fewshot

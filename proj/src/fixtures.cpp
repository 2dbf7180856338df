#include "fewshot/fixtures.hpp"

#include <cstdio>

#include "fewshot/error.hpp"
#include "fewshot/loss_kernels.hpp"
#include "fewshot/pseudo_pair.hpp"

namespace fewshot {
namespace {

std::vector<double> number_array(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array()) throw Error(ErrorCode::ParseError, key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw Error(ErrorCode::ParseError, key + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Matrix matrix_from(const nlohmann::json& rows, const std::string& key) {
  if (!rows.is_array() || rows.empty()) throw Error(ErrorCode::ParseError, key + " must be a non-empty array of rows");
  const auto first = number_array(rows[0], key);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(first.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = number_array(rows[i], key);
    if (row.size() != first.size()) throw Error(ErrorCode::RaggedRow, key + " row " + std::to_string(i));
    for (std::size_t k = 0; k < row.size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
  }
  return m;
}

}  // namespace

std::vector<FixtureResult> evaluate_fixtures(const nlohmann::json& doc, const FixtureOptions& opts) {
  std::vector<nlohmann::json> objects;
  if (doc.is_object() && doc.contains("fixtures")) {
    if (!doc["fixtures"].is_array()) throw Error(ErrorCode::ParseError, "fixtures must be an array");
    for (const auto& f : doc["fixtures"]) objects.push_back(f);
  } else {
    objects.push_back(doc);
  }

  std::vector<FixtureResult> out;
  for (std::size_t idx = 0; idx < objects.size(); ++idx) {
    const auto& obj = objects[idx];
    const DistillationFixture fix = fixture_from_json(obj);
    FixtureResult res;
    res.name = fix.name.empty() ? "fixture" + std::to_string(idx) : fix.name;
    res.values.push_back({"L_cls", loss_cls(fix)});
    res.values.push_back({"L_patch", loss_patch(fix, opts.normalize)});
    res.values.push_back({"L_MSE", loss_mse(fix, opts.normalize)});

    if (obj.contains("pair_batch")) {
      const Matrix batch = matrix_from(obj["pair_batch"], "pair_batch");
      double rho = 1.0;
      if (obj.contains("rho")) {
        if (!obj["rho"].is_number()) throw Error(ErrorCode::ParseError, "rho must be a number");
        rho = obj["rho"].get<double>();
      }
      if (opts.rho) rho = *opts.rho;
      res.values.push_back({"L_BCE", bce_pair_loss(batch, assign_pairs(batch, rho))});
    }
    if (obj.contains("ema")) {
      const auto& e = obj["ema"];
      if (!e.is_object() || !e.contains("teacher") || !e.contains("student") || !e.contains("momentum") ||
          !e["momentum"].is_number()) {
        throw Error(ErrorCode::ParseError, "ema needs teacher, student and numeric momentum");
      }
      const auto updated = ema_update(number_array(e["teacher"], "ema.teacher"),
                                      number_array(e["student"], "ema.student"), e["momentum"].get<double>());
      for (std::size_t i = 0; i < updated.size(); ++i) {
        res.values.push_back({"ema[" + std::to_string(i) + "]", updated[i]});
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

std::string format_fixture_results(const std::vector<FixtureResult>& results) {
  std::string out;
  char buf[64];
  for (const auto& r : results) {
    for (const auto& v : r.values) {
      std::snprintf(buf, sizeof buf, "%.12g", v.value);
      out += r.name + " " + v.label + " " + buf + "\n";
    }
  }
  return out;
}

}  // namespace fewshot

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fewshot/embed_store.hpp"
#include "oracles.hpp"

namespace testutil {

inline std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fewshot_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline oracle::Rows to_rows(const fewshot::Matrix& m) {
  oracle::Rows out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline fewshot::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  fewshot::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

inline fewshot::Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  fewshot::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

/// Random valid fused set: every class gets at least one row.
inline fewshot::EmbeddingSet random_set(std::mt19937_64& rng, std::uint32_t n, std::uint32_t d, std::uint32_t c) {
  std::normal_distribution<float> dist(0.0f, 3.0f);
  fewshot::MatrixF f(n, d);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = dist(rng);
  std::vector<std::uint32_t> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) labels[i] = i < c ? i : static_cast<std::uint32_t>(rng() % c);
  std::shuffle(labels.begin(), labels.end(), rng);
  return fewshot::EmbeddingSet::create(std::move(f), std::move(labels), c);
}

}  // namespace testutil

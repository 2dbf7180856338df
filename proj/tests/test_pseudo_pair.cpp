#include <doctest.h>

#include "fewshot/error.hpp"
#include "fewshot/pseudo_pair.hpp"
#include "test_util.hpp"

using namespace fewshot;

namespace {

/// Loss straight from the definition, on oracle rows.
double bce_oracle(const oracle::Rows& batch, const std::vector<std::uint32_t>& pair_of, const std::vector<bool>& selected) {
  double total = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!selected[i]) continue;
    double inner = oracle::cosine(batch[i], batch[pair_of[i]]);
    inner = std::min(1.0, std::max(1e-7, inner));
    total -= std::log(inner);
    ++count;
  }
  return count ? total / count : 0.0;
}

Matrix random_orthogonal(std::mt19937_64& rng, Eigen::Index d) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(testutil::random_matrix(rng, d, d));
  return qr.householderQ();
}

}  // namespace

TEST_CASE("two rows pair with each other") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto a = assign_pairs(testutil::random_matrix(rng, 2, 4));
    CHECK(a.pair_of == std::vector<std::uint32_t>{1, 0});
  }
}

TEST_CASE("forced geometry and tie-break") {
  Matrix b(3, 2);
  b << 1, 0,  //
      1, 0,   //
      0, 1;
  const auto a = assign_pairs(b);
  CHECK(a.pair_of == std::vector<std::uint32_t>{1, 0, 0});
  CHECK(a.similarity[0] == doctest::Approx(1.0));
  CHECK(a.similarity[2] == doctest::Approx(0.0));
}

TEST_CASE("pairing matches the brute-force scan") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index b = 2 + static_cast<Eigen::Index>(rng() % 100);
    const Matrix batch = testutil::random_matrix(rng, b, 1 + static_cast<Eigen::Index>(rng() % 20));
    const auto a = assign_pairs(batch);
    CHECK(a.pair_of == oracle::nearest_neighbor(testutil::to_rows(batch)));
    for (std::size_t i = 0; i < a.batch_size(); ++i) {
      CHECK(a.pair_of[i] != i);
      CHECK(std::abs(a.similarity[i] - oracle::cosine(testutil::to_rows(batch)[i], testutil::to_rows(batch)[a.pair_of[i]])) < 1e-12);
    }
  }
}

TEST_CASE("top-rho selection") {
  std::mt19937_64 rng(3);
  const Matrix batch = testutil::random_matrix(rng, 10, 5);
  CHECK(assign_pairs(batch, 1.0).num_selected() == 10);
  CHECK(assign_pairs(batch, 0.25).num_selected() == 3);
  CHECK(assign_pairs(batch, 0.01).num_selected() == 1);
  const auto a = assign_pairs(batch, 0.5);
  double min_selected = 2.0, max_rest = -2.0;
  for (std::size_t i = 0; i < 10; ++i) {
    if (a.selected[i]) min_selected = std::min(min_selected, a.similarity[i]);
    else max_rest = std::max(max_rest, a.similarity[i]);
  }
  CHECK(min_selected >= max_rest);
  CHECK_THROWS_AS(assign_pairs(batch, 0.0), Error);
  CHECK_THROWS_AS(assign_pairs(batch, 1.5), Error);
}

TEST_CASE("bce pair loss") {
  SUBCASE("identical rows give zero") {
    const Matrix batch = Matrix::Constant(8, 3, 0.3);
    CHECK(bce_pair_loss(batch, assign_pairs(batch)) == 0.0);
  }
  SUBCASE("orthogonal selected pair hits the clamp") {
    Matrix batch(2, 2);
    batch << 1, 0, 0, 1;
    CHECK(bce_pair_loss(batch, assign_pairs(batch)) == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
    CHECK(-std::log(1e-7) == doctest::Approx(16.118).epsilon(1e-4));
  }
  SUBCASE("matches the definition on random batches") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 30; ++t) {
      const Matrix batch = testutil::random_matrix(rng, 2 + static_cast<Eigen::Index>(rng() % 60), 6);
      const double rho = std::min(1.0, 0.1 + 0.9 * static_cast<double>(rng() % 100) / 99.0);
      const auto a = assign_pairs(batch, rho);
      const double loss = bce_pair_loss(batch, a);
      CHECK(loss >= 0.0);
      CHECK(std::abs(loss - bce_oracle(testutil::to_rows(batch), a.pair_of, a.selected)) < 1e-9);
    }
  }
  SUBCASE("rotation invariance") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
      const Matrix batch = testutil::random_matrix(rng, 40, 8);
      const Matrix rotated = batch * random_orthogonal(rng, 8);
      const auto a = assign_pairs(batch, 0.7);
      const auto b = assign_pairs(rotated, 0.7);
      CHECK(a.pair_of == b.pair_of);
      CHECK(std::abs(bce_pair_loss(batch, a) - bce_pair_loss(rotated, b)) < 1e-9);
    }
  }
  SUBCASE("smaller rho never raises the loss") {
    std::mt19937_64 rng(6);
    const Matrix batch = testutil::random_matrix(rng, 50, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (double rho = 1.0; rho > 0.0; rho -= 0.05) {
      const double loss = bce_pair_loss(batch, assign_pairs(batch, rho));
      CHECK(loss <= prev + 1e-15);
      prev = loss;
    }
  }
}

TEST_CASE("pairing errors and label agreement") {
  try {
    assign_pairs(Matrix::Ones(1, 3));
    FAIL("single row accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BatchTooSmall);
  }
  Matrix b(4, 2);
  b << 1, 0, 1, 0.1, 0, 1, 0.1, 1;
  const auto a = assign_pairs(b);
  const std::vector<std::uint32_t> labels{0, 0, 1, 1};
  CHECK(pair_label_agreement(a, labels) == 1.0);
  const std::vector<std::uint32_t> mixed{0, 1, 1, 0};
  CHECK(pair_label_agreement(a, mixed) == 0.0);
}

#include <doctest.h>

#include <algorithm>
#include <set>

#include "fewshot/episode.hpp"
#include "fewshot/error.hpp"
#include "test_util.hpp"

using namespace fewshot;

namespace {

EmbeddingSet balanced_set(std::uint32_t classes, std::uint32_t per_class, std::uint32_t d = 2) {
  MatrixF f(classes * per_class, d);
  std::vector<std::uint32_t> labels;
  for (std::uint32_t c = 0; c < classes; ++c)
    for (std::uint32_t s = 0; s < per_class; ++s) labels.push_back(c);
  for (Eigen::Index i = 0; i < f.rows(); ++i) f.row(i).setConstant(static_cast<float>(i));
  return EmbeddingSet::create(std::move(f), std::move(labels), classes);
}

ErrorCode sample_error(const EmbeddingSet& set, EpisodeSpec spec) {
  try {
    sample_episode(set, spec, 1, 0);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("sampling should have failed");
  return ErrorCode::ParseError;
}

}  // namespace

TEST_CASE("exactly N classes of K+Q samples covers every sample") {
  const auto set = balanced_set(5, 4);
  const auto ep = sample_episode(set, {5, 1, 3}, 42, 9);
  std::vector<std::uint32_t> all(ep.support);
  all.insert(all.end(), ep.query.begin(), ep.query.end());
  std::sort(all.begin(), all.end());
  std::vector<std::uint32_t> expect(20);
  std::iota(expect.begin(), expect.end(), 0u);
  CHECK(all == expect);
}

TEST_CASE("same seed and episode id give identical episodes") {
  const auto set = balanced_set(12, 30);
  const EpisodeSpec spec{5, 2, 7};
  const auto a = sample_episode(set, spec, 123, 77);
  const auto b = sample_episode(set, spec, 123, 77);
  CHECK(a.classes == b.classes);
  CHECK(a.support == b.support);
  CHECK(a.query == b.query);
  const auto c = sample_episode(set, spec, 123, 78);
  CHECK((c.classes != a.classes || c.support != a.support || c.query != a.query));
}

TEST_CASE("support and query are disjoint and class-consistent") {
  std::mt19937_64 rng(2);
  const auto set = testutil::random_set(rng, 400, 3, 9);
  const EpisodeSpec spec{4, 3, 5};
  for (std::uint64_t id = 0; id < 500; ++id) {
    const auto ep = sample_episode(set, spec, 7, id);
    REQUIRE_NOTHROW(validate_episode(set, ep));
    CHECK(std::set<std::uint32_t>(ep.classes.begin(), ep.classes.end()).size() == 4);
    for (std::size_t j = 0; j < ep.n_way(); ++j) {
      for (auto r : ep.support_of(j)) CHECK(set.label(r) == ep.classes[j]);
      for (auto r : ep.query_of(j)) CHECK(set.label(r) == ep.classes[j]);
    }
  }
}

TEST_CASE("class selection frequency is uniform") {
  // 10 classes, N=5: each class appears with probability 1/2 per episode.
  const auto set = balanced_set(10, 600, 1);
  const int episodes = 10000;
  std::vector<int> counts(10, 0);
  for (int id = 0; id < episodes; ++id) {
    for (auto c : sample_episode(set, {5, 1, 15}, 2024, static_cast<std::uint64_t>(id)).classes) ++counts[c];
  }
  const double expected = episodes * 0.5;
  const double sigma = std::sqrt(episodes * 0.5 * 0.5);
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - expected) < 3.0 * sigma);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // Counts sum to 5*episodes, so 9 degrees of freedom; 99.9% quantile is 27.88.
  CHECK(chi2 < 27.88);
}

TEST_CASE("within-class draws are uniform over positions") {
  const auto set = balanced_set(2, 10, 1);
  std::vector<int> support_hits(20, 0);
  for (std::uint64_t id = 0; id < 20000; ++id) {
    const auto ep = sample_episode(set, {2, 1, 1}, 5, id);
    for (auto r : ep.support) ++support_hits[r];
  }
  // Each row is the support of its class with probability 1/10.
  for (int h : support_hits) CHECK(std::abs(h - 2000) < 4 * std::sqrt(20000 * 0.1 * 0.9));
}

TEST_CASE("row permutation keeps the sampled label sequence") {
  std::mt19937_64 rng(8);
  const auto set = testutil::random_set(rng, 120, 2, 6);
  std::vector<std::uint32_t> perm(set.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixF f(set.size(), set.dim());
  std::vector<std::uint32_t> labels(set.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    f.row(static_cast<Eigen::Index>(i)) = set.features().row(perm[i]);
    labels[i] = set.label(perm[i]);
  }
  const auto shuffled = EmbeddingSet::create(f, labels, 6);
  for (std::uint64_t id = 0; id < 50; ++id) {
    const auto a = sample_episode(set, {3, 2, 4}, 99, id);
    const auto b = sample_episode(shuffled, {3, 2, 4}, 99, id);
    CHECK(a.classes == b.classes);
    std::vector<std::uint32_t> la, lb;
    for (auto r : a.query) la.push_back(set.label(r));
    for (auto r : b.query) lb.push_back(shuffled.label(r));
    CHECK(la == lb);
  }
}

TEST_CASE("eligibility and errors") {
  SUBCASE("too few classes") { CHECK(sample_error(balanced_set(3, 50), {5, 1, 15}) == ErrorCode::NotEnoughClasses); }
  SUBCASE("classes too small") {
    CHECK(sample_error(balanced_set(6, 10), {5, 1, 15}) == ErrorCode::NotEnoughSamplesInClass);
  }
  SUBCASE("bad spec") {
    CHECK(sample_error(balanced_set(6, 10), {5, 0, 1}) == ErrorCode::InvalidConfig);
    CHECK(sample_error(balanced_set(6, 10), {1, 1, 1}) == ErrorCode::InvalidConfig);
  }
  SUBCASE("small classes are skipped, not fatal") {
    // Class 0 has 3 samples, the others 20.
    MatrixF f(3 + 5 * 20, 1);
    f.setOnes();
    std::vector<std::uint32_t> labels(3, 0);
    for (std::uint32_t c = 1; c <= 5; ++c) labels.insert(labels.end(), 20, c);
    const auto set = EmbeddingSet::create(f, labels, 6);
    CHECK(eligible_classes(set, {5, 1, 5}).size() == 5);
    for (std::uint64_t id = 0; id < 100; ++id) {
      const auto ep = sample_episode(set, {5, 1, 5}, 3, id);
      CHECK(std::find(ep.classes.begin(), ep.classes.end(), 0u) == ep.classes.end());
    }
  }
}

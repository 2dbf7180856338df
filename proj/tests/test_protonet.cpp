#include <doctest.h>

#include "fewshot/error.hpp"
#include "fewshot/protonet.hpp"
#include "test_util.hpp"

using namespace fewshot;

TEST_CASE("query at a prototype is assigned to it") {
  Prototypes protos;
  protos.matrix = Matrix::Identity(3, 3) * 2.0;
  Matrix q(1, 3);
  q << 0, 2, 0;
  const auto preds = classify_rows(q, protos);
  CHECK(preds[0].predicted_class == 1);
  CHECK(preds[0].scores == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("identical prototypes tie-break to class 0") {
  Prototypes protos;
  protos.matrix = Matrix::Ones(4, 3);
  std::mt19937_64 rng(1);
  for (const auto& p : classify_rows(testutil::random_matrix(rng, 20, 3), protos)) CHECK(p.predicted_class == 0);
}

TEST_CASE("classify matches the brute-force cosine argmax") {
  std::mt19937_64 rng(10);
  const auto set = testutil::random_set(rng, 300, 8, 10);
  for (std::uint64_t id = 0; id < 200; ++id) {
    const auto ep = sample_episode(set, {5, 2, 3}, 17, id);
    const auto protos = compute_prototypes(set, ep);
    const auto preds = classify(set, ep, protos);
    const auto expect = oracle::nearest_prototype(testutil::to_rows(set.gather(ep.query)), testutil::to_rows(protos.matrix));
    REQUIRE(preds.size() == expect.size());
    for (std::size_t i = 0; i < preds.size(); ++i) CHECK(preds[i].predicted_class == expect[i]);
  }
}

TEST_CASE("accuracy arithmetic") {
  Episode ep;
  ep.classes = {0, 1, 2, 3, 4};
  ep.k_shot = 1;
  ep.q_query = 15;
  ep.query.resize(75);
  std::vector<Prediction> preds(75);
  for (std::size_t i = 0; i < 75; ++i) {
    preds[i].query_index = i;
    preds[i].predicted_class = ep.query_class(i);
  }
  CHECK(episode_accuracy(preds, ep) == 1.0);
  for (auto& p : preds) p.predicted_class = (p.predicted_class + 1) % 5;
  CHECK(episode_accuracy(preds, ep) == 0.0);
  for (std::size_t i = 0; i < 60; ++i) preds[i].predicted_class = ep.query_class(i);
  CHECK(episode_accuracy(preds, ep) == doctest::Approx(0.8).epsilon(1e-15));
  preds.pop_back();
  CHECK_THROWS_AS(episode_accuracy(preds, ep), Error);
}

TEST_CASE("positive scaling and class permutation") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    const Matrix q = testutil::random_matrix(rng, 15, 6);
    Prototypes protos;
    protos.matrix = testutil::random_matrix(rng, 5, 6);
    const auto base = classify_rows(q, protos);

    const double lambda = std::exp(static_cast<double>(rng() % 20) - 10.0);
    Prototypes scaled{protos.matrix * lambda, protos.source};
    const auto after = classify_rows(q * lambda, scaled);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(after[i].predicted_class == base[i].predicted_class);

    // Reversing class order reverses the predicted index.
    Prototypes reversed{protos.matrix.colwise().reverse(), protos.source};
    const auto rev = classify_rows(q, reversed);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(rev[i].predicted_class == 4 - base[i].predicted_class);
  }
}

TEST_CASE("dimension checks") {
  Prototypes protos;
  protos.matrix = Matrix::Ones(2, 3);
  CHECK_THROWS_AS(classify_rows(Matrix::Ones(1, 4), protos), Error);
}

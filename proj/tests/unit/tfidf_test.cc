#include <cmath>

#include <doctest.h>

#include "scene_latent/random.h"
#include "scene_latent/tfidf.h"
#include "oracles.h"

namespace ev = scene_latent::events;
namespace tf = scene_latent::tfidf;

using scene_latent::testing::BruteForceTfidf;
using scene_latent::testing::RandomBinaryCorpus;

TEST_CASE("tf-idf matches the brute-force reference") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto corpus = RandomBinaryCorpus(seed, 5, 10, 0.05);
    // One class never fires and one fires everywhere.
    for (auto& m : corpus) {
      m.values.col(9).setZero();
      m.values(0, 8) = 1;
    }
    const auto expected = BruteForceTfidf(corpus);
    const auto stats = tf::DocumentFrequency(corpus);
    CHECK(stats.n_docs == 5);
    CHECK(stats.df(9) == 0);
    CHECK(stats.df(8) == 5);
    for (size_t d = 0; d < corpus.size(); ++d) {
      const auto v = tf::Vectorize(corpus[d], stats);
      CHECK(v.segment_id == corpus[d].segment_id);
      for (int c = 0; c < 10; ++c) {
        CHECK(std::abs(v.weights(c) - expected[d][static_cast<size_t>(c)]) < 1e-12);
      }
    }
  }
}

TEST_CASE("idf of a hand-computed corpus") {
  tf::CorpusStats stats{4, Eigen::VectorXi::Zero(3)};
  stats.df << 0, 1, 4;
  CHECK(tf::InverseDocumentFrequency(stats, 0) == doctest::Approx(std::log(5.0) + 1.0));
  CHECK(tf::InverseDocumentFrequency(stats, 1) == doctest::Approx(std::log(2.5) + 1.0));
  CHECK(tf::InverseDocumentFrequency(stats, 2) == doctest::Approx(1.0));
}

TEST_CASE("term frequency counts active seconds") {
  ev::BinaryEventMatrix m{"s", ev::BinaryValues::Zero(ev::kSeconds, 4)};
  m.values.col(2).head(17).setOnes();
  m.values(40, 0) = 1;
  const auto tfv = tf::TermFrequency(m);
  CHECK(tfv(2) == 17);
  CHECK(tfv(0) == 1);
  CHECK(tfv(1) == 0);
}

TEST_CASE("vectors are unit length with zero weight on silent classes") {
  const auto corpus = RandomBinaryCorpus(9, 12, ev::kClasses, 0.01);
  const auto stats = tf::DocumentFrequency(corpus);
  for (const auto& m : corpus) {
    const auto v = tf::Vectorize(m, stats);
    CHECK(v.weights.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const auto counts = tf::TermFrequency(m);
    for (int c = 0; c < ev::kClasses; ++c) {
      CHECK((v.weights(c) == 0.0) == (counts(c) == 0));
      CHECK(v.weights(c) >= 0.0);
    }
  }
}

TEST_CASE("silent segment yields the zero vector") {
  std::vector<ev::BinaryEventMatrix> corpus = RandomBinaryCorpus(4, 3, 6, 0.1);
  corpus.push_back({"silent", ev::BinaryValues::Zero(ev::kSeconds, 6)});
  const auto stats = tf::DocumentFrequency(corpus);
  CHECK(tf::Vectorize(corpus.back(), stats).weights.isZero());
}

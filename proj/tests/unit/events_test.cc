#include <algorithm>
#include <numeric>

#include <doctest.h>

#include "scene_latent/errors.h"
#include "scene_latent/events.h"
#include "scene_latent/io.h"
#include "scene_latent/random.h"
#include "scene_latent/synth.h"
#include "test_support.h"

namespace ev = scene_latent::events;
using scene_latent::RandomEngine;

namespace {

std::string UniformCsv(int rows, int cols, double value) {
  std::string out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c > 0) out += ',';
      out += scene_latent::FormatDouble(value);
    }
    out += '\n';
  }
  return out;
}

ev::EventProbMatrix RandomMatrix(RandomEngine& rng, const std::string& id) {
  ev::EventProbMatrix m{id, ev::ProbValues(ev::kSeconds, ev::kClasses)};
  for (Eigen::Index i = 0; i < m.values.size(); ++i) {
    m.values.data()[i] = scene_latent::UniformUnit(rng);
  }
  return m;
}

}  // namespace

TEST_CASE("percentile interpolates between order statistics") {
  std::vector<double> pool(10);
  std::iota(pool.begin(), pool.end(), 1.0);
  std::shuffle(pool.begin(), pool.end(), RandomEngine(3));
  // h = 9 * 0.99 = 8.91 between the 9th (9) and 10th (10) values.
  CHECK(ev::PercentileOfPool(pool, 99) == doctest::Approx(9.91).epsilon(1e-14));
  CHECK(ev::PercentileOfPool(pool, 50) == doctest::Approx(5.5).epsilon(1e-14));
  CHECK(ev::PercentileOfPool({4.0}, 99) == 4.0);
  CHECK_THROWS_AS(ev::PercentileOfPool({}, 99), scene_latent::InputError);
  CHECK_THROWS_AS(ev::PercentileOfPool({1.0}, 100), scene_latent::InputError);
}

TEST_CASE("binarization is strict") {
  ev::EventProbMatrix m{"s", ev::ProbValues::Constant(2, 3, 0.5)};
  m.values(0, 0) = 0.75;
  const auto b = ev::Binarize(m, 0.5);
  CHECK(b.values(0, 0) == 1);
  CHECK(b.values.cast<int>().sum() == 1);
  CHECK_THROWS_AS(ev::Binarize(m, 1.5), scene_latent::InputError);
}

TEST_CASE("uniform corpus activates about one percent of entries") {
  RandomEngine rng(42);
  std::vector<ev::EventProbMatrix> corpus;
  for (int i = 0; i < 20; ++i) corpus.push_back(RandomMatrix(rng, "s" + std::to_string(i)));
  const double threshold = ev::ComputeThreshold(corpus);
  CHECK(threshold == doctest::Approx(0.99).epsilon(0.002));
  long active = 0;
  for (const auto& m : corpus) active += ev::Binarize(m, threshold).values.cast<long>().sum();
  const double rate = static_cast<double>(active) / (20.0 * ev::kSeconds * ev::kClasses);
  CHECK(rate == doctest::Approx(0.01).epsilon(0.2));
}

TEST_CASE("threshold is pooled across the user's segments") {
  std::vector<ev::EventProbMatrix> corpus = {{"a", ev::ProbValues::Constant(1, 2, 0.0)},
                                             {"b", ev::ProbValues::Constant(1, 2, 1.0)}};
  // Pool {0, 0, 1, 1}: h = 3 * 0.5 = 1.5.
  CHECK(ev::ComputeThreshold(corpus, 50) == doctest::Approx(0.5));
}

TEST_CASE("probability matrix parsing") {
  const auto m = ev::ParseProbMatrix(UniformCsv(ev::kSeconds, ev::kClasses, 0.25), "seg");
  CHECK(m.segment_id == "seg");
  CHECK(m.values.rows() == ev::kSeconds);
  CHECK(m.values.cols() == ev::kClasses);
  CHECK(m.values(59, 520) == 0.25);

  SUBCASE("round trip is exact") {
    RandomEngine rng(5);
    const auto r = RandomMatrix(rng, "r");
    CHECK(ev::ParseProbMatrix(ev::ProbMatrixToCsv(r), "r").values == r.values);
  }
  SUBCASE("wrong row count") {
    CHECK_THROWS_AS(ev::ParseProbMatrix(UniformCsv(59, ev::kClasses, 0.1), "s"),
                    scene_latent::ShapeError);
  }
  SUBCASE("wrong column count") {
    CHECK_THROWS_AS(ev::ParseProbMatrix(UniformCsv(ev::kSeconds, 520, 0.1), "s"),
                    scene_latent::ShapeError);
  }
  SUBCASE("out of range value") {
    CHECK_THROWS_AS(ev::ParseProbMatrix(UniformCsv(ev::kSeconds, ev::kClasses, 1.5), "s"),
                    scene_latent::RangeError);
  }
  SUBCASE("non-numeric value") {
    std::string csv = UniformCsv(ev::kSeconds, ev::kClasses, 0.1);
    csv.replace(0, 3, "abc");
    CHECK_THROWS_AS(ev::ParseProbMatrix(csv, "s"), scene_latent::ParseError);
  }
}

TEST_CASE("vocabulary load and validation") {
  scene_latent::testing::TempDir dir("vocab");
  const auto vocab = scene_latent::synth::SyntheticVocabulary();
  scene_latent::WriteFile(dir / "vocab.csv", vocab.ToCsv());
  const auto back = ev::EventVocabulary::Load(dir / "vocab.csv");
  CHECK(back.size() == ev::kClasses);
  CHECK(back[7].class_id == vocab[7].class_id);
  CHECK(back.Hash() == vocab.Hash());

  auto entries = vocab.entries();
  entries.pop_back();
  CHECK_THROWS_AS(ev::EventVocabulary{entries}, scene_latent::ValidationError);
  entries = vocab.entries();
  entries[3].class_id = entries[2].class_id;
  CHECK_THROWS_AS(ev::EventVocabulary{entries}, scene_latent::ValidationError);

  scene_latent::WriteFile(dir / "bad.csv", "id,name\n");
  CHECK_THROWS_AS(ev::EventVocabulary::Load(dir / "bad.csv"), scene_latent::ParseError);
}

TEST_CASE("manifest resolves paths and rejects duplicates") {
  scene_latent::testing::TempDir dir("manifest");
  scene_latent::WriteFile(
      dir / "m.jsonl",
      R"({"segment_id":"s1","user_id":"u2","start":"2024-01-01T00:00:00Z","matrix_path":"x/s1.csv"})"
      "\n"
      R"({"segment_id":"s2","user_id":"u1","start":"2024-01-01T00:01:00Z","matrix_path":"x/s2.csv"})"
      "\n");
  const auto entries = ev::LoadManifest(dir / "m.jsonl");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].matrix_path == dir.path() / "x/s1.csv");
  CHECK(entries[1].start == 1704067260);
  CHECK(ev::UsersOf(entries) == std::vector<std::string>{"u1", "u2"});
  CHECK(ev::EntriesForUser(entries, "u1").front().segment_id == "s2");

  scene_latent::WriteFile(
      dir / "dup.jsonl",
      R"({"segment_id":"s1","user_id":"u","start":"2024-01-01T00:00:00Z","matrix_path":"a.csv"})"
      "\n"
      R"({"segment_id":"s1","user_id":"u","start":"2024-01-01T00:01:00Z","matrix_path":"b.csv"})"
      "\n");
  CHECK_THROWS_AS(ev::LoadManifest(dir / "dup.jsonl"), scene_latent::ValidationError);
}

#include <algorithm>
#include <map>
#include <set>

#include <doctest.h>

#include "scene_latent/errors.h"
#include "scene_latent/events.h"
#include "scene_latent/geogrid.h"
#include "scene_latent/io.h"
#include "scene_latent/ontology.h"
#include "scene_latent/synth.h"
#include "test_support.h"

namespace sy = scene_latent::synth;
namespace ev = scene_latent::events;
namespace gg = scene_latent::geogrid;

TEST_CASE("default corpus layout") {
  sy::SynthOptions options;
  options.seed = 3;
  const auto corpus = sy::GenerateCorpus(sy::DefaultProfiles(), options);
  REQUIRE(corpus.manifest.size() == 180);
  CHECK(corpus.matrices.size() == 180);
  CHECK(corpus.fixes.size() == 180);
  std::map<std::string, int> per_scene;
  for (const auto& s : corpus.scene_of_segment) ++per_scene[s];
  CHECK(per_scene == std::map<std::string, int>{{"home", 60}, {"metro", 60}, {"work", 60}});
  for (size_t i = 1; i < corpus.manifest.size(); ++i) {
    CHECK(corpus.manifest[i].start - corpus.manifest[i - 1].start >= 60);
  }
  for (const auto& m : corpus.matrices) {
    CHECK(m.values.minCoeff() >= 0.0);
    CHECK(m.values.maxCoeff() <= 1.0);
  }
}

TEST_CASE("planted events survive binarization") {
  sy::SynthOptions options;
  options.seed = 8;
  const auto corpus = sy::GenerateCorpus(sy::DefaultProfiles(), options);
  const double threshold = ev::ComputeThreshold(corpus.matrices);
  long planted = 0, recovered = 0, spurious = 0, total = 0;
  for (size_t i = 0; i < corpus.matrices.size(); ++i) {
    const auto b = ev::Binarize(corpus.matrices[i], threshold);
    const auto& truth = corpus.planted[i];
    for (Eigen::Index k = 0; k < b.values.size(); ++k) {
      const bool p = truth.data()[k] != 0;
      const bool a = b.values.data()[k] != 0;
      planted += p;
      recovered += p && a;
      spurious += a && !p;
      total += a;
    }
  }
  CHECK(static_cast<double>(recovered) / static_cast<double>(planted) > 0.99);
  CHECK(static_cast<double>(spurious) / static_cast<double>(total) < 0.1);
}

TEST_CASE("grid recovers the scene cells") {
  sy::SynthOptions options;
  options.seed = 2;
  const auto profiles = sy::DefaultProfiles();
  const auto corpus = sy::GenerateCorpus(profiles, options);
  const auto ranking = gg::RankCells(corpus.fixes, options.edge, 10, 300);
  REQUIRE(ranking.size() == 3);
  std::set<std::string> labels;
  for (const auto& rc : ranking) {
    const auto& profile = *std::find_if(profiles.begin(), profiles.end(), [&](const auto& p) {
      return p.name == rc.majority_situational_label;
    });
    CHECK(profile.cell == rc.cell);
    labels.insert(*rc.majority_situational_label);
  }
  CHECK(labels.size() == 3);
}

TEST_CASE("gps dropout removes fixes") {
  sy::SynthOptions options;
  options.seed = 4;
  options.gps_dropout = 0.5;
  const auto corpus = sy::GenerateCorpus(sy::DefaultProfiles(), options);
  CHECK(corpus.fixes.size() > 60);
  CHECK(corpus.fixes.size() < 120);
}

TEST_CASE("generation is deterministic per seed") {
  sy::SynthOptions options;
  options.seed = 5;
  options.segments_per_scene = 10;
  const auto a = sy::GenerateCorpus(sy::DefaultProfiles(), options);
  const auto b = sy::GenerateCorpus(sy::DefaultProfiles(), options);
  options.seed = 6;
  const auto c = sy::GenerateCorpus(sy::DefaultProfiles(), options);
  CHECK(a.matrices[7].values == b.matrices[7].values);
  CHECK(a.matrices[7].values != c.matrices[7].values);
}

TEST_CASE("profile validation") {
  auto profiles = sy::DefaultProfiles();
  profiles[0].active_class_pool = {1, 1};
  CHECK_THROWS_AS(sy::GenerateCorpus(profiles, {}), scene_latent::InputError);
  profiles = sy::DefaultProfiles();
  profiles[1].active_class_pool = {600};
  CHECK_THROWS_AS(sy::GenerateCorpus(profiles, {}), scene_latent::InputError);
  profiles = sy::DefaultProfiles();
  profiles.resize(1);
  CHECK_THROWS_AS(sy::GenerateCorpus(profiles, {}), scene_latent::InputError);
}

TEST_CASE("profiles load from JSON") {
  scene_latent::testing::TempDir dir("profiles");
  scene_latent::WriteFile(dir / "p.json", R"({"user_id": "alice", "profiles": [
    {"name": "a", "active_class_pool": [1, 2, 3], "cell": {"q": 1, "r": 2}},
    {"name": "b", "active_class_pool": [4, 5], "events_per_second_mean": 2.5}]})");
  std::string user;
  const auto profiles = sy::LoadProfiles(dir / "p.json", &user);
  CHECK(user == "alice");
  REQUIRE(profiles.size() == 2);
  CHECK(profiles[0].cell == gg::HexCoord{1, 2});
  CHECK(profiles[1].events_per_second_mean == 2.5);
  scene_latent::WriteFile(dir / "bad.json", R"([{"name": "a"}])");
  CHECK_THROWS_AS(sy::LoadProfiles(dir / "bad.json"), scene_latent::ParseError);
}

TEST_CASE("written corpus is consumable by the loaders") {
  scene_latent::testing::TempDir dir("corpus");
  sy::SynthOptions options;
  options.segments_per_scene = 10;
  const auto corpus = sy::GenerateCorpus(sy::DefaultProfiles(), options);
  sy::WriteCorpus(corpus, dir.path());
  const auto manifest = ev::LoadManifest(dir / "manifest.jsonl");
  REQUIRE(manifest.size() == 30);
  CHECK(ev::LoadProbMatrix(manifest[4].matrix_path).values == corpus.matrices[4].values);
  CHECK(gg::LoadFixes(dir / "fixes.jsonl").size() == 30);
  const auto vocab = ev::EventVocabulary::Load(dir / "vocab.csv");
  const auto graph = scene_latent::ontology::LoadOntology(dir / "ontology.json");
  CHECK(graph.num_nodes() == 521 + 21 + 1);
  for (const auto& e : vocab.entries()) CHECK(graph.index_of(e.class_id) >= 0);
}

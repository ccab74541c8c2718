#include <cmath>
#include <limits>

#include <doctest.h>

#include "scene_latent/errors.h"
#include "scene_latent/geogrid.h"
#include "scene_latent/io.h"
#include "scene_latent/random.h"
#include "test_support.h"

namespace gg = scene_latent::geogrid;
using scene_latent::RandomEngine;
using scene_latent::Uniform;

namespace {

// Nearest centroid over a neighbourhood of the rounded guess; a hexagon is the
// Voronoi cell of its centre, so this is the ground-truth assignment.
gg::HexCoord NearestCentroid(double lat, double lon, double edge) {
  const double r0 = std::round(lat / (1.5 * edge));
  const double q0 = std::round(lon / (std::sqrt(3.0) * edge) - r0 / 2.0);
  gg::HexCoord best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int dq = -3; dq <= 3; ++dq) {
    for (int dr = -3; dr <= 3; ++dr) {
      const gg::HexCoord c{static_cast<std::int64_t>(q0) + dq, static_cast<std::int64_t>(r0) + dr};
      const auto p = gg::HexCentroid(c, edge);
      const double d = (p.lat - lat) * (p.lat - lat) + (p.lon - lon) * (p.lon - lon);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
  }
  return best;
}

gg::GpsFix Fix(scene_latent::UnixSeconds t, gg::HexCoord cell, const char* label = nullptr,
               double edge = gg::kDefaultEdge) {
  const auto c = gg::HexCentroid(cell, edge);
  gg::GpsFix f{"u", t, c.lat, c.lon, std::nullopt};
  if (label != nullptr) f.situational_label = label;
  return f;
}

}  // namespace

TEST_CASE("hex index of a hand-computed point") {
  // q = (sqrt3/3 * 0.001 - 0.003/3) / 0.0015 = -0.2818, r = (2/3 * 0.003) / 0.0015 = 1.3333
  const auto cell = gg::HexIndex(0.003, 0.001, 0.0015);
  CHECK(cell.q == 0);
  CHECK(cell.r == 1);
  CHECK(cell.x() + cell.y() + cell.z() == 0);
}

TEST_CASE("hex centroid of a hand-computed cell") {
  const auto c = gg::HexCentroid({2, -1}, 0.0015);
  CHECK(c.lon == doctest::Approx(0.0015 * (std::sqrt(3.0) * 2 - std::sqrt(3.0) / 2)));
  CHECK(c.lat == doctest::Approx(-0.00225));
}

TEST_CASE("hex index agrees with nearest-centroid search") {
  RandomEngine rng(7);
  for (double edge : {0.0015, 0.01, 1.0}) {
    for (int i = 0; i < 5000; ++i) {
      const double lat = Uniform(rng, -60.0, 60.0) * edge;
      const double lon = Uniform(rng, -60.0, 60.0) * edge;
      const auto expected = NearestCentroid(lat, lon, edge);
      const auto got = gg::HexIndex(lat, lon, edge);
      // Points within rounding noise of a shared border may go either way.
      if (got != expected) {
        const auto a = gg::HexCentroid(got, edge);
        const auto b = gg::HexCentroid(expected, edge);
        const double da = std::hypot(a.lat - lat, a.lon - lon);
        const double db = std::hypot(b.lat - lat, b.lon - lon);
        CHECK(da - db == doctest::Approx(0.0).epsilon(0).scale(edge * 1e-9));
      }
    }
  }
}

TEST_CASE("hex centroid round trip") {
  RandomEngine rng(11);
  for (int i = 0; i < 10000; ++i) {
    const gg::HexCoord cell{static_cast<std::int64_t>(Uniform(rng, -5000, 5000)),
                            static_cast<std::int64_t>(Uniform(rng, -5000, 5000))};
    const auto c = gg::HexCentroid(cell, gg::kDefaultEdge);
    REQUIRE(gg::HexIndex(c.lat, c.lon, gg::kDefaultEdge) == cell);
  }
}

TEST_CASE("hex index rejects non-positive edge and non-finite input") {
  CHECK_THROWS_AS(gg::HexIndex(0.0, 0.0, 0.0), scene_latent::InputError);
  CHECK_THROWS_AS(gg::HexIndex(std::nan(""), 0.0), scene_latent::InputError);
}

TEST_CASE("dwell ranking") {
  const gg::HexCoord a{0, 0}, b{3, 1}, c{-2, 4};
  // a: 100 + 300 (capped from 1000); b: 50; c: last fix dwells 0.
  const std::vector<gg::GpsFix> fixes = {Fix(0, a, "home"), Fix(100, a, "home"),
                                         Fix(1100, b, "shop"), Fix(1150, c)};
  const auto ranking = gg::RankCells(fixes, gg::kDefaultEdge, 10, 300);
  REQUIRE(ranking.size() == 3);
  CHECK(ranking[0].cell == a);
  CHECK(ranking[0].dwell_seconds == 400);
  CHECK(ranking[0].rank == 1);
  CHECK(ranking[0].majority_situational_label == "home");
  CHECK(ranking[1].cell == b);
  CHECK(ranking[1].dwell_seconds == 50);
  CHECK(ranking[2].cell == c);
  CHECK(ranking[2].dwell_seconds == 0);
  CHECK_FALSE(ranking[2].majority_situational_label.has_value());

  SUBCASE("top-k truncates") {
    CHECK(gg::RankCells(fixes, gg::kDefaultEdge, 2, 300).size() == 2);
  }
}

TEST_CASE("dwell ties go to the earlier first visit") {
  const gg::HexCoord a{5, 5}, b{1, 1};
  const std::vector<gg::GpsFix> fixes = {Fix(0, a), Fix(60, b), Fix(120, a)};
  const auto ranking = gg::RankCells(fixes, gg::kDefaultEdge, 10, 300);
  REQUIRE(ranking.size() == 2);
  CHECK(ranking[0].cell == a);
  CHECK(ranking[1].cell == b);
  CHECK(ranking[0].dwell_seconds == ranking[1].dwell_seconds);
}

TEST_CASE("majority label ties pick the smallest label") {
  const gg::HexCoord a{0, 0};
  const std::vector<gg::GpsFix> fixes = {Fix(0, a, "work"), Fix(10, a, "gym"), Fix(20, a, "gym"),
                                         Fix(30, a, "work")};
  CHECK(gg::RankCells(fixes, gg::kDefaultEdge, 1, 300)[0].majority_situational_label == "gym");
}

TEST_CASE("unsorted fixes are rejected") {
  const std::vector<gg::GpsFix> fixes = {Fix(100, {0, 0}), Fix(0, {0, 0})};
  CHECK_THROWS_AS(gg::RankCells(fixes, gg::kDefaultEdge, 10, 300), scene_latent::InputError);
}

TEST_CASE("pseudo labels use the fix nearest the segment midpoint") {
  const gg::HexCoord a{0, 0}, b{4, 0}, far{9, 9};
  const std::vector<gg::GpsFix> fixes = {Fix(0, a, "home"), Fix(1000, b, "work"),
                                         Fix(5000, far, "park")};
  gg::CellRanking ranking = gg::RankCells(fixes, gg::kDefaultEdge, 2, 300);
  const std::vector<gg::SegmentRef> segments = {
      {"s0", "u", 0},      // midpoint 30, fix at 0
      {"s1", "u", 940},    // midpoint 970, fix at 1000
      {"s2", "u", 2000},   // nearest fix is 970 s away
      {"s3", "u", 4950},   // fix at 5000 in an unranked cell
      {"s4", "u", 1090},   // midpoint 1120, exactly at tolerance
  };
  const auto labels = gg::AssignPseudoLabels(segments, fixes, ranking, gg::kDefaultEdge, 120);
  REQUIRE(labels.size() == 5);
  CHECK(labels[0].cell_rank == 1);
  CHECK(labels[0].situational_label == "home");
  CHECK(labels[1].cell_rank == 2);
  CHECK(labels[1].situational_label == "work");
  CHECK_FALSE(labels[2].cell_rank.has_value());
  CHECK_FALSE(labels[2].situational_label.has_value());
  CHECK_FALSE(labels[3].cell_rank.has_value());
  CHECK(labels[3].situational_label == "park");
  CHECK(labels[4].cell_rank == 2);
}

TEST_CASE("fixes load from JSON lines and sort per user") {
  scene_latent::testing::TempDir dir("fixes");
  scene_latent::WriteFile(dir / "fixes.jsonl",
                          R"({"user_id":"b","timestamp":"2024-01-01T00:01:00Z","lat":1,"lon":2})"
                          "\n"
                          R"({"user_id":"a","timestamp":"2024-01-01T00:02:00Z","lat":0,"lon":0,"situational_label":"home"})"
                          "\n"
                          R"({"user_id":"a","timestamp":"2024-01-01T00:00:00Z","lat":0,"lon":0})"
                          "\n");
  const auto fixes = gg::LoadFixes(dir / "fixes.jsonl");
  REQUIRE(fixes.size() == 3);
  CHECK(fixes[0].user_id == "a");
  CHECK(fixes[0].timestamp == 1704067200);
  CHECK(fixes[1].situational_label == "home");
  CHECK(gg::FixesForUser(fixes, "b").size() == 1);

  scene_latent::WriteFile(dir / "bad.jsonl", R"({"user_id":"a","lat":0,"lon":0})" "\n");
  CHECK_THROWS_AS(gg::LoadFixes(dir / "bad.jsonl"), scene_latent::ParseError);
}

TEST_CASE("pseudo labels round trip through JSON lines") {
  scene_latent::testing::TempDir dir("labels");
  const std::vector<gg::PseudoLabeledSegment> labels = {
      {"s0", 1, "home"}, {"s1", std::nullopt, std::nullopt}, {"s2", 3, std::nullopt}};
  scene_latent::WriteFile(dir / "l.jsonl", gg::PseudoLabelsToJsonLines(labels));
  const auto back = gg::LoadPseudoLabels(dir / "l.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[0].cell_rank == 1);
  CHECK(back[0].situational_label == "home");
  CHECK_FALSE(back[1].cell_rank.has_value());
  CHECK(back[2].cell_rank == 3);
}

#include <doctest.h>

#include "scene_latent/embed.h"
#include "scene_latent/errors.h"
#include "scene_latent/io.h"
#include "scene_latent/random.h"
#include "test_support.h"

namespace em = scene_latent::embed;
namespace ev = scene_latent::events;
namespace tf = scene_latent::tfidf;

namespace {

struct Fixture {
  ev::BinaryEventMatrix binary{"seg", ev::BinaryValues::Zero(ev::kSeconds, ev::kClasses)};
  Eigen::MatrixXd class_matrix = Eigen::MatrixXd::Zero(5, ev::kClasses);

  Fixture() {
    scene_latent::RandomEngine rng(8);
    for (Eigen::Index i = 0; i < class_matrix.size(); ++i) {
      class_matrix.data()[i] = scene_latent::Uniform(rng, -1.0, 1.0);
    }
    binary.values(0, 3) = 1;
    binary.values(10, 3) = 1;
    binary.values(59, 400) = 1;
    binary.values(5, 520) = 1;
  }

  em::SegmentEmbedding Build() const {
    const std::vector<ev::BinaryEventMatrix> corpus = {binary};
    return em::BuildSegmentEmbedding(tf::Vectorize(binary, tf::DocumentFrequency(corpus)),
                                     class_matrix, binary);
  }
};

}  // namespace

TEST_CASE("embedding masks untriggered classes") {
  const Fixture f;
  const auto e = f.Build();
  CHECK(e.segment_id == "seg");
  REQUIRE(e.matrix.rows() == 6);
  REQUIRE(e.matrix.cols() == ev::kClasses);
  int nonzero = 0;
  for (Eigen::Index c = 0; c < e.matrix.cols(); ++c) {
    if (!e.matrix.col(c).isZero()) ++nonzero;
  }
  CHECK(nonzero == 3);
  CHECK(e.matrix.col(400).tail(5) == f.class_matrix.col(400));
  CHECK(e.matrix.col(2).isZero());
  // tf 2 against tf 1 with equal idf.
  CHECK(e.matrix(0, 3) == doctest::Approx(2.0 * e.matrix(0, 400)));
}

TEST_CASE("flattening is row-major and inverts") {
  const Fixture f;
  const auto e = f.Build();
  const Eigen::VectorXd flat = e.Flat();
  REQUIRE(flat.size() == em::kFlatDim);
  CHECK(flat(3) == e.matrix(0, 3));
  CHECK(flat(ev::kClasses + 400) == e.matrix(1, 400));
  CHECK(flat(5 * ev::kClasses + 520) == e.matrix(5, 520));
  CHECK(em::Unflatten(flat, 6) == e.matrix);
  CHECK_THROWS_AS(em::Unflatten(flat, 7), scene_latent::ShapeError);
}

TEST_CASE("silent segment embeds to zero") {
  Fixture f;
  f.binary.values.setZero();
  CHECK(f.Build().Flat().isZero());
}

TEST_CASE("class count mismatch is a shape error") {
  const Fixture f;
  const std::vector<ev::BinaryEventMatrix> corpus = {f.binary};
  const auto v = tf::Vectorize(f.binary, tf::DocumentFrequency(corpus));
  CHECK_THROWS_AS(em::BuildSegmentEmbedding(v, Eigen::MatrixXd::Zero(5, 10), f.binary),
                  scene_latent::ShapeError);
}

TEST_CASE("max-abs scaler") {
  std::vector<Eigen::VectorXd> train(2, Eigen::VectorXd(3));
  train[0] << 2.0, -4.0, 0.0;
  train[1] << -1.0, 1.0, 0.0;
  const auto scaler = em::InputScaler::Fit(train);
  CHECK(scaler.scale() == Eigen::Vector3d(2.0, 4.0, 1.0));
  const auto scaled = scaler.Apply(train[0]);
  CHECK(scaled == Eigen::Vector3d(1.0, -1.0, 0.0));
  CHECK(scaler.Invert(scaled) == train[0]);
  for (const auto& v : train) CHECK(scaler.Apply(v).cwiseAbs().maxCoeff() <= 1.0);
  CHECK_THROWS_AS(scaler.Apply(Eigen::VectorXd::Zero(2)), scene_latent::ShapeError);
  CHECK_THROWS_AS(em::InputScaler(Eigen::Vector2d(1.0, 0.0)), scene_latent::ValidationError);
}

TEST_CASE("embedding table csv round trip is exact") {
  scene_latent::testing::TempDir dir("table");
  scene_latent::RandomEngine rng(2);
  em::EmbeddingTable table;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd v(7);
    for (auto& x : v) x = scene_latent::StandardNormal(rng);
    table.segment_ids.push_back("s" + std::to_string(i));
    table.vectors.push_back(v);
  }
  const std::string csv = em::TableToCsv(table, "z");
  CHECK(csv.rfind("segment_id,z0,z1,", 0) == 0);
  scene_latent::WriteFile(dir / "t.csv", csv);
  const auto back = em::LoadTable(dir / "t.csv");
  CHECK(back.segment_ids == table.segment_ids);
  for (size_t i = 0; i < 3; ++i) CHECK(back.vectors[i] == table.vectors[i]);
  CHECK_THROWS_AS(em::ParseTable("id,f0\nx,1\n", "t"), scene_latent::ParseError);
  CHECK_THROWS_AS(em::ParseTable("segment_id,f0,f1\nx,1\n", "t"), scene_latent::ShapeError);
}

#include <benchmark/benchmark.h>

#include "scene_latent/analysis.h"
#include "scene_latent/events.h"
#include "scene_latent/geogrid.h"
#include "scene_latent/ontology.h"
#include "scene_latent/random.h"
#include "scene_latent/tfidf.h"
#include "scene_latent/vae.h"

namespace sl = scene_latent;

namespace {

void BM_HexIndex(benchmark::State& state) {
  sl::RandomEngine rng(1);
  std::vector<std::pair<double, double>> points(4096);
  for (auto& [lat, lon] : points) {
    lat = sl::Uniform(rng, 37.0, 38.0);
    lon = sl::Uniform(rng, -122.5, -121.5);
  }
  size_t i = 0;
  for (auto _ : state) {
    const auto& [lat, lon] = points[i++ & 4095];
    benchmark::DoNotOptimize(sl::geogrid::HexIndex(lat, lon));
  }
}
BENCHMARK(BM_HexIndex);

void BM_RankCells(benchmark::State& state) {
  sl::RandomEngine rng(2);
  std::vector<sl::geogrid::GpsFix> fixes(static_cast<size_t>(state.range(0)));
  sl::UnixSeconds t = 0;
  for (auto& f : fixes) {
    t += 60;
    f = {"u", t, sl::Uniform(rng, 37.7, 37.8), sl::Uniform(rng, -122.5, -122.4), std::nullopt};
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(sl::geogrid::RankCells(fixes, sl::geogrid::kDefaultEdge, 10, 300));
  }
}
BENCHMARK(BM_RankCells)->Arg(1000)->Arg(100000);

std::vector<sl::events::BinaryEventMatrix> Corpus(int docs) {
  sl::RandomEngine rng(3);
  std::vector<sl::events::BinaryEventMatrix> out;
  for (int d = 0; d < docs; ++d) {
    sl::events::BinaryEventMatrix m{
        "s" + std::to_string(d),
        sl::events::BinaryValues::Zero(sl::events::kSeconds, sl::events::kClasses)};
    for (Eigen::Index i = 0; i < m.values.size(); ++i) {
      m.values.data()[i] = sl::UniformUnit(rng) < 0.01;
    }
    out.push_back(std::move(m));
  }
  return out;
}

void BM_Tfidf(benchmark::State& state) {
  const auto corpus = Corpus(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const auto stats = sl::tfidf::DocumentFrequency(corpus);
    for (const auto& m : corpus) benchmark::DoNotOptimize(sl::tfidf::Vectorize(m, stats));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Tfidf)->Arg(180);

void BM_VaeStep(benchmark::State& state) {
  sl::vae::VaeConfig cfg;
  cfg.seed = 4;
  const auto model = sl::vae::InitModel(cfg);
  sl::RandomEngine rng(5);
  sl::vae::Matrix batch(cfg.batch_size, cfg.input_dim);
  for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = sl::Uniform(rng, 0.0, 1.0);
  for (auto _ : state) {
    const auto fwd = sl::vae::Forward(model, batch, sl::vae::Mode::kTrain, rng);
    benchmark::DoNotOptimize(sl::vae::Backward(model, batch, fwd));
  }
  state.SetItemsProcessed(state.iterations() * cfg.batch_size);
}
BENCHMARK(BM_VaeStep)->Unit(benchmark::kMillisecond);

void BM_SkipGram(benchmark::State& state) {
  std::vector<sl::ontology::Node> nodes;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < 632; ++i) {
    nodes.push_back({"/m/" + std::to_string(i), ""});
    if (i > 0) edges.emplace_back((i - 1) / 4, i);
  }
  const sl::ontology::OntologyGraph g(std::move(nodes), std::move(edges));
  sl::ontology::Node2VecConfig cfg;
  cfg.walks_per_node = 4;
  cfg.epochs = 1;
  const auto walks = sl::ontology::GenerateWalks(g, cfg.p, cfg.q, cfg.walk_length,
                                                 cfg.walks_per_node, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sl::ontology::TrainSkipGram(walks, static_cast<int>(g.num_nodes()), cfg, 7));
  }
}
BENCHMARK(BM_SkipGram)->Unit(benchmark::kMillisecond);

void BM_Tsne(benchmark::State& state) {
  sl::RandomEngine rng(8);
  Eigen::MatrixXd points(state.range(0), 16);
  for (Eigen::Index i = 0; i < points.size(); ++i) points.data()[i] = sl::StandardNormal(rng);
  sl::analysis::TsneConfig cfg;
  cfg.seed = 9;
  for (auto _ : state) benchmark::DoNotOptimize(sl::analysis::Tsne(points, cfg));
}
BENCHMARK(BM_Tsne)->Arg(180)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

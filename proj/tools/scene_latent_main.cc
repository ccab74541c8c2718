// scene-latent: command-line driver for the acoustic scene latent pipeline.
//
//   scene-latent synth    --profiles p.json --segments 60 --seed 1 --out data/
//   scene-latent grid     --fixes data/fixes.jsonl --edge 0.0015 --top-k 10
//   scene-latent binarize --manifest data/manifest.jsonl --percentile 99
//   scene-latent tfidf    --manifest data/manifest.jsonl
//   scene-latent node2vec --ontology data/ontology.json --vocab data/vocab.csv
//   scene-latent embed    --manifest ... --ontology ... --vocab ...
//   scene-latent train    --user u --embeddings e.csv --config c.json --seed 1
//   scene-latent encode   --model m.json --embeddings e.csv
//   scene-latent analyze  --model m.json --embeddings e.csv --labels l.jsonl
//   scene-latent run      --config c.json
//
// Exit codes: 0 success, 1 validation error, 2 runtime or numeric error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "scene_latent/analysis.h"
#include "scene_latent/embed.h"
#include "scene_latent/errors.h"
#include "scene_latent/events.h"
#include "scene_latent/geogrid.h"
#include "scene_latent/ontology.h"
#include "scene_latent/pipeline.h"
#include "scene_latent/synth.h"
#include "scene_latent/tfidf.h"
#include "scene_latent/vae.h"

namespace fs = std::filesystem;
namespace sl = scene_latent;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

sl::pipeline::PipelineConfig BaseConfig(const GlobalOptions& g) {
  sl::pipeline::PipelineConfig cfg;
  if (!g.config.empty()) cfg = sl::pipeline::LoadConfig(g.config);
  if (g.seed) sl::pipeline::ApplySeed(cfg, *g.seed);
  return cfg;
}

void Require(const std::string& value, const char* flag) {
  if (value.empty()) throw sl::ValidationError(std::string(flag) + " is required");
}

std::vector<sl::events::EventProbMatrix> LoadMatrices(
    const std::vector<sl::events::SegmentEntry>& entries) {
  std::vector<sl::events::EventProbMatrix> out;
  for (const auto& e : entries) {
    auto m = sl::events::LoadProbMatrix(e.matrix_path);
    m.segment_id = e.segment_id;
    out.push_back(std::move(m));
  }
  return out;
}

// Binarized corpus of one user, in manifest order.
std::vector<sl::events::BinaryEventMatrix> BinarizeUser(
    const std::vector<sl::events::SegmentEntry>& entries, double percentile,
    double* threshold_out) {
  const auto matrices = LoadMatrices(entries);
  const double threshold = sl::events::ComputeThreshold(matrices, percentile);
  if (threshold_out != nullptr) *threshold_out = threshold;
  std::vector<sl::events::BinaryEventMatrix> out;
  for (const auto& m : matrices) out.push_back(sl::events::Binarize(m, threshold));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised latent representations of acoustic scenes"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions global;
  app.add_option("--config", global.config, "Pipeline configuration (JSON)");
  app.add_option("--seed", global.seed, "Global seed (overrides the config)");
  app.add_option("--out", global.out, "Output directory");

  // grid
  auto* grid = app.add_subcommand("grid", "Rank hexagonal cells by dwell time");
  std::string fixes_path, grid_manifest;
  std::optional<double> edge, max_gap, tolerance;
  std::optional<int> top_k;
  grid->add_option("--fixes", fixes_path, "GPS fixes (JSON Lines)")->required();
  grid->add_option("--edge", edge, "Hexagon edge in degrees");
  grid->add_option("--top-k", top_k, "Number of cells to keep");
  grid->add_option("--max-gap", max_gap, "Dwell cap per fix, seconds");
  grid->add_option("--manifest", grid_manifest, "Segment manifest to pseudo-label");
  grid->add_option("--tolerance", tolerance, "Segment-to-fix tolerance, seconds");

  // binarize / tfidf
  auto* binarize = app.add_subcommand("binarize", "Per-user percentile thresholds");
  auto* tfidf_cmd = app.add_subcommand("tfidf", "Per-segment TF-IDF vectors");
  std::string manifest_path;
  std::optional<double> percentile;
  for (auto* sub : {binarize, tfidf_cmd}) {
    sub->add_option("--manifest", manifest_path, "Segment manifest (JSON Lines)")->required();
    sub->add_option("--percentile", percentile, "Activation percentile");
  }

  // node2vec / embed
  auto* node2vec = app.add_subcommand("node2vec", "Ontology node embeddings");
  auto* embed_cmd = app.add_subcommand("embed", "6x521 segment embeddings, flattened");
  std::string ontology_path, vocab_path, node2vec_csv;
  node2vec->add_option("--ontology", ontology_path, "Ontology JSON")->required();
  node2vec->add_option("--vocab", vocab_path, "Class map CSV (validates coverage)");
  embed_cmd->add_option("--manifest", manifest_path, "Segment manifest")->required();
  embed_cmd->add_option("--vocab", vocab_path, "Class map CSV")->required();
  embed_cmd->add_option("--ontology", ontology_path, "Ontology JSON");
  embed_cmd->add_option("--node2vec", node2vec_csv, "Precomputed node2vec CSV");
  embed_cmd->add_option("--percentile", percentile, "Activation percentile");

  // train / encode / analyze
  auto* train = app.add_subcommand("train", "Train one user's VAE");
  std::string user_id, embeddings_path, model_path, labels_path, space = "latent";
  train->add_option("--user", user_id, "User id")->required();
  train->add_option("--embeddings", embeddings_path, "Embedding CSV")->required();
  train->add_option("--vocab", vocab_path, "Class map CSV (recorded as a hash)");
  auto* encode = app.add_subcommand("encode", "Latent means for embeddings");
  encode->add_option("--model", model_path, "Model JSON")->required();
  encode->add_option("--embeddings", embeddings_path, "Embedding CSV")->required();
  auto* analyze = app.add_subcommand("analyze", "Distance matrices and t-SNE");
  bool run_tsne = false;
  analyze->add_option("--model", model_path, "Model JSON");
  analyze->add_option("--embeddings", embeddings_path, "Embedding CSV")->required();
  analyze->add_option("--labels", labels_path, "Pseudo labels (JSON Lines)")->required();
  analyze->add_option("--space", space, "raw or latent")
      ->check(CLI::IsMember({"raw", "latent"}));
  analyze->add_flag("--tsne", run_tsne, "Also write a t-SNE projection");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
  std::string profiles_path, synth_user;
  int segments = 60;
  double gps_dropout = 0.0;
  synth->add_option("--profiles", profiles_path, "Scene profiles JSON (default: 3 scenes)");
  synth->add_option("--segments", segments, "Segments per scene");
  synth->add_option("--gps-dropout", gps_dropout, "Probability of dropping a GPS fix");
  synth->add_option("--user", synth_user, "User id for the generated corpus");

  // run
  auto* run = app.add_subcommand("run", "Full pipeline from a configuration file");
  std::optional<int> parallel_users;
  run->add_option("--parallel-users", parallel_users, "Users processed concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const fs::path out = global.out;
    auto cfg = BaseConfig(global);
    if (edge) cfg.grid.edge = *edge;
    if (top_k) cfg.grid.top_k = *top_k;
    if (max_gap) cfg.grid.max_gap = *max_gap;
    if (tolerance) cfg.grid.tolerance = *tolerance;
    if (percentile) cfg.events.percentile = *percentile;

    if (*grid) {
      const auto fixes = sl::geogrid::LoadFixes(fixes_path);
      std::vector<sl::events::SegmentEntry> entries;
      if (!grid_manifest.empty()) entries = sl::events::LoadManifest(grid_manifest);
      std::set<std::string> users;
      for (const auto& f : fixes) users.insert(f.user_id);
      for (const auto& user : users) {
        const auto user_fixes = sl::geogrid::FixesForUser(fixes, user);
        const auto ranking = sl::geogrid::RankCells(user_fixes, cfg.grid.edge, cfg.grid.top_k,
                                                    cfg.grid.max_gap);
        sl::WriteFile(out / "grid" / user / "ranking.csv",
                      sl::geogrid::RankingToCsv(ranking, cfg.grid.edge));
        if (!entries.empty()) {
          std::vector<sl::geogrid::SegmentRef> refs;
          for (const auto& e : sl::events::EntriesForUser(entries, user)) {
            refs.push_back({e.segment_id, e.user_id, e.start});
          }
          const auto labels = sl::geogrid::AssignPseudoLabels(refs, user_fixes, ranking,
                                                              cfg.grid.edge, cfg.grid.tolerance);
          sl::WriteFile(out / "grid" / user / "pseudo_labels.jsonl",
                        sl::geogrid::PseudoLabelsToJsonLines(labels));
        }
        std::cout << user << ": " << ranking.size() << " cells\n";
      }
    } else if (*binarize) {
      const auto entries = sl::events::LoadManifest(manifest_path);
      std::string thresholds = "user_id,threshold\n";
      for (const auto& user : sl::events::UsersOf(entries)) {
        double threshold = 0.0;
        const auto user_entries = sl::events::EntriesForUser(entries, user);
        const auto binary = BinarizeUser(user_entries, cfg.events.percentile, &threshold);
        for (const auto& b : binary) {
          sl::WriteFile(out / "binary" / (b.segment_id + ".csv"), sl::events::BinaryMatrixToCsv(b));
        }
        thresholds += user + "," + sl::FormatDouble(threshold) + "\n";
      }
      sl::WriteFile(out / "thresholds.csv", thresholds);
      std::cout << thresholds;
    } else if (*tfidf_cmd) {
      const auto entries = sl::events::LoadManifest(manifest_path);
      for (const auto& user : sl::events::UsersOf(entries)) {
        const auto binary =
            BinarizeUser(sl::events::EntriesForUser(entries, user), cfg.events.percentile, nullptr);
        const auto stats = sl::tfidf::DocumentFrequency(binary);
        std::vector<sl::tfidf::TfidfVector> vectors;
        for (const auto& b : binary) vectors.push_back(sl::tfidf::Vectorize(b, stats));
        sl::WriteFile(out / "tfidf" / (user + ".csv"), sl::tfidf::ToCsv(vectors));
      }
    } else if (*node2vec) {
      const auto graph = sl::ontology::LoadOntology(ontology_path);
      const auto emb = sl::ontology::Node2Vec(graph, cfg.node2vec, cfg.seed);
      if (!vocab_path.empty()) {
        sl::ontology::ClassMatrix(emb, graph, sl::events::EventVocabulary::Load(vocab_path));
      }
      sl::WriteFile(out / "node2vec.csv", sl::ontology::EmbeddingsToCsv(emb, graph));
      std::cout << graph.num_nodes() << " nodes, " << graph.num_edges() << " edges\n";
    } else if (*embed_cmd) {
      const auto vocab = sl::events::EventVocabulary::Load(vocab_path);
      Eigen::MatrixXd class_matrix;
      if (!node2vec_csv.empty()) {
        class_matrix = sl::ontology::LoadClassMatrix(node2vec_csv, vocab);
      } else {
        Require(ontology_path, "--ontology or --node2vec");
        const auto graph = sl::ontology::LoadOntology(ontology_path);
        class_matrix = sl::ontology::ClassMatrix(
            sl::ontology::Node2Vec(graph, cfg.node2vec, cfg.seed), graph, vocab);
      }
      const auto entries = sl::events::LoadManifest(manifest_path);
      for (const auto& user : sl::events::UsersOf(entries)) {
        const auto binary =
            BinarizeUser(sl::events::EntriesForUser(entries, user), cfg.events.percentile, nullptr);
        const auto stats = sl::tfidf::DocumentFrequency(binary);
        sl::embed::EmbeddingTable table;
        for (const auto& b : binary) {
          const auto e = sl::embed::BuildSegmentEmbedding(sl::tfidf::Vectorize(b, stats),
                                                          class_matrix, b);
          table.segment_ids.push_back(e.segment_id);
          table.vectors.push_back(e.Flat());
        }
        sl::WriteFile(out / "embeddings" / (user + ".csv"), sl::embed::TableToCsv(table));
      }
    } else if (*train) {
      const auto table = sl::embed::LoadTable(embeddings_path);
      auto result = sl::vae::TrainUser(table.vectors, cfg.vae);
      result.model.config_hash = sl::pipeline::ConfigHash(cfg);
      if (!vocab_path.empty()) {
        result.model.vocab_hash = sl::events::EventVocabulary::Load(vocab_path).Hash();
      }
      const fs::path model_file = out / "models" / (user_id + ".json");
      sl::vae::SaveModelFile(result.model, model_file);
      std::string loss = "epoch,train_loss,test_loss\n";
      for (size_t e = 0; e < result.train_loss.size(); ++e) {
        loss += std::to_string(e) + "," + sl::FormatDouble(result.train_loss[e]) + "," +
                sl::FormatDouble(result.test_loss[e]) + "\n";
      }
      sl::WriteFile(out / "models" / (user_id + ".loss.csv"), loss);
      std::cout << model_file.string() << ": best epoch " << result.model.best_epoch << " of "
                << result.model.epochs_trained << "\n";
    } else if (*encode) {
      const auto model = sl::vae::LoadModelFile(model_path);
      const auto table = sl::embed::LoadTable(embeddings_path);
      sl::embed::EmbeddingTable latent{table.segment_ids, {}};
      for (const auto& v : table.vectors) latent.vectors.push_back(sl::vae::EncodeRaw(model, v));
      sl::WriteFile(out / "latent.csv", sl::embed::TableToCsv(latent, "z"));
    } else if (*analyze) {
      const auto table = sl::embed::LoadTable(embeddings_path);
      const auto labels = sl::geogrid::LoadPseudoLabels(labels_path);
      std::optional<sl::vae::VaeModel> model;
      if (!model_path.empty()) model = sl::vae::LoadModelFile(model_path);
      if (space == "latent" && !model) {
        throw sl::ValidationError("--space latent requires --model");
      }
      sl::embed::EmbeddingTable vectors = table;
      if (space == "latent") {
        vectors.vectors.clear();
        for (const auto& v : table.vectors) vectors.vectors.push_back(sl::vae::EncodeRaw(*model, v));
      }
      const auto collected = sl::pipeline::CollectLabeled(vectors, labels);
      const auto matrix = sl::analysis::LabelDistanceMatrix(collected.vectors, collected.labels);
      sl::WriteFile(out / ("distances_" + space + ".csv"),
                    sl::analysis::DistanceMatrixToCsv(matrix));
      if (!collected.zero_norm.empty()) {
        std::cerr << collected.zero_norm.size() << " zero-norm segments excluded\n";
      }
      if (run_tsne) {
        Eigen::MatrixXd points(static_cast<Eigen::Index>(vectors.vectors.size()),
                               vectors.vectors.empty() ? 1 : vectors.vectors.front().size());
        for (size_t i = 0; i < vectors.vectors.size(); ++i) {
          const auto& v = vectors.vectors[i];
          points.row(static_cast<Eigen::Index>(i)) =
              (space == "latent" ? sl::analysis::LatentVizTransform(v) : v).transpose();
        }
        const auto tsne = sl::analysis::Tsne(points, cfg.tsne);
        sl::WriteFile(out / "tsne.csv",
                      sl::pipeline::TsneToCsv(vectors.segment_ids, tsne.embedding, labels));
        std::cout << "t-SNE seed " << cfg.tsne.seed
                  << " (random initialization; compare runs with the same seed)\n";
      }
    } else if (*synth) {
      std::vector<sl::synth::SceneProfile> profiles = sl::synth::DefaultProfiles();
      sl::synth::SynthOptions options;
      if (!profiles_path.empty()) profiles = sl::synth::LoadProfiles(profiles_path, &options.user_id);
      if (!synth_user.empty()) options.user_id = synth_user;
      options.segments_per_scene = segments;
      options.seed = cfg.seed;
      options.gps_dropout = gps_dropout;
      options.edge = cfg.grid.edge;
      const auto corpus = sl::synth::GenerateCorpus(profiles, options);
      sl::synth::WriteCorpus(corpus, out);
      std::cout << corpus.manifest.size() << " segments, " << corpus.fixes.size()
                << " GPS fixes written to " << out.string() << "\n";
    } else if (*run) {
      Require(global.config, "--config");
      if (app.get_option("--out")->count() > 0) cfg.paths.output_dir = out;
      if (parallel_users) cfg.parallel_users = *parallel_users;
      const auto summary = sl::pipeline::RunPipeline(cfg);
      std::cout << "run manifest: " << summary.run_manifest.string() << "\n";
    }
  } catch (const sl::pipeline::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const sl::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const sl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

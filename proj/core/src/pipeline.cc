#include "scene_latent/pipeline.h"

#include <chrono>
#include <future>
#include <mutex>

#include "scene_latent/errors.h"

namespace scene_latent::pipeline {

namespace {

std::filesystem::path Resolve(const Json& section, const char* key,
                              const std::filesystem::path& base) {
  if (!section.contains(key) || section.at(key).is_null()) return {};
  std::filesystem::path p = section.at(key).get<std::string>();
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

int ExitCodeFor(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const Error*>(&e) != nullptr) return 1;
  return 2;
}

// Runs `fn` as stage `name`, reporting its duration; failures are rethrown
// as StageError carrying the stage name.
template <typename Fn>
auto RunStage(const std::string& name, const StageObserver& observer, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&]() {
    if (observer) {
      observer(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                         .count());
    }
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto result = fn();
      finish();
      return result;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), ExitCodeFor(e));
  }
}

std::string LossCsv(const vae::TrainResult& r) {
  std::string out = "epoch,train_loss,test_loss\n";
  for (size_t e = 0; e < r.train_loss.size(); ++e) {
    out += std::to_string(e) + "," + FormatDouble(r.train_loss[e]) + "," +
           FormatDouble(r.test_loss[e]) + "\n";
  }
  return out;
}

}  // namespace

PipelineConfig ConfigFromJson(const Json& j, const std::filesystem::path& base_dir) {
  PipelineConfig cfg;
  try {
    const Json empty = Json::object();
    const Json& paths = j.contains("paths") ? j.at("paths") : empty;
    cfg.paths.manifest = Resolve(paths, "manifest", base_dir);
    cfg.paths.fixes = Resolve(paths, "fixes", base_dir);
    cfg.paths.ontology = Resolve(paths, "ontology", base_dir);
    cfg.paths.vocab = Resolve(paths, "vocab", base_dir);
    cfg.paths.output_dir = Resolve(paths, "output_dir", base_dir);

    const Json& grid = j.contains("grid") ? j.at("grid") : empty;
    cfg.grid.edge = grid.value("edge", cfg.grid.edge);
    cfg.grid.top_k = grid.value("top_k", cfg.grid.top_k);
    cfg.grid.max_gap = grid.value("max_gap", cfg.grid.max_gap);
    cfg.grid.tolerance = grid.value("tolerance", cfg.grid.tolerance);

    const Json& ev = j.contains("events") ? j.at("events") : empty;
    cfg.events.percentile = ev.value("percentile", cfg.events.percentile);

    const Json& n2v = j.contains("node2vec") ? j.at("node2vec") : empty;
    auto& nc = cfg.node2vec;
    nc.p = n2v.value("p", nc.p);
    nc.q = n2v.value("q", nc.q);
    nc.walk_length = n2v.value("walk_length", nc.walk_length);
    nc.walks_per_node = n2v.value("walks_per_node", nc.walks_per_node);
    nc.window = n2v.value("window", nc.window);
    nc.negatives = n2v.value("negatives", nc.negatives);
    nc.epochs = n2v.value("epochs", nc.epochs);
    nc.learning_rate = n2v.value("lr", nc.learning_rate);
    nc.min_learning_rate = n2v.value("min_lr", nc.min_learning_rate);
    nc.dim = n2v.value("dim", nc.dim);

    if (j.contains("vae")) cfg.vae = vae::ConfigFromJson(j.at("vae"));

    const Json& ts = j.contains("tsne") ? j.at("tsne") : empty;
    auto& tc = cfg.tsne;
    cfg.run_tsne = ts.value("enabled", cfg.run_tsne);
    tc.perplexity = ts.value("perplexity", tc.perplexity);
    tc.iterations = ts.value("iterations", tc.iterations);
    tc.learning_rate = ts.value("learning_rate", tc.learning_rate);
    tc.early_exaggeration = ts.value("early_exaggeration", tc.early_exaggeration);
    tc.exaggeration_iterations = ts.value("exaggeration_iterations", tc.exaggeration_iterations);
    tc.initial_momentum = ts.value("initial_momentum", tc.initial_momentum);
    tc.final_momentum = ts.value("final_momentum", tc.final_momentum);
    tc.momentum_switch_iteration =
        ts.value("momentum_switch_iteration", tc.momentum_switch_iteration);

    cfg.parallel_users = j.value("parallel_users", cfg.parallel_users);
    ApplySeed(cfg, j.value("seed", std::uint64_t{0}));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  if (cfg.node2vec.dim != ontology::kEmbeddingDim) {
    throw ValidationError("node2vec.dim must be " + std::to_string(ontology::kEmbeddingDim));
  }
  if (cfg.vae.input_dim != (1 + cfg.node2vec.dim) * events::kClasses) {
    throw ValidationError("vae.input_dim must equal (1 + node2vec.dim) * 521");
  }
  cfg.vae.Validate();
  return cfg;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(ReadFile(path));
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return ConfigFromJson(doc, std::filesystem::absolute(path).parent_path());
}

Json ConfigToJson(const PipelineConfig& cfg) {
  const auto& nc = cfg.node2vec;
  const auto& tc = cfg.tsne;
  return Json{
      {"paths",
       {{"manifest", cfg.paths.manifest.generic_string()},
        {"fixes", cfg.paths.fixes.generic_string()},
        {"ontology", cfg.paths.ontology.generic_string()},
        {"vocab", cfg.paths.vocab.generic_string()},
        {"output_dir", cfg.paths.output_dir.generic_string()}}},
      {"grid",
       {{"edge", cfg.grid.edge},
        {"top_k", cfg.grid.top_k},
        {"max_gap", cfg.grid.max_gap},
        {"tolerance", cfg.grid.tolerance}}},
      {"events", {{"percentile", cfg.events.percentile}}},
      {"node2vec",
       {{"p", nc.p},
        {"q", nc.q},
        {"walk_length", nc.walk_length},
        {"walks_per_node", nc.walks_per_node},
        {"window", nc.window},
        {"negatives", nc.negatives},
        {"epochs", nc.epochs},
        {"lr", nc.learning_rate},
        {"min_lr", nc.min_learning_rate},
        {"dim", nc.dim}}},
      {"vae", vae::ConfigToJson(cfg.vae)},
      {"tsne",
       {{"enabled", cfg.run_tsne},
        {"perplexity", tc.perplexity},
        {"iterations", tc.iterations},
        {"learning_rate", tc.learning_rate},
        {"early_exaggeration", tc.early_exaggeration},
        {"exaggeration_iterations", tc.exaggeration_iterations},
        {"initial_momentum", tc.initial_momentum},
        {"final_momentum", tc.final_momentum},
        {"momentum_switch_iteration", tc.momentum_switch_iteration}}},
      {"seed", cfg.seed},
      {"parallel_users", cfg.parallel_users}};
}

void ApplySeed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.vae.seed = seed;
  cfg.tsne.seed = seed;
}

std::string ConfigHash(const PipelineConfig& cfg) {
  // Where outputs go and how many users run at once do not change results.
  Json j = ConfigToJson(cfg);
  j["paths"].erase("output_dir");
  j.erase("parallel_users");
  return Fnv1aHex(j.dump());
}

void ValidatePaths(const PipelineConfig& cfg) {
  std::string missing;
  auto check = [&](const char* name, const std::filesystem::path& p) {
    if (p.empty() || !std::filesystem::exists(p)) {
      missing += std::string(" ") + name + "='" + p.string() + "'";
    }
  };
  check("manifest", cfg.paths.manifest);
  check("fixes", cfg.paths.fixes);
  check("ontology", cfg.paths.ontology);
  check("vocab", cfg.paths.vocab);
  if (!missing.empty()) throw ValidationError("missing input paths:" + missing);
  if (cfg.paths.output_dir.empty()) throw ValidationError("paths.output_dir is required");
}

LabeledVectors CollectLabeled(const embed::EmbeddingTable& table,
                              const std::vector<geogrid::PseudoLabeledSegment>& labels) {
  std::map<std::string, const Eigen::VectorXd*> by_id;
  for (size_t i = 0; i < table.segment_ids.size(); ++i) {
    by_id.emplace(table.segment_ids[i], &table.vectors[i]);
  }
  LabeledVectors out;
  for (const auto& l : labels) {
    if (!l.cell_rank) continue;
    auto it = by_id.find(l.segment_id);
    if (it == by_id.end()) continue;
    if (it->second->norm() == 0.0) {
      out.zero_norm.push_back(l.segment_id);
      continue;
    }
    out.vectors.emplace(l.segment_id, *it->second);
    out.labels.emplace(l.segment_id, std::to_string(*l.cell_rank));
  }
  return out;
}

std::string TsneToCsv(const std::vector<std::string>& segment_ids, const Eigen::MatrixXd& coords,
                      const std::vector<geogrid::PseudoLabeledSegment>& labels) {
  std::map<std::string, const geogrid::PseudoLabeledSegment*> by_id;
  for (const auto& l : labels) by_id.emplace(l.segment_id, &l);
  std::string out = "segment_id,x,y,pseudo_label,situational_label\n";
  for (size_t i = 0; i < segment_ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out += segment_ids[i] + "," + FormatDouble(coords(r, 0)) + "," + FormatDouble(coords(r, 1)) + ",";
    auto it = by_id.find(segment_ids[i]);
    if (it != by_id.end()) {
      if (it->second->cell_rank) out += std::to_string(*it->second->cell_rank);
      out += ",";
      out += QuoteCsvField(it->second->situational_label.value_or(""));
    } else {
      out += ",";
    }
    out += "\n";
  }
  return out;
}

UserArtifacts ProcessUser(const UserInputs& inputs, const Eigen::MatrixXd& class_matrix,
                          const std::string& vocab_hash, const PipelineConfig& cfg,
                          const StageObserver& observer) {
  UserArtifacts out;
  out.user_id = inputs.user_id;

  RunStage("grid", observer, [&] {
    out.ranking = geogrid::RankCells(inputs.fixes, cfg.grid.edge, cfg.grid.top_k,
                                     cfg.grid.max_gap);
    std::vector<geogrid::SegmentRef> refs;
    for (const auto& s : inputs.segments) refs.push_back({s.segment_id, s.user_id, s.start});
    out.labels = geogrid::AssignPseudoLabels(refs, inputs.fixes, out.ranking, cfg.grid.edge,
                                             cfg.grid.tolerance);
  });

  std::vector<events::BinaryEventMatrix> binary;
  RunStage("binarize", observer, [&] {
    out.threshold = events::ComputeThreshold(inputs.matrices, cfg.events.percentile);
    for (const auto& m : inputs.matrices) binary.push_back(events::Binarize(m, out.threshold));
  });

  RunStage("tfidf", observer, [&] {
    const tfidf::CorpusStats stats = tfidf::DocumentFrequency(binary);
    for (const auto& b : binary) out.tfidf.push_back(tfidf::Vectorize(b, stats));
  });

  RunStage("embed", observer, [&] {
    for (size_t i = 0; i < binary.size(); ++i) {
      const embed::SegmentEmbedding e =
          embed::BuildSegmentEmbedding(out.tfidf[i], class_matrix, binary[i]);
      out.embeddings.segment_ids.push_back(e.segment_id);
      out.embeddings.vectors.push_back(e.Flat());
    }
  });

  RunStage("train", observer, [&] {
    out.training = vae::TrainUser(out.embeddings.vectors, cfg.vae);
    out.training.model.vocab_hash = vocab_hash;
    out.training.model.config_hash = ConfigHash(cfg);
  });

  RunStage("analyze", observer, [&] {
    out.latent.segment_ids = out.embeddings.segment_ids;
    for (const auto& v : out.embeddings.vectors) {
      out.latent.vectors.push_back(vae::EncodeRaw(out.training.model, v));
    }
    const LabeledVectors raw = CollectLabeled(out.embeddings, out.labels);
    const LabeledVectors latent = CollectLabeled(out.latent, out.labels);
    out.zero_norm_segments = raw.zero_norm;
    out.raw_distances = analysis::LabelDistanceMatrix(raw.vectors, raw.labels);
    out.latent_distances = analysis::LabelDistanceMatrix(latent.vectors, latent.labels);
    if (cfg.run_tsne && out.latent.vectors.size() >= 5) {
      Eigen::MatrixXd points(static_cast<Eigen::Index>(out.latent.vectors.size()),
                             cfg.vae.latent_dim);
      for (size_t i = 0; i < out.latent.vectors.size(); ++i) {
        points.row(static_cast<Eigen::Index>(i)) =
            analysis::LatentVizTransform(out.latent.vectors[i]).transpose();
      }
      out.tsne = analysis::Tsne(points, cfg.tsne);
    }
  });
  return out;
}

RunSummary RunPipeline(const PipelineConfig& cfg) {
  ValidatePaths(cfg);
  const std::filesystem::path out_dir = cfg.paths.output_dir;
  std::filesystem::create_directories(out_dir);
  const std::string config_hash = ConfigHash(cfg);

  RunSummary summary;
  summary.run_manifest = out_dir / "run_manifest.json";
  std::mutex mu;
  std::map<std::string, double> timings;
  Json user_records = Json::object();
  std::vector<std::string> written;

  StageObserver observer = [&](const std::string& stage, double seconds) {
    std::lock_guard lock(mu);
    timings[stage] += seconds;
  };
  auto emit = [&](const std::filesystem::path& path, std::string_view content) {
    WriteFile(path, content);
    std::lock_guard lock(mu);
    written.push_back(path.lexically_relative(out_dir).generic_string());
    summary.outputs.push_back(path);
  };
  auto write_manifest = [&](const std::string& status, const std::string& failed_stage,
                            const std::string& error) {
    Json outputs = Json::array();
    std::vector<std::string> sorted = written;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& p : sorted) {
      outputs.push_back({{"path", p}, {"config_hash", config_hash}, {"stale", status != "ok"}});
    }
    Json manifest{{"status", status},
                  {"config_hash", config_hash},
                  {"config", ConfigToJson(cfg)},
                  {"seeds",
                   {{"global", cfg.seed},
                    {"node2vec", cfg.seed},
                    {"vae", cfg.vae.seed},
                    {"tsne", cfg.tsne.seed}}},
                  {"tsne_note",
                   "t-SNE starts from a seeded random initialization; projections "
                   "from different seeds are not directly comparable"},
                  {"stage_timings_seconds", timings},
                  {"users", user_records},
                  {"outputs", outputs}};
    if (!failed_stage.empty()) {
      manifest["failed_stage"] = failed_stage;
      manifest["error"] = error;
    }
    WriteFile(summary.run_manifest, manifest.dump(2) + "\n");
  };

  try {
    events::EventVocabulary vocab = RunStage("load", observer, [&] {
      return events::EventVocabulary::Load(cfg.paths.vocab);
    });
    const auto graph = RunStage("load", observer, [&] {
      return ontology::LoadOntology(cfg.paths.ontology);
    });
    const auto manifest = RunStage("load", observer, [&] {
      return events::LoadManifest(cfg.paths.manifest);
    });
    const auto fixes = RunStage("load", observer, [&] {
      return geogrid::LoadFixes(cfg.paths.fixes);
    });

    const Eigen::MatrixXd class_matrix = RunStage("node2vec", observer, [&] {
      const auto emb = ontology::Node2Vec(graph, cfg.node2vec, cfg.seed);
      emit(out_dir / "node2vec.csv", ontology::EmbeddingsToCsv(emb, graph));
      return ontology::ClassMatrix(emb, graph, vocab);
    });

    const std::vector<std::string> users = events::UsersOf(manifest);
    auto run_user = [&](const std::string& user) {
      UserInputs inputs;
      inputs.user_id = user;
      inputs.segments = events::EntriesForUser(manifest, user);
      inputs.fixes = geogrid::FixesForUser(fixes, user);
      RunStage("binarize", observer, [&] {
        for (const auto& s : inputs.segments) {
          events::EventProbMatrix m = events::LoadProbMatrix(s.matrix_path);
          m.segment_id = s.segment_id;
          inputs.matrices.push_back(std::move(m));
        }
      });
      const UserArtifacts art = ProcessUser(inputs, class_matrix, vocab.Hash(), cfg, observer);

      RunStage("write", observer, [&] {
        const std::filesystem::path dir = out_dir / "users" / user;
        emit(dir / "ranking.csv", geogrid::RankingToCsv(art.ranking, cfg.grid.edge));
        emit(dir / "pseudo_labels.jsonl", geogrid::PseudoLabelsToJsonLines(art.labels));
        emit(dir / "tfidf.csv", tfidf::ToCsv(art.tfidf));
        emit(dir / "embeddings.csv", embed::TableToCsv(art.embeddings));
        emit(dir / "model.json", vae::SaveModel(art.training.model));
        emit(dir / "loss.csv", LossCsv(art.training));
        emit(dir / "latent.csv", embed::TableToCsv(art.latent, "z"));
        emit(dir / "distances_raw.csv", analysis::DistanceMatrixToCsv(art.raw_distances));
        emit(dir / "distances_latent.csv", analysis::DistanceMatrixToCsv(art.latent_distances));
        if (art.tsne) {
          emit(dir / "tsne.csv", TsneToCsv(art.latent.segment_ids, art.tsne->embedding, art.labels));
        }
        Json split{{"train", Json::array()}, {"test", Json::array()}};
        for (int i : art.training.split.train) split["train"].push_back(art.embeddings.segment_ids[static_cast<size_t>(i)]);
        for (int i : art.training.split.test) split["test"].push_back(art.embeddings.segment_ids[static_cast<size_t>(i)]);
        emit(dir / "split.json", split.dump(1) + "\n");

        std::lock_guard lock(mu);
        user_records[user] = {{"segments", inputs.segments.size()},
                              {"threshold", art.threshold},
                              {"ranked_cells", art.ranking.size()},
                              {"best_epoch", art.training.model.best_epoch},
                              {"epochs_trained", art.training.model.epochs_trained},
                              {"zero_norm_segments", art.zero_norm_segments}};
        summary.models[user] = dir / "model.json";
      });
    };

    if (cfg.parallel_users <= 1) {
      for (const auto& user : users) run_user(user);
    } else {
      for (size_t start = 0; start < users.size(); start += static_cast<size_t>(cfg.parallel_users)) {
        std::vector<std::future<void>> jobs;
        const size_t end = std::min(users.size(), start + static_cast<size_t>(cfg.parallel_users));
        for (size_t u = start; u < end; ++u) {
          jobs.push_back(std::async(std::launch::async, run_user, users[u]));
        }
        for (auto& j : jobs) j.get();
      }
    }
  } catch (const StageError& e) {
    write_manifest("failed", e.stage(), e.what());
    throw;
  }
  write_manifest("ok", "", "");
  return summary;
}

}  // namespace scene_latent::pipeline

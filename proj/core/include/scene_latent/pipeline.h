#ifndef SCENE_LATENT_PIPELINE_H_
#define SCENE_LATENT_PIPELINE_H_

// End-to-end composition: grid -> binarize -> tfidf -> node2vec -> embed ->
// train -> analyze, per user, driven by one JSON configuration file.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scene_latent/analysis.h"
#include "scene_latent/embed.h"
#include "scene_latent/events.h"
#include "scene_latent/geogrid.h"
#include "scene_latent/io.h"
#include "scene_latent/ontology.h"
#include "scene_latent/tfidf.h"
#include "scene_latent/vae.h"

namespace scene_latent::pipeline {

struct PathsConfig {
  std::filesystem::path manifest;
  std::filesystem::path fixes;
  std::filesystem::path ontology;
  std::filesystem::path vocab;
  std::filesystem::path output_dir;
};

struct GridConfig {
  double edge = geogrid::kDefaultEdge;
  int top_k = geogrid::kDefaultTopK;
  double max_gap = geogrid::kDefaultMaxGapSeconds;
  double tolerance = geogrid::kDefaultToleranceSeconds;
};

struct EventsConfig {
  double percentile = events::kDefaultPercentile;
};

struct PipelineConfig {
  PathsConfig paths;
  GridConfig grid;
  EventsConfig events;
  ontology::Node2VecConfig node2vec;
  vae::VaeConfig vae;
  analysis::TsneConfig tsne;
  bool run_tsne = true;
  std::uint64_t seed = 0;
  int parallel_users = 1;
};

// Relative paths resolve against `base_dir`; omitted sections keep defaults.
PipelineConfig ConfigFromJson(const Json& j, const std::filesystem::path& base_dir);
PipelineConfig LoadConfig(const std::filesystem::path& path);
Json ConfigToJson(const PipelineConfig& cfg);
// Copies the global seed into the vae and tsne sections.
void ApplySeed(PipelineConfig& cfg, std::uint64_t seed);
std::string ConfigHash(const PipelineConfig& cfg);

// ValidationError naming every missing input path.
void ValidatePaths(const PipelineConfig& cfg);

struct UserInputs {
  std::string user_id;
  std::vector<events::SegmentEntry> segments;
  std::vector<events::EventProbMatrix> matrices;  // parallel to segments
  std::vector<geogrid::GpsFix> fixes;             // sorted by timestamp
};

struct UserArtifacts {
  std::string user_id;
  geogrid::CellRanking ranking;
  std::vector<geogrid::PseudoLabeledSegment> labels;
  double threshold = 0.0;
  std::vector<tfidf::TfidfVector> tfidf;
  embed::EmbeddingTable embeddings;  // raw, unscaled
  vae::TrainResult training;
  embed::EmbeddingTable latent;      // eval-mode mu per segment
  analysis::DistanceMatrix raw_distances;
  analysis::DistanceMatrix latent_distances;
  std::vector<std::string> zero_norm_segments;  // excluded from distances
  std::optional<analysis::TsneResult> tsne;
};

// Called with (stage name, seconds) after each stage completes.
using StageObserver = std::function<void(const std::string&, double)>;

// In-memory per-user run; no files are touched.
UserArtifacts ProcessUser(const UserInputs& inputs, const Eigen::MatrixXd& class_matrix,
                          const std::string& vocab_hash, const PipelineConfig& cfg,
                          const StageObserver& observer = {});

// Distance-matrix inputs keyed by segment id: vectors and the cell rank as a
// label, restricted to segments carrying a cell rank and a non-zero vector.
struct LabeledVectors {
  std::map<std::string, Eigen::VectorXd> vectors;
  std::map<std::string, std::string> labels;
  std::vector<std::string> zero_norm;
};
LabeledVectors CollectLabeled(const embed::EmbeddingTable& table,
                              const std::vector<geogrid::PseudoLabeledSegment>& labels);

// CSV: segment_id,x,y,pseudo_label,situational_label
std::string TsneToCsv(const std::vector<std::string>& segment_ids,
                      const Eigen::MatrixXd& coords,
                      const std::vector<geogrid::PseudoLabeledSegment>& labels);

struct RunSummary {
  std::filesystem::path run_manifest;
  std::vector<std::filesystem::path> outputs;
  std::map<std::string, std::filesystem::path> models;  // user -> model file
};

// Thrown after the run manifest has been written with status "failed".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause, int exit_code)
      : std::runtime_error("stage '" + stage + "' failed: " + cause),
        stage_(std::move(stage)),
        exit_code_(exit_code) {}
  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

RunSummary RunPipeline(const PipelineConfig& cfg);

}  // namespace scene_latent::pipeline

#endif  // SCENE_LATENT_PIPELINE_H_

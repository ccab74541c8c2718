#ifndef SCENE_LATENT_SYNTH_H_
#define SCENE_LATENT_SYNTH_H_

// Ground-truth-labelled synthetic corpus: per-second event probabilities with
// planted scene events, one GPS fix per segment at the scene's cell, and a
// small synthetic vocabulary and ontology that the rest of the pipeline can
// consume unchanged.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scene_latent/events.h"
#include "scene_latent/geogrid.h"

namespace scene_latent::synth {

struct SceneProfile {
  std::string name;
  std::vector<int> active_class_pool;
  double events_per_second_mean = 5.0;
  double base_noise_level = 0.3;
  geogrid::HexCoord cell;
};

struct SynthOptions {
  int segments_per_scene = 60;
  std::uint64_t seed = 0;
  double gps_dropout = 0.0;  // probability of dropping a segment's fix
  double edge = geogrid::kDefaultEdge;
  std::string user_id = "synth_user";
  int session_length = 10;  // consecutive segments recorded in one scene
  UnixSeconds start = 1704067200;  // 2024-01-01T00:00:00Z
};

struct SyntheticCorpus {
  std::vector<events::SegmentEntry> manifest;
  std::vector<events::EventProbMatrix> matrices;
  std::vector<geogrid::GpsFix> fixes;
  std::vector<std::string> scene_of_segment;    // ground truth, per manifest row
  std::vector<events::BinaryValues> planted;    // ground-truth active entries
};

void ValidateProfile(const SceneProfile& profile);

SyntheticCorpus GenerateCorpus(const std::vector<SceneProfile>& profiles,
                               const SynthOptions& options);

// Three scenes with disjoint 8-class pools, 5 events/s and noise level 0.3.
std::vector<SceneProfile> DefaultProfiles();

// Accepts either a JSON array of profiles or {"user_id": ..., "profiles": [...]}.
std::vector<SceneProfile> LoadProfiles(const std::filesystem::path& path,
                                       std::string* user_id = nullptr);

// 521 classes "/t/syn000".."/t/syn520", grouped 26 per parent node under a
// single root in the ontology.
events::EventVocabulary SyntheticVocabulary();
std::string SyntheticOntologyJson();

// Writes matrices/<segment_id>.csv, manifest.jsonl, fixes.jsonl,
// ground_truth.csv, vocab.csv and ontology.json under `dir`.
void WriteCorpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace scene_latent::synth

#endif  // SCENE_LATENT_SYNTH_H_

#ifndef SCENE_LATENT_TESTS_TEST_SUPPORT_H_
#define SCENE_LATENT_TESTS_TEST_SUPPORT_H_

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>
#include <unistd.h>

#include "scene_latent/pipeline.h"
#include "scene_latent/synth.h"

namespace scene_latent::testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("scene_latent_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Writes a synthetic corpus for each user id (default scene profiles) into
// one manifest and one fixes file under `dir`, and returns a configuration
// pointing at it.
inline pipeline::PipelineConfig WriteSyntheticInputs(const std::filesystem::path& dir,
                                                     const std::vector<std::string>& users,
                                                     int segments_per_scene,
                                                     std::uint64_t seed) {
  synth::SyntheticCorpus merged;
  for (size_t u = 0; u < users.size(); ++u) {
    synth::SynthOptions options;
    options.user_id = users[u];
    options.segments_per_scene = segments_per_scene;
    options.seed = DeriveSeed(seed, {u});
    auto corpus = synth::GenerateCorpus(synth::DefaultProfiles(), options);
    for (size_t i = 0; i < corpus.manifest.size(); ++i) {
      merged.manifest.push_back(std::move(corpus.manifest[i]));
      merged.matrices.push_back(std::move(corpus.matrices[i]));
      merged.scene_of_segment.push_back(std::move(corpus.scene_of_segment[i]));
      merged.planted.push_back(std::move(corpus.planted[i]));
    }
    for (auto& f : corpus.fixes) merged.fixes.push_back(std::move(f));
  }
  synth::WriteCorpus(merged, dir);
  pipeline::PipelineConfig cfg;
  cfg.paths = {dir / "manifest.jsonl", dir / "fixes.jsonl", dir / "ontology.json",
               dir / "vocab.csv", dir / "out"};
  pipeline::ApplySeed(cfg, seed);
  return cfg;
}

// Small budgets for tests that exercise plumbing rather than convergence.
inline void UseFastSettings(pipeline::PipelineConfig& cfg) {
  cfg.node2vec.walks_per_node = 2;
  cfg.node2vec.epochs = 1;
  cfg.vae.encoder_hidden = {32, 16};
  cfg.vae.decoder_hidden = {16, 32};
  cfg.vae.max_epochs = 3;
  cfg.tsne.iterations = 300;
}

}  // namespace scene_latent::testing

#endif  // SCENE_LATENT_TESTS_TEST_SUPPORT_H_

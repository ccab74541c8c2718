#ifndef SCENE_LATENT_EVENTS_H_
#define SCENE_LATENT_EVENTS_H_

// Loading per-second event probabilities, per-user percentile thresholds,
// and binarization of probabilities into active events ("words").

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scene_latent/io.h"

namespace scene_latent::events {

inline constexpr int kSeconds = 60;
inline constexpr int kClasses = 521;
inline constexpr double kDefaultPercentile = 99.0;

using ProbValues = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BinaryValues =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct VocabEntry {
  int index = 0;
  std::string class_id;
  std::string display_name;
};

class EventVocabulary {
 public:
  // Validates: 521 entries, indices 0..520 in order, unique class ids.
  explicit EventVocabulary(std::vector<VocabEntry> entries);

  static EventVocabulary Load(const std::filesystem::path& path);

  const std::vector<VocabEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  const VocabEntry& operator[](size_t i) const { return entries_[i]; }

  // Header `index,mid,display_name`; names containing commas are quoted.
  std::string ToCsv() const;
  // FNV-1a of ToCsv(); recorded in model files.
  std::string Hash() const;

 private:
  std::vector<VocabEntry> entries_;
};

struct EventProbMatrix {
  std::string segment_id;
  ProbValues values;  // kSeconds x kClasses, entries in [0, 1]
};

struct BinaryEventMatrix {
  std::string segment_id;
  BinaryValues values;  // kSeconds x kClasses, entries 0 or 1
};

struct SegmentEntry {
  std::string segment_id;
  std::string user_id;
  UnixSeconds start = 0;
  std::filesystem::path matrix_path;  // resolved against the manifest directory
};

// Throws ShapeError / RangeError / ParseError.
EventProbMatrix ParseProbMatrix(std::string_view csv, std::string segment_id);
EventProbMatrix LoadProbMatrix(const std::filesystem::path& path);
std::string ProbMatrixToCsv(const EventProbMatrix& m);

// Pools every entry of every matrix and returns the percentile by linear
// interpolation between closest ranks, h = (n - 1) * p / 100.
double ComputeThreshold(std::span<const EventProbMatrix> matrices,
                        double percentile = kDefaultPercentile);
double PercentileOfPool(std::vector<double> pool, double percentile);

// 1 iff probability > threshold.
BinaryEventMatrix Binarize(const EventProbMatrix& m, double threshold);
std::string BinaryMatrixToCsv(const BinaryEventMatrix& m);

std::vector<SegmentEntry> LoadManifest(const std::filesystem::path& path);
std::string ManifestToJsonLines(const std::vector<SegmentEntry>& entries,
                                const std::filesystem::path& relative_to);
// Sorted, deduplicated user ids.
std::vector<std::string> UsersOf(const std::vector<SegmentEntry>& entries);
std::vector<SegmentEntry> EntriesForUser(const std::vector<SegmentEntry>& entries,
                                         const std::string& user_id);

}  // namespace scene_latent::events

#endif  // SCENE_LATENT_EVENTS_H_

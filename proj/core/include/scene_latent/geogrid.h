#ifndef SCENE_LATENT_GEOGRID_H_
#define SCENE_LATENT_GEOGRID_H_

// Hexagonal binning of GPS fixes, dwell-time ranking of cells and
// pseudo-labelling of audio segments by the cell they were recorded in.
//
// Hexagons are pointy-top, in axial coordinates (q, r), laid out on the plane
// spanned by (lon, lat) in raw degrees. No geodesic correction is applied.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scene_latent/io.h"

namespace scene_latent::geogrid {

inline constexpr double kDefaultEdge = 0.0015;
inline constexpr int kDefaultTopK = 10;
inline constexpr double kDefaultMaxGapSeconds = 300.0;
inline constexpr double kDefaultToleranceSeconds = 120.0;
inline constexpr double kSegmentSeconds = 60.0;

struct GpsFix {
  std::string user_id;
  UnixSeconds timestamp = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::optional<std::string> situational_label;
};

struct HexCoord {
  std::int64_t q = 0;
  std::int64_t r = 0;

  // Cube coordinates: x = q, z = r, y = -q - r.
  std::int64_t x() const { return q; }
  std::int64_t y() const { return -q - r; }
  std::int64_t z() const { return r; }

  auto operator<=>(const HexCoord&) const = default;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct RankedCell {
  HexCoord cell;
  double dwell_seconds = 0.0;
  int rank = 0;  // 1-based
  std::optional<std::string> majority_situational_label;
};

using CellRanking = std::vector<RankedCell>;

struct SegmentRef {
  std::string segment_id;
  std::string user_id;
  UnixSeconds start = 0;
};

struct PseudoLabeledSegment {
  std::string segment_id;
  std::optional<int> cell_rank;
  std::optional<std::string> situational_label;
};

HexCoord HexIndex(double lat, double lon, double edge = kDefaultEdge);
LatLon HexCentroid(HexCoord cell, double edge = kDefaultEdge);

// `fixes` must belong to one user and be sorted by timestamp. Each fix dwells
// min(time to next fix, max_gap); the last fix dwells 0.
CellRanking RankCells(const std::vector<GpsFix>& fixes, double edge, int top_k,
                      double max_gap_seconds);

// Matches each segment midpoint to the nearest fix in time (earlier fix wins
// ties). Segments whose nearest fix lies beyond `tolerance_seconds`, or falls
// in a cell outside the ranking, get no cell_rank.
std::vector<PseudoLabeledSegment> AssignPseudoLabels(
    const std::vector<SegmentRef>& segments, const std::vector<GpsFix>& fixes,
    const CellRanking& ranking, double edge, double tolerance_seconds);

// JSON Lines loader; validates ranges and sorts by (user_id, timestamp).
std::vector<GpsFix> LoadFixes(const std::filesystem::path& path);
std::vector<GpsFix> FixesForUser(const std::vector<GpsFix>& fixes,
                                 const std::string& user_id);

// CSV: rank,q,r,dwell_seconds,centroid_lat,centroid_lon,situational_label
std::string RankingToCsv(const CellRanking& ranking, double edge);

// JSON Lines: {"segment_id","cell_rank","situational_label"}; absent fields
// are written as null.
std::string PseudoLabelsToJsonLines(const std::vector<PseudoLabeledSegment>& labels);
std::vector<PseudoLabeledSegment> LoadPseudoLabels(const std::filesystem::path& path);

}  // namespace scene_latent::geogrid

#endif  // SCENE_LATENT_GEOGRID_H_

#include "scene_latent/geogrid.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "scene_latent/errors.h"

namespace scene_latent::geogrid {

namespace {

void CheckLatLon(double lat, double lon) {
  if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0) {
    throw InputError("latitude out of range: " + FormatDouble(lat));
  }
  if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0) {
    throw InputError("longitude out of range: " + FormatDouble(lon));
  }
}

HexCoord CubeRound(double fx, double fy, double fz) {
  double rx = std::round(fx);
  double ry = std::round(fy);
  double rz = std::round(fz);
  const double dx = std::abs(rx - fx);
  const double dy = std::abs(ry - fy);
  const double dz = std::abs(rz - fz);
  // Recompute the coordinate with the largest rounding error; ties resolve
  // in x, y, z order.
  if (dx >= dy && dx >= dz) {
    rx = -ry - rz;
  } else if (dy >= dz) {
    ry = -rx - rz;
  } else {
    rz = -rx - ry;
  }
  return HexCoord{static_cast<std::int64_t>(rx), static_cast<std::int64_t>(rz)};
}

}  // namespace

HexCoord HexIndex(double lat, double lon, double edge) {
  if (!(edge > 0.0)) throw InputError("hex edge must be positive");
  CheckLatLon(lat, lon);
  const double q = (std::numbers::sqrt3 / 3.0 * lon - lat / 3.0) / edge;
  const double r = (2.0 / 3.0 * lat) / edge;
  return CubeRound(q, -q - r, r);
}

LatLon HexCentroid(HexCoord cell, double edge) {
  const double q = static_cast<double>(cell.q);
  const double r = static_cast<double>(cell.r);
  return LatLon{edge * 1.5 * r,
                edge * (std::numbers::sqrt3 * q + std::numbers::sqrt3 / 2.0 * r)};
}

CellRanking RankCells(const std::vector<GpsFix>& fixes, double edge, int top_k,
                      double max_gap_seconds) {
  if (top_k < 1) throw InputError("top_k must be >= 1");
  if (fixes.empty()) return {};

  struct Accum {
    double dwell = 0.0;
    UnixSeconds first_visit = 0;
    std::map<std::string, int> labels;
  };
  std::map<HexCoord, Accum> cells;
  for (size_t i = 0; i < fixes.size(); ++i) {
    const GpsFix& fix = fixes[i];
    if (i > 0 && fix.timestamp < fixes[i - 1].timestamp) {
      throw InputError("GPS fixes must be sorted by timestamp");
    }
    const HexCoord cell = HexIndex(fix.lat, fix.lon, edge);
    double dwell = 0.0;
    if (i + 1 < fixes.size()) {
      dwell = std::min(static_cast<double>(fixes[i + 1].timestamp - fix.timestamp),
                       max_gap_seconds);
    }
    auto [it, inserted] = cells.try_emplace(cell);
    if (inserted) it->second.first_visit = fix.timestamp;
    it->second.dwell += dwell;
    if (fix.situational_label && !fix.situational_label->empty()) {
      ++it->second.labels[*fix.situational_label];
    }
  }

  std::vector<std::pair<HexCoord, const Accum*>> order;
  order.reserve(cells.size());
  for (const auto& [cell, acc] : cells) order.emplace_back(cell, &acc);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second->dwell != b.second->dwell) return a.second->dwell > b.second->dwell;
    return a.second->first_visit < b.second->first_visit;
  });

  CellRanking ranking;
  const size_t n = std::min(order.size(), static_cast<size_t>(top_k));
  for (size_t i = 0; i < n; ++i) {
    const Accum& acc = *order[i].second;
    RankedCell rc{order[i].first, acc.dwell, static_cast<int>(i) + 1, std::nullopt};
    int best = 0;
    // std::map iterates labels in lexicographic order, so strict '>' keeps
    // the smallest label among equally frequent ones.
    for (const auto& [label, count] : acc.labels) {
      if (count > best) {
        best = count;
        rc.majority_situational_label = label;
      }
    }
    ranking.push_back(std::move(rc));
  }
  return ranking;
}

std::vector<PseudoLabeledSegment> AssignPseudoLabels(
    const std::vector<SegmentRef>& segments, const std::vector<GpsFix>& fixes,
    const CellRanking& ranking, double edge, double tolerance_seconds) {
  std::vector<const GpsFix*> sorted;
  sorted.reserve(fixes.size());
  for (const GpsFix& f : fixes) sorted.push_back(&f);
  std::stable_sort(sorted.begin(), sorted.end(), [](const GpsFix* a, const GpsFix* b) {
    return a->timestamp < b->timestamp;
  });

  std::vector<PseudoLabeledSegment> out;
  out.reserve(segments.size());
  for (const SegmentRef& seg : segments) {
    PseudoLabeledSegment labeled{seg.segment_id, std::nullopt, std::nullopt};
    const double mid = static_cast<double>(seg.start) + kSegmentSeconds / 2.0;
    auto it = std::lower_bound(sorted.begin(), sorted.end(), mid,
                               [](const GpsFix* f, double t) {
                                 return static_cast<double>(f->timestamp) < t;
                               });
    const GpsFix* nearest = nullptr;
    if (it != sorted.end()) nearest = *it;
    if (it != sorted.begin()) {
      const GpsFix* before = *(it - 1);
      if (nearest == nullptr ||
          mid - static_cast<double>(before->timestamp) <=
              static_cast<double>(nearest->timestamp) - mid) {
        nearest = before;
      }
    }
    if (nearest != nullptr &&
        std::abs(static_cast<double>(nearest->timestamp) - mid) <= tolerance_seconds) {
      labeled.situational_label = nearest->situational_label;
      const HexCoord cell = HexIndex(nearest->lat, nearest->lon, edge);
      for (const RankedCell& rc : ranking) {
        if (rc.cell == cell) {
          labeled.cell_rank = rc.rank;
          break;
        }
      }
    }
    out.push_back(std::move(labeled));
  }
  return out;
}

std::vector<GpsFix> LoadFixes(const std::filesystem::path& path) {
  std::vector<GpsFix> fixes;
  for (const Json& obj : ReadJsonLines(path)) {
    try {
      GpsFix fix;
      fix.user_id = obj.at("user_id").get<std::string>();
      fix.timestamp = ParseIso8601(obj.at("timestamp").get<std::string>());
      fix.lat = obj.at("lat").get<double>();
      fix.lon = obj.at("lon").get<double>();
      if (auto it = obj.find("situational_label"); it != obj.end() && !it->is_null()) {
        fix.situational_label = it->get<std::string>();
      }
      CheckLatLon(fix.lat, fix.lon);
      fixes.push_back(std::move(fix));
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ": bad GPS fix: " + e.what());
    }
  }
  std::stable_sort(fixes.begin(), fixes.end(), [](const GpsFix& a, const GpsFix& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.timestamp < b.timestamp;
  });
  return fixes;
}

std::vector<GpsFix> FixesForUser(const std::vector<GpsFix>& fixes,
                                 const std::string& user_id) {
  std::vector<GpsFix> out;
  std::copy_if(fixes.begin(), fixes.end(), std::back_inserter(out),
               [&](const GpsFix& f) { return f.user_id == user_id; });
  return out;
}

std::string RankingToCsv(const CellRanking& ranking, double edge) {
  std::ostringstream out;
  out << "rank,q,r,dwell_seconds,centroid_lat,centroid_lon,situational_label\n";
  for (const RankedCell& rc : ranking) {
    const LatLon c = HexCentroid(rc.cell, edge);
    out << rc.rank << ',' << rc.cell.q << ',' << rc.cell.r << ','
        << FormatDouble(rc.dwell_seconds) << ',' << FormatDouble(c.lat) << ','
        << FormatDouble(c.lon) << ',' << rc.majority_situational_label.value_or("")
        << '\n';
  }
  return out.str();
}

std::string PseudoLabelsToJsonLines(const std::vector<PseudoLabeledSegment>& labels) {
  std::string out;
  for (const auto& l : labels) {
    Json obj;
    obj["segment_id"] = l.segment_id;
    obj["cell_rank"] = l.cell_rank ? Json(*l.cell_rank) : Json(nullptr);
    obj["situational_label"] =
        l.situational_label ? Json(*l.situational_label) : Json(nullptr);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<PseudoLabeledSegment> LoadPseudoLabels(const std::filesystem::path& path) {
  std::vector<PseudoLabeledSegment> out;
  for (const Json& obj : ReadJsonLines(path)) {
    try {
      PseudoLabeledSegment l;
      l.segment_id = obj.at("segment_id").get<std::string>();
      if (auto it = obj.find("cell_rank"); it != obj.end() && !it->is_null()) {
        l.cell_rank = it->get<int>();
      }
      if (auto it = obj.find("situational_label"); it != obj.end() && !it->is_null()) {
        l.situational_label = it->get<std::string>();
      }
      out.push_back(std::move(l));
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ": bad label record: " + e.what());
    }
  }
  return out;
}

}  // namespace scene_latent::geogrid

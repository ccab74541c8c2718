#include "scene_latent/events.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "scene_latent/errors.h"

namespace scene_latent::events {

EventVocabulary::EventVocabulary(std::vector<VocabEntry> entries)
    : entries_(std::move(entries)) {
  if (entries_.size() != static_cast<size_t>(kClasses)) {
    throw ValidationError("vocabulary must have " + std::to_string(kClasses) +
                          " entries, got " + std::to_string(entries_.size()));
  }
  std::unordered_set<std::string> seen;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].index != static_cast<int>(i)) {
      throw ValidationError("vocabulary indices must be contiguous from 0; row " +
                            std::to_string(i) + " has index " +
                            std::to_string(entries_[i].index));
    }
    if (!seen.insert(entries_[i].class_id).second) {
      throw ValidationError("duplicate class id in vocabulary: " + entries_[i].class_id);
    }
  }
}

EventVocabulary EventVocabulary::Load(const std::filesystem::path& path) {
  const std::string text = ReadFile(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || TrimLine(line) != "index,mid,display_name") {
    throw ParseError(path.string() + ": expected header 'index,mid,display_name'");
  }
  std::vector<VocabEntry> entries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (TrimLine(line).empty()) continue;
    const std::vector<std::string> fields = ParseCsvRecord(line);
    if (fields.size() != 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 3 fields");
    }
    entries.push_back(VocabEntry{static_cast<int>(ParseInteger(fields[0], "index")),
                                 fields[1], fields[2]});
  }
  return EventVocabulary(std::move(entries));
}

std::string EventVocabulary::ToCsv() const {
  std::string out = "index,mid,display_name\n";
  for (const VocabEntry& e : entries_) {
    out += std::to_string(e.index) + ',' + QuoteCsvField(e.class_id) + ',' +
           QuoteCsvField(e.display_name) + '\n';
  }
  return out;
}

std::string EventVocabulary::Hash() const { return Fnv1aHex(ToCsv()); }

EventProbMatrix ParseProbMatrix(std::string_view csv, std::string segment_id) {
  EventProbMatrix m{std::move(segment_id), ProbValues::Zero(kSeconds, kClasses)};
  int row = 0;
  size_t pos = 0;
  while (pos < csv.size()) {
    size_t end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    const std::string_view line = TrimLine(csv.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    if (row >= kSeconds) {
      throw ShapeError(m.segment_id + ": more than " + std::to_string(kSeconds) +
                       " rows");
    }
    const auto fields = SplitFields(line);
    if (fields.size() != static_cast<size_t>(kClasses)) {
      throw ShapeError(m.segment_id + ": row " + std::to_string(row) + " has " +
                       std::to_string(fields.size()) + " columns, expected " +
                       std::to_string(kClasses));
    }
    for (int c = 0; c < kClasses; ++c) {
      const double v = ParseDouble(fields[c], m.segment_id);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw RangeError(m.segment_id + ": value " + std::string(fields[c]) +
                         " at row " + std::to_string(row) + ", column " +
                         std::to_string(c) + " is outside [0, 1]");
      }
      m.values(row, c) = v;
    }
    ++row;
  }
  if (row != kSeconds) {
    throw ShapeError(m.segment_id + ": " + std::to_string(row) + " rows, expected " +
                     std::to_string(kSeconds));
  }
  return m;
}

EventProbMatrix LoadProbMatrix(const std::filesystem::path& path) {
  return ParseProbMatrix(ReadFile(path), path.stem().string());
}

std::string ProbMatrixToCsv(const EventProbMatrix& m) {
  std::string out;
  out.reserve(static_cast<size_t>(m.values.size()) * 20);
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      if (c > 0) out += ',';
      out += FormatDouble(m.values(r, c));
    }
    out += '\n';
  }
  return out;
}

double PercentileOfPool(std::vector<double> pool, double percentile) {
  if (pool.empty()) throw InputError("percentile of an empty population");
  if (!(percentile > 0.0 && percentile < 100.0)) {
    throw InputError("percentile must lie in (0, 100)");
  }
  const double h = static_cast<double>(pool.size() - 1) * percentile / 100.0;
  const size_t lo = static_cast<size_t>(std::floor(h));
  std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(lo),
                   pool.end());
  const double lower = pool[lo];
  if (lo + 1 >= pool.size()) return lower;
  const double upper =
      *std::min_element(pool.begin() + static_cast<std::ptrdiff_t>(lo) + 1, pool.end());
  return lower + (h - static_cast<double>(lo)) * (upper - lower);
}

double ComputeThreshold(std::span<const EventProbMatrix> matrices, double percentile) {
  if (matrices.empty()) throw InputError("threshold needs at least one matrix");
  std::vector<double> pool;
  size_t total = 0;
  for (const auto& m : matrices) total += static_cast<size_t>(m.values.size());
  pool.reserve(total);
  for (const auto& m : matrices) {
    pool.insert(pool.end(), m.values.data(), m.values.data() + m.values.size());
  }
  return PercentileOfPool(std::move(pool), percentile);
}

BinaryEventMatrix Binarize(const EventProbMatrix& m, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InputError("threshold must lie in [0, 1]");
  }
  return BinaryEventMatrix{m.segment_id,
                           (m.values.array() > threshold).cast<std::uint8_t>()};
}

std::string BinaryMatrixToCsv(const BinaryEventMatrix& m) {
  std::string out;
  out.reserve(static_cast<size_t>(m.values.size()) * 2);
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      if (c > 0) out += ',';
      out += m.values(r, c) ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

std::vector<SegmentEntry> LoadManifest(const std::filesystem::path& path) {
  const std::filesystem::path base = path.parent_path();
  std::vector<SegmentEntry> entries;
  std::set<std::string> ids;
  for (const Json& obj : ReadJsonLines(path)) {
    try {
      SegmentEntry e;
      e.segment_id = obj.at("segment_id").get<std::string>();
      e.user_id = obj.at("user_id").get<std::string>();
      e.start = ParseIso8601(obj.at("start").get<std::string>());
      std::filesystem::path matrix = obj.at("matrix_path").get<std::string>();
      e.matrix_path = matrix.is_absolute() ? matrix : base / matrix;
      if (!ids.insert(e.segment_id).second) {
        throw ValidationError(path.string() + ": duplicate segment_id " + e.segment_id);
      }
      entries.push_back(std::move(e));
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ": bad manifest record: " + e.what());
    }
  }
  return entries;
}

std::string ManifestToJsonLines(const std::vector<SegmentEntry>& entries,
                                const std::filesystem::path& relative_to) {
  std::string out;
  for (const SegmentEntry& e : entries) {
    Json obj;
    obj["segment_id"] = e.segment_id;
    obj["user_id"] = e.user_id;
    obj["start"] = FormatIso8601(e.start);
    obj["matrix_path"] =
        e.matrix_path.is_absolute() && !relative_to.empty()
            ? e.matrix_path.lexically_relative(relative_to).generic_string()
            : e.matrix_path.generic_string();
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::string> UsersOf(const std::vector<SegmentEntry>& entries) {
  std::set<std::string> users;
  for (const auto& e : entries) users.insert(e.user_id);
  return {users.begin(), users.end()};
}

std::vector<SegmentEntry> EntriesForUser(const std::vector<SegmentEntry>& entries,
                                         const std::string& user_id) {
  std::vector<SegmentEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const SegmentEntry& e) { return e.user_id == user_id; });
  return out;
}

}  // namespace scene_latent::events

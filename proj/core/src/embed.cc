#include "scene_latent/embed.h"

#include <cmath>
#include <sstream>

#include "scene_latent/errors.h"

namespace scene_latent::embed {

Eigen::VectorXd SegmentEmbedding::Flat() const {
  return Eigen::Map<const Eigen::VectorXd>(matrix.data(), matrix.size());
}

SegmentEmbedding BuildSegmentEmbedding(const tfidf::TfidfVector& tfidf,
                                       const Eigen::MatrixXd& class_matrix,
                                       const events::BinaryEventMatrix& binary) {
  const Eigen::Index classes = binary.values.cols();
  if (tfidf.weights.size() != classes || class_matrix.cols() != classes) {
    throw ShapeError(binary.segment_id + ": embedding inputs disagree on class count");
  }
  SegmentEmbedding out{binary.segment_id,
                       EmbeddingMatrix::Zero(1 + class_matrix.rows(), classes)};
  const auto triggered = binary.values.colwise().maxCoeff();
  for (Eigen::Index c = 0; c < classes; ++c) {
    if (triggered(c) == 0) continue;
    out.matrix(0, c) = tfidf.weights(c);
    out.matrix.col(c).tail(class_matrix.rows()) = class_matrix.col(c);
  }
  return out;
}

EmbeddingMatrix Unflatten(const Eigen::VectorXd& flat, Eigen::Index rows) {
  if (rows <= 0 || flat.size() % rows != 0) {
    throw ShapeError("flat length is not a multiple of the row count");
  }
  return Eigen::Map<const EmbeddingMatrix>(flat.data(), rows, flat.size() / rows);
}

InputScaler::InputScaler(Eigen::VectorXd scale) : scale_(std::move(scale)) {
  for (Eigen::Index d = 0; d < scale_.size(); ++d) {
    if (!(scale_(d) > 0.0) || !std::isfinite(scale_(d))) {
      throw ValidationError("scaler factors must be positive and finite");
    }
  }
}

InputScaler InputScaler::Fit(std::span<const Eigen::VectorXd> training) {
  if (training.empty()) throw InputError("cannot fit a scaler on an empty set");
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(training.front().size());
  for (const auto& v : training) {
    if (v.size() != scale.size()) throw ShapeError("scaler inputs differ in length");
    scale = scale.cwiseMax(v.cwiseAbs());
  }
  for (Eigen::Index d = 0; d < scale.size(); ++d) {
    if (scale(d) == 0.0) scale(d) = 1.0;
  }
  return InputScaler(std::move(scale));
}

Eigen::VectorXd InputScaler::Apply(const Eigen::VectorXd& v) const {
  if (v.size() != scale_.size()) throw ShapeError("scaler dimension mismatch");
  return v.cwiseQuotient(scale_);
}

Eigen::VectorXd InputScaler::Invert(const Eigen::VectorXd& scaled) const {
  if (scaled.size() != scale_.size()) throw ShapeError("scaler dimension mismatch");
  return scaled.cwiseProduct(scale_);
}

std::string TableToCsv(const EmbeddingTable& table, std::string_view prefix) {
  const Eigen::Index dim = table.vectors.empty() ? kFlatDim : table.vectors.front().size();
  std::string out = "segment_id";
  for (Eigen::Index d = 0; d < dim; ++d) {
    out += ',';
    out += prefix;
    out += std::to_string(d);
  }
  out += '\n';
  for (size_t i = 0; i < table.vectors.size(); ++i) {
    out += table.segment_ids[i];
    for (Eigen::Index d = 0; d < table.vectors[i].size(); ++d) {
      out += ',';
      out += FormatDouble(table.vectors[i](d));
    }
    out += '\n';
  }
  return out;
}

EmbeddingTable ParseTable(std::string_view csv, std::string_view source) {
  EmbeddingTable table;
  size_t pos = 0;
  size_t dim = 0;
  bool header = true;
  while (pos < csv.size()) {
    size_t end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    const std::string_view line = TrimLine(csv.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    const auto fields = SplitFields(line);
    if (header) {
      if (fields.empty() || fields[0] != "segment_id") {
        throw ParseError(std::string(source) + ": expected a segment_id header");
      }
      dim = fields.size() - 1;
      header = false;
      continue;
    }
    if (fields.size() != dim + 1) {
      throw ShapeError(std::string(source) + ": row for " + std::string(fields[0]) +
                       " has " + std::to_string(fields.size() - 1) +
                       " values, expected " + std::to_string(dim));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (size_t d = 0; d < dim; ++d) {
      v(static_cast<Eigen::Index>(d)) = ParseDouble(fields[d + 1], source);
    }
    table.segment_ids.emplace_back(fields[0]);
    table.vectors.push_back(std::move(v));
  }
  if (header) throw ParseError(std::string(source) + ": empty table");
  return table;
}

EmbeddingTable LoadTable(const std::filesystem::path& path) {
  return ParseTable(ReadFile(path), path.string());
}

}  // namespace scene_latent::embed

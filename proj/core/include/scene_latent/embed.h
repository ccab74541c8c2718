#ifndef SCENE_LATENT_EMBED_H_
#define SCENE_LATENT_EMBED_H_

// Per-segment 6 x 521 embedding: row 0 holds TF-IDF weights, rows 1..5 the
// ontology embedding of every class triggered in the segment. Columns of
// untriggered classes are zero. Flattened row-major to 3126 values.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scene_latent/events.h"
#include "scene_latent/tfidf.h"

namespace scene_latent::embed {

inline constexpr int kRows = 6;
inline constexpr int kFlatDim = kRows * events::kClasses;  // 3126

using EmbeddingMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SegmentEmbedding {
  std::string segment_id;
  EmbeddingMatrix matrix;  // (1 + embedding dim) x classes

  Eigen::VectorXd Flat() const;
};

SegmentEmbedding BuildSegmentEmbedding(const tfidf::TfidfVector& tfidf,
                                       const Eigen::MatrixXd& class_matrix,
                                       const events::BinaryEventMatrix& binary);

EmbeddingMatrix Unflatten(const Eigen::VectorXd& flat, Eigen::Index rows);

// Max-abs scaling; all-zero dimensions get scale 1.
class InputScaler {
 public:
  InputScaler() = default;
  explicit InputScaler(Eigen::VectorXd scale);

  static InputScaler Fit(std::span<const Eigen::VectorXd> training);

  const Eigen::VectorXd& scale() const { return scale_; }
  Eigen::Index dim() const { return scale_.size(); }

  // No clipping: held-out values may leave [-1, 1].
  Eigen::VectorXd Apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd Invert(const Eigen::VectorXd& scaled) const;

 private:
  Eigen::VectorXd scale_;
};

// CSV `segment_id,f0,...,f3125`, one row per segment.
struct EmbeddingTable {
  std::vector<std::string> segment_ids;
  std::vector<Eigen::VectorXd> vectors;
};

std::string TableToCsv(const EmbeddingTable& table, std::string_view prefix = "f");
EmbeddingTable LoadTable(const std::filesystem::path& path);
EmbeddingTable ParseTable(std::string_view csv, std::string_view source);

}  // namespace scene_latent::embed

#endif  // SCENE_LATENT_EMBED_H_

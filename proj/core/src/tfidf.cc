#include "scene_latent/tfidf.h"

#include <cmath>

#include "scene_latent/errors.h"

namespace scene_latent::tfidf {

CorpusStats DocumentFrequency(std::span<const events::BinaryEventMatrix> corpus) {
  if (corpus.empty()) throw InputError("document frequency of an empty corpus");
  const Eigen::Index classes = corpus.front().values.cols();
  CorpusStats stats{static_cast<int>(corpus.size()), Eigen::VectorXi::Zero(classes)};
  for (const auto& m : corpus) {
    if (m.values.cols() != classes) {
      throw ShapeError(m.segment_id + ": class count differs within corpus");
    }
    stats.df += (m.values.colwise().maxCoeff().transpose().array() > 0)
                    .cast<int>()
                    .matrix();
  }
  return stats;
}

Eigen::VectorXi TermFrequency(const events::BinaryEventMatrix& m) {
  return m.values.cast<int>().colwise().sum().transpose();
}

double InverseDocumentFrequency(const CorpusStats& stats, int cls) {
  return std::log((1.0 + stats.n_docs) / (1.0 + stats.df(cls))) + 1.0;
}

TfidfVector Vectorize(const events::BinaryEventMatrix& m, const CorpusStats& stats) {
  if (m.values.cols() != stats.df.size()) {
    throw ShapeError(m.segment_id + ": class count does not match corpus stats");
  }
  const Eigen::VectorXi tf = TermFrequency(m);
  TfidfVector out{m.segment_id, Eigen::VectorXd::Zero(tf.size())};
  for (Eigen::Index c = 0; c < tf.size(); ++c) {
    if (tf(c) > 0) {
      out.weights(c) = tf(c) * InverseDocumentFrequency(stats, static_cast<int>(c));
    }
  }
  const double norm = out.weights.norm();
  if (norm > 0.0) out.weights /= norm;
  return out;
}

std::string ToCsv(std::span<const TfidfVector> vectors) {
  std::string out = "segment_id";
  const Eigen::Index dim = vectors.empty() ? events::kClasses : vectors.front().weights.size();
  for (Eigen::Index c = 0; c < dim; ++c) out += ",w" + std::to_string(c);
  out += '\n';
  for (const auto& v : vectors) {
    out += v.segment_id;
    for (Eigen::Index c = 0; c < v.weights.size(); ++c) {
      out += ',';
      out += FormatDouble(v.weights(c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace scene_latent::tfidf

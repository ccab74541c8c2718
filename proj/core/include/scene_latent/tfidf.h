#ifndef SCENE_LATENT_TFIDF_H_
#define SCENE_LATENT_TFIDF_H_

// TF-IDF over events-as-words and segments-as-documents.
//
//   tf(c)  = seconds in which class c is active (0..60)
//   idf(c) = ln((1 + n_docs) / (1 + df(c))) + 1
//   w      = tf * idf, L2-normalized (an empty segment stays all-zero)

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scene_latent/events.h"

namespace scene_latent::tfidf {

struct CorpusStats {
  int n_docs = 0;
  Eigen::VectorXi df;  // per class, documents with >= 1 active second
};

struct TfidfVector {
  std::string segment_id;
  Eigen::VectorXd weights;
};

CorpusStats DocumentFrequency(std::span<const events::BinaryEventMatrix> corpus);

// Per-class active-second counts of one segment.
Eigen::VectorXi TermFrequency(const events::BinaryEventMatrix& m);
double InverseDocumentFrequency(const CorpusStats& stats, int cls);

TfidfVector Vectorize(const events::BinaryEventMatrix& m, const CorpusStats& stats);

// CSV: segment_id,w0,...,w520
std::string ToCsv(std::span<const TfidfVector> vectors);

}  // namespace scene_latent::tfidf

#endif  // SCENE_LATENT_TFIDF_H_

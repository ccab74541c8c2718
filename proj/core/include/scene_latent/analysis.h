#ifndef SCENE_LATENT_ANALYSIS_H_
#define SCENE_LATENT_ANALYSIS_H_

// Cosine distances grouped by pseudo-label, and exact t-SNE projections.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scene_latent::analysis {

// 1 - x.y / (|x| |y|), clamped to [0, 2]. DomainError on a zero vector.
double CosineDistance(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct DistanceMatrix {
  std::vector<std::string> labels;
  // values[a][b]; a diagonal entry is absent when its label has < 2 segments.
  std::vector<std::vector<std::optional<double>>> values;
};

// Entry (a, b) is the mean distance over pairs u != v with label(u) = a and
// label(v) = b. Segments without a vector or label are skipped. Labels that
// parse as integers sort numerically, others lexicographically after them.
DistanceMatrix LabelDistanceMatrix(const std::map<std::string, Eigen::VectorXd>& vectors,
                                   const std::map<std::string, std::string>& labels);

// Empty cells for absent entries.
std::string DistanceMatrixToCsv(const DistanceMatrix& m);

// Mean off-diagonal entry over mean diagonal entry (defined entries only).
double ContrastRatio(const DistanceMatrix& m);

// Element-wise tanh, for visualization only.
Eigen::VectorXd LatentVizTransform(const Eigen::VectorXd& z);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  // Upper bound; the step actually used is
  // min(learning_rate, max(n / (4 * early_exaggeration), 50)).
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iteration = 250;
  std::uint64_t seed = 0;
  // Record KL(P || Q) every `trace_every` iterations (0 disables).
  int trace_every = 50;
};

struct TsneResult {
  Eigen::MatrixXd embedding;  // n x 2
  double perplexity_used = 0.0;
  double learning_rate_used = 0.0;
  std::vector<std::pair<int, double>> kl_trace;  // (iteration, KL)
};

// Exact t-SNE on the rows of `points` (n >= 5).
TsneResult Tsne(const Eigen::MatrixXd& points, const TsneConfig& cfg);

// Conditional affinities p_{j|i} of one row with perplexity matched by
// bisection over the Gaussian precision; exposed for testing.
Eigen::VectorXd ConditionalAffinities(const Eigen::VectorXd& sq_distances, int self,
                                      double perplexity);

}  // namespace scene_latent::analysis

#endif  // SCENE_LATENT_ANALYSIS_H_

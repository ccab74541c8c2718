#ifndef SCENE_LATENT_TESTS_ORACLES_H_
#define SCENE_LATENT_TESTS_ORACLES_H_

// Independent reference implementations shared by the unit and acceptance
// tests. They deliberately use plain loops rather than the library code.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "scene_latent/events.h"
#include "scene_latent/random.h"
#include "scene_latent/vae.h"

namespace scene_latent::testing {

// Raw active-second counts, idf = ln((1+N)/(1+df)) + 1, unit L2 norm.
inline std::vector<std::vector<double>> BruteForceTfidf(
    const std::vector<events::BinaryEventMatrix>& docs) {
  const size_t n = docs.size();
  const auto classes = static_cast<size_t>(docs.front().values.cols());
  std::vector<double> df(classes, 0.0);
  std::vector<std::vector<double>> w(n, std::vector<double>(classes, 0.0));
  for (size_t d = 0; d < n; ++d) {
    for (size_t c = 0; c < classes; ++c) {
      for (Eigen::Index s = 0; s < docs[d].values.rows(); ++s) {
        w[d][c] += docs[d].values(s, static_cast<Eigen::Index>(c));
      }
      if (w[d][c] > 0) df[c] += 1.0;
    }
  }
  for (size_t d = 0; d < n; ++d) {
    double norm = 0.0;
    for (size_t c = 0; c < classes; ++c) {
      w[d][c] *= std::log((1.0 + static_cast<double>(n)) / (1.0 + df[c])) + 1.0;
      norm += w[d][c] * w[d][c];
    }
    norm = std::sqrt(norm);
    if (norm > 0) {
      for (double& x : w[d]) x /= norm;
    }
  }
  return w;
}

inline std::vector<events::BinaryEventMatrix> RandomBinaryCorpus(std::uint64_t seed, int docs,
                                                                 int classes, double density) {
  RandomEngine rng(seed);
  std::vector<events::BinaryEventMatrix> out;
  for (int d = 0; d < docs; ++d) {
    events::BinaryEventMatrix m{"d" + std::to_string(d),
                                events::BinaryValues::Zero(events::kSeconds, classes)};
    for (Eigen::Index i = 0; i < m.values.size(); ++i) {
      m.values.data()[i] = UniformUnit(rng) < density ? 1 : 0;
    }
    out.push_back(std::move(m));
  }
  return out;
}

// Three isotropic unit-variance Gaussian clusters whose means sit
// `separation` apart along distinct axes; rows are grouped by cluster.
inline Eigen::MatrixXd GaussianClusters(int per_cluster, int dim, double separation,
                                        std::uint64_t seed) {
  RandomEngine rng(seed);
  Eigen::MatrixXd points(3 * per_cluster, dim);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      for (int d = 0; d < dim; ++d) {
        points(c * per_cluster + i, d) = (d == c ? separation : 0.0) + StandardNormal(rng);
      }
    }
  }
  return points;
}

inline double NearestCentroidPurity(const Eigen::MatrixXd& y, int per_cluster) {
  const Eigen::Index k = y.rows() / per_cluster;
  Eigen::MatrixXd centroids(k, y.cols());
  for (Eigen::Index c = 0; c < k; ++c) {
    centroids.row(c) = y.middleRows(c * per_cluster, per_cluster).colwise().mean();
  }
  int correct = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Eigen::Index best = 0;
    (centroids.rowwise() - y.row(i)).rowwise().squaredNorm().minCoeff(&best);
    if (best == i / per_cluster) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(y.rows());
}

struct GradientProbe {
  std::string tensor;
  size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

// Central differences of the total ELBO of a train-mode forward pass with
// fixed noise. Every tensor is probed once, then `extra` random probes.
inline std::vector<GradientProbe> ProbeGradients(vae::VaeModel model, const vae::Matrix& x,
                                                 const vae::Matrix& noise, int extra,
                                                 std::uint64_t seed, double h = 1e-6) {
  auto loss = [&](const vae::VaeModel& m) {
    const auto fwd = vae::ForwardWithNoise(m, x, vae::Mode::kTrain, noise);
    return vae::ElboLoss(x, fwd.x_hat, fwd.mu, fwd.logvar).total;
  };
  const auto fwd = vae::ForwardWithNoise(model, x, vae::Mode::kTrain, noise);
  vae::VaeParams grads = vae::Backward(model, x, fwd);

  std::vector<std::string> names;
  model.params.ForEach([&](const std::string& n, std::span<const double>) { names.push_back(n); });
  auto slots = [](vae::VaeParams& p, const std::string& name) {
    std::vector<double*> out;
    p.ForEach([&](const std::string& n, std::span<double> t) {
      if (n == name) {
        for (double& v : t) out.push_back(&v);
      }
    });
    return out;
  };

  RandomEngine rng(seed);
  std::vector<GradientProbe> probes;
  for (size_t k = 0; k < names.size() + static_cast<size_t>(extra); ++k) {
    const std::string name =
        k < names.size() ? names[k]
                         : names[static_cast<size_t>(UniformUnit(rng) * static_cast<double>(names.size()))];
    auto params = slots(model.params, name);
    const auto g = slots(grads, name);
    const auto i = static_cast<size_t>(UniformUnit(rng) * static_cast<double>(params.size()));
    const double saved = *params[i];
    *params[i] = saved + h;
    const double up = loss(model);
    *params[i] = saved - h;
    const double down = loss(model);
    *params[i] = saved;
    GradientProbe p{name, i, *g[i], (up - down) / (2 * h), 0.0};
    p.relative_error = std::abs(p.numeric - p.analytic) /
                       std::max({std::abs(p.numeric), std::abs(p.analytic), 1e-7});
    probes.push_back(p);
  }
  return probes;
}

// The toy network used for gradient checks: 8 -> 4 -> 2 -> 4 -> 8, batch 4,
// with biases and batch-norm parameters moved off their initial values.
inline vae::VaeModel ToyModel(std::uint64_t seed) {
  vae::VaeConfig cfg;
  cfg.input_dim = 8;
  cfg.encoder_hidden = {4};
  cfg.latent_dim = 2;
  cfg.decoder_hidden = {4};
  cfg.batch_size = 4;
  cfg.seed = seed;
  auto model = vae::InitModel(cfg);
  RandomEngine rng(DeriveSeed(seed, {77}));
  model.params.ForEach([&](const std::string& name, std::span<double> t) {
    if (name.ends_with(".gain") || name.ends_with(".shift") || name.ends_with(".bias")) {
      for (double& v : t) v += Uniform(rng, -0.5, 0.5);
    }
  });
  return model;
}

}  // namespace scene_latent::testing

#endif  // SCENE_LATENT_TESTS_ORACLES_H_

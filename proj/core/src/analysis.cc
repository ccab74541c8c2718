#include "scene_latent/analysis.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "scene_latent/errors.h"
#include "scene_latent/io.h"
#include "scene_latent/random.h"

namespace scene_latent::analysis {

double CosineDistance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw ShapeError("cosine distance: length mismatch");
  const double nx = x.norm();
  const double ny = y.norm();
  if (!(nx > 0.0) || !(ny > 0.0)) {
    throw DomainError("cosine distance is undefined for a zero-norm vector");
  }
  return std::clamp(1.0 - x.dot(y) / (nx * ny), 0.0, 2.0);
}

namespace {

bool LabelLess(const std::string& a, const std::string& b) {
  long long ia = 0;
  long long ib = 0;
  const auto ra = std::from_chars(a.data(), a.data() + a.size(), ia);
  const auto rb = std::from_chars(b.data(), b.data() + b.size(), ib);
  const bool na = ra.ec == std::errc() && ra.ptr == a.data() + a.size();
  const bool nb = rb.ec == std::errc() && rb.ptr == b.data() + b.size();
  if (na && nb) return ia < ib;
  if (na != nb) return na;
  return a < b;
}

}  // namespace

DistanceMatrix LabelDistanceMatrix(const std::map<std::string, Eigen::VectorXd>& vectors,
                                   const std::map<std::string, std::string>& labels) {
  std::map<std::string, std::vector<const Eigen::VectorXd*>, decltype(&LabelLess)> groups(
      &LabelLess);
  for (const auto& [segment, label] : labels) {
    auto it = vectors.find(segment);
    if (it == vectors.end()) continue;
    groups[label].push_back(&it->second);
  }
  DistanceMatrix out;
  for (const auto& [label, members] : groups) out.labels.push_back(label);
  const size_t k = out.labels.size();
  out.values.assign(k, std::vector<std::optional<double>>(k));

  std::vector<const std::vector<const Eigen::VectorXd*>*> members;
  for (const auto& [label, m] : groups) members.push_back(&m);
  for (size_t a = 0; a < k; ++a) {
    for (size_t b = a; b < k; ++b) {
      const auto& ga = *members[a];
      const auto& gb = *members[b];
      double sum = 0.0;
      size_t count = 0;
      if (a == b) {
        for (size_t i = 0; i < ga.size(); ++i) {
          for (size_t j = i + 1; j < ga.size(); ++j) {
            sum += CosineDistance(*ga[i], *ga[j]);
            ++count;
          }
        }
      } else {
        for (const auto* u : ga) {
          for (const auto* v : gb) {
            sum += CosineDistance(*u, *v);
            ++count;
          }
        }
      }
      if (count > 0) {
        out.values[a][b] = sum / static_cast<double>(count);
        out.values[b][a] = out.values[a][b];
      }
    }
  }
  return out;
}

std::string DistanceMatrixToCsv(const DistanceMatrix& m) {
  std::string out = "label";
  for (const auto& l : m.labels) out += ',' + QuoteCsvField(l);
  out += '\n';
  for (size_t a = 0; a < m.labels.size(); ++a) {
    out += QuoteCsvField(m.labels[a]);
    for (size_t b = 0; b < m.labels.size(); ++b) {
      out += ',';
      if (m.values[a][b]) out += FormatDouble(*m.values[a][b]);
    }
    out += '\n';
  }
  return out;
}

double ContrastRatio(const DistanceMatrix& m) {
  double diag = 0.0;
  double off = 0.0;
  size_t n_diag = 0;
  size_t n_off = 0;
  for (size_t a = 0; a < m.labels.size(); ++a) {
    for (size_t b = 0; b < m.labels.size(); ++b) {
      if (!m.values[a][b]) continue;
      if (a == b) {
        diag += *m.values[a][b];
        ++n_diag;
      } else {
        off += *m.values[a][b];
        ++n_off;
      }
    }
  }
  if (n_diag == 0 || n_off == 0) {
    throw DomainError("contrast ratio needs defined diagonal and off-diagonal entries");
  }
  return (off / static_cast<double>(n_off)) / (diag / static_cast<double>(n_diag));
}

Eigen::VectorXd LatentVizTransform(const Eigen::VectorXd& z) {
  return z.array().tanh().matrix();
}

Eigen::VectorXd ConditionalAffinities(const Eigen::VectorXd& sq_distances, int self,
                                      double perplexity) {
  const Eigen::Index n = sq_distances.size();
  const double target = std::log(perplexity);
  double beta = 1.0;
  double beta_min = -std::numeric_limits<double>::infinity();
  double beta_max = std::numeric_limits<double>::infinity();
  Eigen::VectorXd p(n);
  for (int iter = 0; iter < 50; ++iter) {
    // Shift by the smallest off-diagonal distance so exp() cannot underflow
    // to an all-zero row; the shift cancels in the normalization.
    double d_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != self) d_min = std::min(d_min, sq_distances(j));
    }
    double sum = 0.0;
    double weighted = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      p(j) = j == self ? 0.0 : std::exp(-beta * (sq_distances(j) - d_min));
      sum += p(j);
      weighted += (sq_distances(j) - d_min) * p(j);
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    p /= sum;
    const double diff = entropy - target;
    if (std::abs(diff) < 1e-5) break;
    if (diff > 0) {
      beta_min = beta;
      beta = std::isinf(beta_max) ? beta * 2.0 : (beta + beta_max) / 2.0;
    } else {
      beta_max = beta;
      beta = std::isinf(beta_min) ? beta / 2.0 : (beta + beta_min) / 2.0;
    }
  }
  return p;
}

TsneResult Tsne(const Eigen::MatrixXd& points, const TsneConfig& cfg) {
  const Eigen::Index n = points.rows();
  if (n < 5) throw InputError("t-SNE needs at least 5 points");
  if (points.cols() < 1) throw InputError("t-SNE needs at least one input dimension");
  if (cfg.iterations <= cfg.exaggeration_iterations) {
    throw InputError("t-SNE iterations must exceed the exaggeration phase");
  }
  TsneResult result;
  result.perplexity_used = std::min(cfg.perplexity, static_cast<double>(n - 1) / 3.0);
  result.learning_rate_used = std::min(
      cfg.learning_rate,
      std::max(static_cast<double>(n) / (4.0 * cfg.early_exaggeration), 50.0));

  const Eigen::VectorXd sq_norms = points.rowwise().squaredNorm();
  Eigen::MatrixXd dist = -2.0 * points * points.transpose();
  dist.colwise() += sq_norms;
  dist.rowwise() += sq_norms.transpose();
  dist = dist.cwiseMax(0.0);

  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.row(i) = ConditionalAffinities(dist.row(i).transpose(), static_cast<int>(i),
                                     result.perplexity_used)
                   .transpose();
  }
  p = p + p.transpose().eval();
  p /= p.sum();
  p = p.cwiseMax(1e-12);

  RandomEngine rng(DeriveSeed(cfg.seed, {0x75e3ULL}));
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-2 * StandardNormal(rng);
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n);
  Eigen::MatrixXd grad(n, 2);

  auto affinities = [&]() {
    const Eigen::VectorXd y_sq = y.rowwise().squaredNorm();
    num = -2.0 * y * y.transpose();
    num.colwise() += y_sq;
    num.rowwise() += y_sq.transpose();
    num = (1.0 + num.array()).inverse().matrix();
    num.diagonal().setZero();
    return num.sum();
  };
  auto kl = [&]() {
    const double z = affinities();
    double value = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(num(i, j) / z, 1e-12);
        value += p(i, j) * std::log(p(i, j) / q);
      }
    }
    return value;
  };

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // Velocities and gains built against the exaggerated objective overshoot
    // once it is lifted; the second phase starts from rest.
    if (iter == cfg.exaggeration_iterations) {
      update.setZero();
      gains.setOnes();
    }
    const double exaggeration =
        iter < cfg.exaggeration_iterations ? cfg.early_exaggeration : 1.0;
    const double momentum =
        iter < cfg.momentum_switch_iteration ? cfg.initial_momentum : cfg.final_momentum;
    const double z = affinities();
    const Eigen::MatrixXd q = (num / z).cwiseMax(1e-12);
    const Eigen::MatrixXd w = (exaggeration * p - q).cwiseProduct(num);
    // grad_i = 4 * sum_j w_ij (y_i - y_j)
    grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);

    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      double& g = gains.data()[i];
      const bool same_sign = (grad.data()[i] > 0) == (update.data()[i] > 0);
      g = same_sign ? g * 0.8 : g + 0.2;
      g = std::max(g, 0.01);
    }
    update = momentum * update - result.learning_rate_used * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();

    if (cfg.trace_every > 0 && (iter + 1) % cfg.trace_every == 0) {
      result.kl_trace.emplace_back(iter + 1, kl());
    }
  }
  result.embedding = y;
  return result;
}

}  // namespace scene_latent::analysis

#include "scene_latent/vae.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scene_latent/errors.h"

namespace scene_latent::vae {

namespace {

constexpr std::string_view kFormat = "scene-latent-vae/1";

Matrix Affine(const Matrix& x, const Linear& layer) {
  Matrix out = x * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  return out;
}

// affine -> batch-norm -> ReLU
LayerCache HiddenForward(const Matrix& x, const Linear& layer, const Norm& norm,
                         const RunningStats& stats, Mode mode, double eps) {
  LayerCache cache;
  cache.input = x;
  const Matrix a = Affine(x, layer);
  if (mode == Mode::kTrain) {
    const double n = static_cast<double>(a.rows());
    cache.batch_mean = a.colwise().sum().transpose() / n;
    const Matrix centered = a.rowwise() - cache.batch_mean.transpose();
    cache.batch_var = centered.array().square().colwise().sum().transpose() / n;
    cache.inv_std = (cache.batch_var.array() + eps).rsqrt();
    cache.normalized = centered * cache.inv_std.asDiagonal();
  } else {
    cache.inv_std = (stats.var.array() + eps).rsqrt();
    cache.normalized = (a.rowwise() - stats.mean.transpose()) * cache.inv_std.asDiagonal();
  }
  Matrix y = cache.normalized * norm.gain.asDiagonal();
  y.rowwise() += norm.shift.transpose();
  cache.output = y.cwiseMax(0.0);
  return cache;
}

// Returns d(loss)/d(layer input); accumulates parameter gradients.
Matrix HiddenBackward(const Matrix& d_out, const LayerCache& cache, const Linear& layer,
                      const Norm& norm, Linear& g_layer, Norm& g_norm,
                      bool need_input_grad) {
  const double n = static_cast<double>(d_out.rows());
  const Matrix dy = d_out.cwiseProduct((cache.output.array() > 0.0).cast<double>().matrix());
  g_norm.gain = dy.cwiseProduct(cache.normalized).colwise().sum().transpose();
  g_norm.shift = dy.colwise().sum().transpose();
  const Matrix dn = dy * norm.gain.asDiagonal();
  const Vector sum_dn = dn.colwise().sum().transpose();
  const Vector sum_dn_n = dn.cwiseProduct(cache.normalized).colwise().sum().transpose();
  Matrix da = n * dn;
  da.rowwise() -= sum_dn.transpose();
  da -= cache.normalized * sum_dn_n.asDiagonal();
  da = da * (cache.inv_std / n).asDiagonal();
  g_layer.weight = da.transpose() * cache.input;
  g_layer.bias = da.colwise().sum().transpose();
  if (!need_input_grad) return {};
  return da * layer.weight;
}

Linear InitLinear(int in, int out, RandomEngine& rng) {
  Linear layer{Matrix(out, in), Vector::Zero(out)};
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  // Row-major fill order so the draw sequence matches the serialized layout.
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) layer.weight(r, c) = Uniform(rng, -limit, limit);
  }
  return layer;
}

Norm InitNorm(int dim) { return Norm{Vector::Ones(dim), Vector::Zero(dim)}; }
RunningStats InitStats(int dim) { return RunningStats{Vector::Zero(dim), Vector::Ones(dim)}; }

Matrix Gather(std::span<const Vector> data, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), data.front().size());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data[static_cast<size_t>(rows[i])].transpose();
  }
  return out;
}

}  // namespace

void VaeConfig::Validate() const {
  auto positive = [](int v) { return v > 0; };
  if (input_dim <= 0 || latent_dim <= 0 || batch_size < 2 || max_epochs <= 0 ||
      patience <= 0 || !std::all_of(encoder_hidden.begin(), encoder_hidden.end(), positive) ||
      !std::all_of(decoder_hidden.begin(), decoder_hidden.end(), positive)) {
    throw InputError("vae: dimensions, batch_size (>= 2), epochs and patience must be positive");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError("vae: test_fraction must lie in (0, 1)");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InputError("vae: momentum must lie in [0, 1)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InputError("vae: lr_decay must lie in (0, 1]");
  if (!(initial_lr > 0.0)) throw InputError("vae: initial_lr must be positive");
  if (!(bn_epsilon > 0.0) || !(bn_momentum > 0.0 && bn_momentum <= 1.0)) {
    throw InputError("vae: invalid batch-norm settings");
  }
}

Json ConfigToJson(const VaeConfig& cfg) {
  return Json{{"input_dim", cfg.input_dim},
              {"encoder_hidden", cfg.encoder_hidden},
              {"latent_dim", cfg.latent_dim},
              {"decoder_hidden", cfg.decoder_hidden},
              {"batch_size", cfg.batch_size},
              {"max_epochs", cfg.max_epochs},
              {"patience", cfg.patience},
              {"momentum", cfg.momentum},
              {"lr_decay", cfg.lr_decay},
              {"initial_lr", cfg.initial_lr},
              {"test_fraction", cfg.test_fraction},
              {"min_delta", cfg.min_delta},
              {"bn_momentum", cfg.bn_momentum},
              {"bn_epsilon", cfg.bn_epsilon},
              {"seed", cfg.seed}};
}

VaeConfig ConfigFromJson(const Json& j) {
  VaeConfig cfg;
  try {
    cfg.input_dim = j.value("input_dim", cfg.input_dim);
    cfg.encoder_hidden = j.value("encoder_hidden", cfg.encoder_hidden);
    cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
    cfg.decoder_hidden = j.value("decoder_hidden", cfg.decoder_hidden);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.lr_decay = j.value("lr_decay", cfg.lr_decay);
    cfg.initial_lr = j.value("initial_lr", cfg.initial_lr);
    cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    cfg.min_delta = j.value("min_delta", cfg.min_delta);
    cfg.bn_momentum = j.value("bn_momentum", cfg.bn_momentum);
    cfg.bn_epsilon = j.value("bn_epsilon", cfg.bn_epsilon);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("vae config: ") + e.what());
  }
  return cfg;
}

VaeParams VaeParams::ZerosLike() const {
  VaeParams z = *this;
  z.ForEach([](const std::string&, std::span<double> t) {
    std::fill(t.begin(), t.end(), 0.0);
  });
  return z;
}

size_t VaeParams::NumScalars() const {
  size_t n = 0;
  ForEach([&](const std::string&, std::span<const double> t) { n += t.size(); });
  return n;
}

VaeModel InitModel(const VaeConfig& cfg) {
  cfg.Validate();
  VaeModel model;
  model.config = cfg;
  RandomEngine rng(DeriveSeed(cfg.seed, {1}));
  int in = cfg.input_dim;
  for (int width : cfg.encoder_hidden) {
    model.params.encoder.push_back(InitLinear(in, width, rng));
    model.params.encoder_norm.push_back(InitNorm(width));
    model.encoder_stats.push_back(InitStats(width));
    in = width;
  }
  model.params.mu_head = InitLinear(in, cfg.latent_dim, rng);
  model.params.logvar_head = InitLinear(in, cfg.latent_dim, rng);
  in = cfg.latent_dim;
  for (int width : cfg.decoder_hidden) {
    model.params.decoder.push_back(InitLinear(in, width, rng));
    model.params.decoder_norm.push_back(InitNorm(width));
    model.decoder_stats.push_back(InitStats(width));
    in = width;
  }
  model.params.decoder.push_back(InitLinear(in, cfg.input_dim, rng));
  return model;
}

ForwardResult ForwardWithNoise(const VaeModel& model, const Matrix& batch, Mode mode,
                               const Matrix& noise) {
  const VaeConfig& cfg = model.config;
  if (batch.cols() != cfg.input_dim) {
    throw ShapeError("vae: batch width " + std::to_string(batch.cols()) +
                     " != input_dim " + std::to_string(cfg.input_dim));
  }
  if (mode == Mode::kTrain && batch.rows() < 2) {
    throw InputError("vae: train-mode forward needs a batch of at least 2");
  }
  if (batch.rows() < 1) throw InputError("vae: empty batch");
  if (noise.rows() != batch.rows() || noise.cols() != cfg.latent_dim) {
    throw ShapeError("vae: noise must be batch x latent_dim");
  }
  const VaeParams& p = model.params;
  ForwardResult out;
  Matrix h = batch;
  for (size_t i = 0; i < p.encoder.size(); ++i) {
    out.encoder.push_back(HiddenForward(h, p.encoder[i], p.encoder_norm[i],
                                        model.encoder_stats[i], mode, cfg.bn_epsilon));
    h = out.encoder.back().output;
  }
  out.mu = Affine(h, p.mu_head);
  out.logvar = Affine(h, p.logvar_head);
  out.noise = noise;
  out.z = out.mu + ((0.5 * out.logvar.array()).exp() * noise.array()).matrix();
  h = out.z;
  for (size_t i = 0; i < p.decoder_norm.size(); ++i) {
    out.decoder.push_back(HiddenForward(h, p.decoder[i], p.decoder_norm[i],
                                        model.decoder_stats[i], mode, cfg.bn_epsilon));
    h = out.decoder.back().output;
  }
  out.decoder_head_input = h;
  out.x_hat = Affine(h, p.decoder.back()).array().tanh().matrix();
  return out;
}

ForwardResult Forward(const VaeModel& model, const Matrix& batch, Mode mode,
                      RandomEngine& rng) {
  Matrix noise = Matrix::Zero(batch.rows(), model.config.latent_dim);
  if (mode == Mode::kTrain) {
    for (Eigen::Index r = 0; r < noise.rows(); ++r) {
      for (Eigen::Index c = 0; c < noise.cols(); ++c) noise(r, c) = StandardNormal(rng);
    }
  }
  return ForwardWithNoise(model, batch, mode, noise);
}

void UpdateRunningStats(VaeModel& model, const ForwardResult& fwd) {
  const double m = model.config.bn_momentum;
  auto update = [m](RunningStats& stats, const LayerCache& cache) {
    if (cache.batch_var.size() == 0) return;  // eval-mode pass
    const double n = static_cast<double>(cache.input.rows());
    stats.mean = (1.0 - m) * stats.mean + m * cache.batch_mean;
    stats.var = (1.0 - m) * stats.var + m * cache.batch_var * (n / (n - 1.0));
  };
  for (size_t i = 0; i < fwd.encoder.size(); ++i) update(model.encoder_stats[i], fwd.encoder[i]);
  for (size_t i = 0; i < fwd.decoder.size(); ++i) update(model.decoder_stats[i], fwd.decoder[i]);
}

LossBreakdown ElboLoss(const Matrix& x, const Matrix& x_hat, const Matrix& mu,
                       const Matrix& logvar) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols() || mu.rows() != x.rows() ||
      logvar.rows() != mu.rows() || logvar.cols() != mu.cols()) {
    throw ShapeError("elbo: shape mismatch");
  }
  if (!x.allFinite() || !x_hat.allFinite() || !mu.allFinite() || !logvar.allFinite()) {
    throw NumericError("elbo: non-finite input");
  }
  const double n = static_cast<double>(x.rows());
  LossBreakdown loss;
  loss.reconstruction = (x - x_hat).squaredNorm() / n;
  // Per element 1 + lv - mu^2 - exp(lv) <= 0, so kl >= 0 up to rounding.
  loss.kl = -0.5 *
            (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum() / n;
  loss.total = loss.reconstruction + loss.kl;
  return loss;
}

VaeParams Backward(const VaeModel& model, const Matrix& batch, const ForwardResult& fwd) {
  const VaeParams& p = model.params;
  VaeParams g = p.ZerosLike();
  const double n = static_cast<double>(batch.rows());

  // Output layer: x_hat = tanh(o).
  const Matrix d_xhat = 2.0 * (fwd.x_hat - batch) / n;
  const Matrix d_o =
      d_xhat.cwiseProduct((1.0 - fwd.x_hat.array().square()).matrix());
  g.decoder.back().weight = d_o.transpose() * fwd.decoder_head_input;
  g.decoder.back().bias = d_o.colwise().sum().transpose();
  Matrix d_h = d_o * p.decoder.back().weight;

  for (size_t i = p.decoder_norm.size(); i-- > 0;) {
    d_h = HiddenBackward(d_h, fwd.decoder[i], p.decoder[i], p.decoder_norm[i],
                         g.decoder[i], g.decoder_norm[i], true);
  }

  // z = mu + exp(logvar / 2) * eps, plus the KL term.
  const Matrix& d_z = d_h;
  const Matrix std_dev = (0.5 * fwd.logvar.array()).exp().matrix();
  const Matrix d_mu = d_z + fwd.mu / n;
  const Matrix d_logvar =
      (d_z.array() * 0.5 * std_dev.array() * fwd.noise.array() +
       0.5 * (fwd.logvar.array().exp() - 1.0) / n)
          .matrix();

  const Matrix& h_enc =
      fwd.encoder.empty() ? batch : fwd.encoder.back().output;
  g.mu_head.weight = d_mu.transpose() * h_enc;
  g.mu_head.bias = d_mu.colwise().sum().transpose();
  g.logvar_head.weight = d_logvar.transpose() * h_enc;
  g.logvar_head.bias = d_logvar.colwise().sum().transpose();
  d_h = d_mu * p.mu_head.weight + d_logvar * p.logvar_head.weight;

  for (size_t i = p.encoder.size(); i-- > 0;) {
    d_h = HiddenBackward(d_h, fwd.encoder[i], p.encoder[i], p.encoder_norm[i],
                         g.encoder[i], g.encoder_norm[i], i > 0);
  }
  return g;
}

double LearningRateAt(const VaeConfig& cfg, int epoch) {
  if (epoch < 0) throw InputError("epoch index must be non-negative");
  return cfg.initial_lr * std::pow(cfg.lr_decay, epoch);
}

OptimizerState InitOptimizer(const VaeParams& params) {
  return OptimizerState{params.ZerosLike(), 0};
}

void SgdMomentumStep(std::span<double> params, std::span<const double> grads,
                     std::span<double> velocity, double lr, double beta) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd: parameter, gradient and velocity sizes differ");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    velocity[i] = beta * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

void SgdMomentumStep(VaeParams& params, const VaeParams& grads, OptimizerState& state,
                     double lr, double beta) {
  std::vector<std::pair<std::string, std::span<const double>>> g;
  grads.ForEach([&](const std::string& name, std::span<const double> t) {
    for (double v : t) {
      if (!std::isfinite(v)) throw NumericError("sgd: non-finite gradient in " + name);
    }
    g.emplace_back(name, t);
  });
  std::vector<std::span<double>> v;
  state.velocity.ForEach([&](const std::string&, std::span<double> t) { v.push_back(t); });
  size_t i = 0;
  params.ForEach([&](const std::string& name, std::span<double> t) {
    if (i >= g.size() || g[i].first != name) {
      throw ShapeError("sgd: gradient layout does not match parameters at " + name);
    }
    SgdMomentumStep(t, g[i].second, v[i], lr, beta);
    ++i;
  });
  ++state.step;
}

SplitRecord SplitDataset(size_t n, const VaeConfig& cfg) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RandomEngine rng(DeriveSeed(cfg.seed, {2}));
  std::shuffle(order.begin(), order.end(), rng);
  // Guard against 0.15 * n landing a hair above an integer.
  const auto n_test = static_cast<size_t>(
      std::ceil(cfg.test_fraction * static_cast<double>(n) - 1e-9));
  SplitRecord split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  return split;
}

TrainResult Train(std::span<const Vector> data, const VaeConfig& cfg) {
  cfg.Validate();
  if (data.size() < kMinTrainingSamples) {
    throw InputError("vae: training needs at least " + std::to_string(kMinTrainingSamples) +
                     " samples, got " + std::to_string(data.size()));
  }
  for (const Vector& v : data) {
    if (v.size() != cfg.input_dim) throw ShapeError("vae: sample length != input_dim");
  }
  TrainResult result;
  result.split = SplitDataset(data.size(), cfg);
  VaeModel model = InitModel(cfg);
  OptimizerState opt = InitOptimizer(model.params);
  RandomEngine noise_rng(DeriveSeed(cfg.seed, {4}));

  const Matrix test_x = Gather(data, result.split.test);
  const Matrix test_noise = Matrix::Zero(test_x.rows(), cfg.latent_dim);
  double best = std::numeric_limits<double>::infinity();
  VaeModel best_model = model;
  int stale = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<int> order = result.split.train;
    RandomEngine shuffle_rng(DeriveSeed(cfg.seed, {3, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = LearningRateAt(cfg, epoch);

    double loss_sum = 0.0;
    size_t seen = 0;
    int batch_index = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t size = std::min(static_cast<size_t>(cfg.batch_size), order.size() - start);
      if (size < 2) break;
      const Matrix x = Gather(data, std::span<const int>(order).subspan(start, size));
      const ForwardResult fwd = Forward(model, x, Mode::kTrain, noise_rng);
      LossBreakdown loss;
      try {
        loss = ElboLoss(x, fwd.x_hat, fwd.mu, fwd.logvar);
      } catch (const NumericError& e) {
        throw NumericError("vae: epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + ": " + e.what());
      }
      if (!std::isfinite(loss.total)) {
        throw NumericError("vae: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      }
      const VaeParams grads = Backward(model, x, fwd);
      try {
        SgdMomentumStep(model.params, grads, opt, lr, cfg.momentum);
      } catch (const NumericError& e) {
        throw NumericError("vae: epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + ": " + e.what());
      }
      UpdateRunningStats(model, fwd);
      loss_sum += loss.total * static_cast<double>(size);
      seen += size;
      ++batch_index;
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(seen));

    const ForwardResult eval = ForwardWithNoise(model, test_x, Mode::kEval, test_noise);
    const double test_loss = ElboLoss(test_x, eval.x_hat, eval.mu, eval.logvar).total;
    if (!std::isfinite(test_loss)) {
      throw NumericError("vae: non-finite held-out loss at epoch " + std::to_string(epoch));
    }
    result.test_loss.push_back(test_loss);
    model.epochs_trained = epoch + 1;

    if (test_loss < best - cfg.min_delta) {
      best = test_loss;
      best_model = model;
      best_model.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  best_model.epochs_trained = model.epochs_trained;
  result.model = std::move(best_model);
  return result;
}

TrainResult TrainUser(std::span<const Vector> raw, const VaeConfig& cfg) {
  if (raw.size() < kMinTrainingSamples) {
    throw InputError("vae: training needs at least " + std::to_string(kMinTrainingSamples) +
                     " samples, got " + std::to_string(raw.size()));
  }
  const SplitRecord split = SplitDataset(raw.size(), cfg);
  std::vector<Vector> train_part;
  for (int i : split.train) train_part.push_back(raw[static_cast<size_t>(i)]);
  embed::InputScaler scaler = embed::InputScaler::Fit(train_part);
  std::vector<Vector> scaled;
  scaled.reserve(raw.size());
  for (const Vector& v : raw) scaled.push_back(scaler.Apply(v));
  TrainResult result = Train(scaled, cfg);
  result.model.scaler = std::move(scaler);
  return result;
}

Vector EncodeLatent(const VaeModel& model, const Vector& scaled) {
  const Matrix x = scaled.transpose();
  const ForwardResult fwd =
      ForwardWithNoise(model, x, Mode::kEval, Matrix::Zero(1, model.config.latent_dim));
  return fwd.mu.row(0).transpose();
}

Vector EncodeRaw(const VaeModel& model, const Vector& raw) {
  if (model.scaler.dim() == 0) return EncodeLatent(model, raw);
  return EncodeLatent(model, model.scaler.Apply(raw));
}

// --- serialization ---------------------------------------------------------

namespace {

void AppendArray(std::string& out, const double* data, size_t n) {
  out += '[';
  for (size_t i = 0; i < n; ++i) {
    if (i > 0) out += ',';
    out += FormatDouble(data[i]);
  }
  out += ']';
}

void AppendMatrix(std::string& out, const Matrix& m) {
  out += "{\"shape\":[" + std::to_string(m.rows()) + "," + std::to_string(m.cols()) +
         "],\"data\":[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (r > 0 || c > 0) out += ',';
      out += FormatDouble(m(r, c));
    }
  }
  out += "]}";
}

void AppendVector(std::string& out, const Vector& v) {
  out += "{\"shape\":[" + std::to_string(v.size()) + "],\"data\":";
  AppendArray(out, v.data(), static_cast<size_t>(v.size()));
  out += '}';
}

Matrix ReadMatrix(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  const auto& shape = j.at("shape");
  const auto& data = j.at("data");
  if (shape.size() != 2 || shape[0].get<Eigen::Index>() != rows ||
      shape[1].get<Eigen::Index>() != cols || data.size() != static_cast<size_t>(rows * cols)) {
    throw ShapeError("model: tensor " + name + " has unexpected shape");
  }
  Matrix m(rows, cols);
  size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

Vector ReadVector(const Json& j, Eigen::Index n, const std::string& name) {
  const auto& shape = j.at("shape");
  const auto& data = j.at("data");
  if (shape.size() != 1 || shape[0].get<Eigen::Index>() != n ||
      data.size() != static_cast<size_t>(n)) {
    throw ShapeError("model: tensor " + name + " has unexpected shape");
  }
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = data[static_cast<size_t>(i)].get<double>();
  return v;
}

}  // namespace

std::string SaveModel(const VaeModel& model) {
  std::string out;
  out.reserve(model.params.NumScalars() * 24 + 4096);
  auto key = [&](std::string_view k) {
    out += '"';
    out += k;
    out += "\":";
  };
  out += '{';
  key("format");
  out += Json(std::string(kFormat)).dump() + ',';
  key("config");
  out += ConfigToJson(model.config).dump() + ',';
  key("seed");
  out += std::to_string(model.config.seed) + ',';
  key("vocab_hash");
  out += Json(model.vocab_hash).dump() + ',';
  key("config_hash");
  out += Json(model.config_hash).dump() + ',';
  key("epochs_trained");
  out += std::to_string(model.epochs_trained) + ',';
  key("best_epoch");
  out += std::to_string(model.best_epoch) + ',';
  key("scaler");
  AppendArray(out, model.scaler.scale().data(), static_cast<size_t>(model.scaler.dim()));
  out += ",\n";

  key("parameters");
  out += "{\n";
  bool first = true;
  const VaeParams& p = model.params;
  auto linear = [&](const std::string& name, const Linear& l) {
    if (!first) out += ",\n";
    first = false;
    key(name + ".weight");
    AppendMatrix(out, l.weight);
    out += ",\n";
    key(name + ".bias");
    AppendVector(out, l.bias);
  };
  auto norm = [&](const std::string& name, const Norm& n) {
    out += ",\n";
    key(name + ".gain");
    AppendVector(out, n.gain);
    out += ",\n";
    key(name + ".shift");
    AppendVector(out, n.shift);
  };
  for (size_t i = 0; i < p.encoder.size(); ++i) {
    linear("encoder." + std::to_string(i), p.encoder[i]);
    norm("encoder." + std::to_string(i), p.encoder_norm[i]);
  }
  linear("mu_head", p.mu_head);
  linear("logvar_head", p.logvar_head);
  for (size_t i = 0; i < p.decoder.size(); ++i) {
    linear("decoder." + std::to_string(i), p.decoder[i]);
    if (i < p.decoder_norm.size()) norm("decoder." + std::to_string(i), p.decoder_norm[i]);
  }
  out += "\n},\n";

  key("running_stats");
  out += "{\n";
  first = true;
  auto stats = [&](const std::string& name, const RunningStats& s) {
    if (!first) out += ",\n";
    first = false;
    key(name + ".mean");
    AppendVector(out, s.mean);
    out += ",\n";
    key(name + ".var");
    AppendVector(out, s.var);
  };
  for (size_t i = 0; i < model.encoder_stats.size(); ++i) {
    stats("encoder." + std::to_string(i), model.encoder_stats[i]);
  }
  for (size_t i = 0; i < model.decoder_stats.size(); ++i) {
    stats("decoder." + std::to_string(i), model.decoder_stats[i]);
  }
  out += "\n}}\n";
  return out;
}

VaeModel ParseModel(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) {
      throw ParseError("model: unsupported format " + doc.at("format").get<std::string>());
    }
    VaeConfig cfg = ConfigFromJson(doc.at("config"));
    cfg.Validate();
    VaeModel model;
    model.config = cfg;
    model.vocab_hash = doc.at("vocab_hash").get<std::string>();
    model.config_hash = doc.at("config_hash").get<std::string>();
    model.epochs_trained = doc.at("epochs_trained").get<int>();
    model.best_epoch = doc.at("best_epoch").get<int>();
    const auto& scaler = doc.at("scaler");
    if (!scaler.empty()) {
      Vector s(static_cast<Eigen::Index>(scaler.size()));
      for (size_t i = 0; i < scaler.size(); ++i) s(static_cast<Eigen::Index>(i)) = scaler[i].get<double>();
      model.scaler = embed::InputScaler(std::move(s));
    }

    const Json& params = doc.at("parameters");
    const Json& running = doc.at("running_stats");
    auto linear = [&](const std::string& name, int in, int out) {
      return Linear{ReadMatrix(params.at(name + ".weight"), out, in, name + ".weight"),
                    ReadVector(params.at(name + ".bias"), out, name + ".bias")};
    };
    auto norm = [&](const std::string& name, int dim) {
      return Norm{ReadVector(params.at(name + ".gain"), dim, name + ".gain"),
                  ReadVector(params.at(name + ".shift"), dim, name + ".shift")};
    };
    auto stats = [&](const std::string& name, int dim) {
      return RunningStats{ReadVector(running.at(name + ".mean"), dim, name + ".mean"),
                          ReadVector(running.at(name + ".var"), dim, name + ".var")};
    };
    int in = cfg.input_dim;
    for (size_t i = 0; i < cfg.encoder_hidden.size(); ++i) {
      const std::string name = "encoder." + std::to_string(i);
      const int w = cfg.encoder_hidden[i];
      model.params.encoder.push_back(linear(name, in, w));
      model.params.encoder_norm.push_back(norm(name, w));
      model.encoder_stats.push_back(stats(name, w));
      in = w;
    }
    model.params.mu_head = linear("mu_head", in, cfg.latent_dim);
    model.params.logvar_head = linear("logvar_head", in, cfg.latent_dim);
    in = cfg.latent_dim;
    for (size_t i = 0; i < cfg.decoder_hidden.size(); ++i) {
      const std::string name = "decoder." + std::to_string(i);
      const int w = cfg.decoder_hidden[i];
      model.params.decoder.push_back(linear(name, in, w));
      model.params.decoder_norm.push_back(norm(name, w));
      model.decoder_stats.push_back(stats(name, w));
      in = w;
    }
    model.params.decoder.push_back(
        linear("decoder." + std::to_string(cfg.decoder_hidden.size()), in, cfg.input_dim));
    for (const auto& s : model.encoder_stats) {
      if ((s.var.array() <= 0.0).any()) throw ValidationError("model: non-positive running variance");
    }
    for (const auto& s : model.decoder_stats) {
      if ((s.var.array() <= 0.0).any()) throw ValidationError("model: non-positive running variance");
    }
    return model;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

void SaveModelFile(const VaeModel& model, const std::filesystem::path& path) {
  WriteFile(path, SaveModel(model));
}

VaeModel LoadModelFile(const std::filesystem::path& path) {
  return ParseModel(ReadFile(path));
}

}  // namespace scene_latent::vae

#ifndef SCENE_LATENT_VAE_H_
#define SCENE_LATENT_VAE_H_

// Linear variational autoencoder with explicit forward and backward passes.
//
// Encoder: [affine -> batch-norm -> ReLU] per hidden layer, then two affine
// heads for mu and log-variance. Decoder: [affine -> batch-norm -> ReLU] per
// hidden layer, then affine -> tanh. Trained per user by minimizing
// reconstruction (sum of squares) + KL(q(z|x) || N(0, I)), averaged over the
// batch, with SGD + momentum and an exponentially decaying learning rate.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "scene_latent/embed.h"
#include "scene_latent/io.h"
#include "scene_latent/random.h"

namespace scene_latent::vae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct VaeConfig {
  int input_dim = embed::kFlatDim;
  std::vector<int> encoder_hidden{512, 128};
  int latent_dim = 16;
  std::vector<int> decoder_hidden{128, 512};
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;
  double momentum = 0.9;        // beta
  double lr_decay = 0.99;       // gamma
  double initial_lr = 1e-5;     // alpha_0
  double test_fraction = 0.15;
  double min_delta = 1e-6;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  std::uint64_t seed = 0;

  // Throws InputError on an invalid combination.
  void Validate() const;
};

Json ConfigToJson(const VaeConfig& cfg);
// Missing keys keep their defaults.
VaeConfig ConfigFromJson(const Json& j);

struct Linear {
  Matrix weight;  // out x in
  Vector bias;
};

struct Norm {
  Vector gain;
  Vector shift;
};

struct RunningStats {
  Vector mean;
  Vector var;
};

// Trainable tensors. Gradients and optimizer velocities share this layout.
struct VaeParams {
  std::vector<Linear> encoder;
  std::vector<Norm> encoder_norm;
  Linear mu_head;
  Linear logvar_head;
  std::vector<Linear> decoder;     // hidden layers, then the output layer
  std::vector<Norm> decoder_norm;  // hidden layers only

  // fn(name, span) for every tensor in a fixed order.
  template <typename Fn>
  void ForEach(Fn&& fn) {
    Visit(*this, fn);
  }
  template <typename Fn>
  void ForEach(Fn&& fn) const {
    Visit(*this, fn);
  }

  VaeParams ZerosLike() const;
  size_t NumScalars() const;

 private:
  template <typename Self, typename Fn>
  static void Visit(Self& self, Fn& fn);
};

struct VaeModel {
  VaeConfig config;
  VaeParams params;
  std::vector<RunningStats> encoder_stats;
  std::vector<RunningStats> decoder_stats;
  embed::InputScaler scaler;
  std::string vocab_hash;
  std::string config_hash;
  int epochs_trained = 0;
  int best_epoch = -1;
};

// Glorot-uniform weights from the seeded engine, zero biases, unit gains.
VaeModel InitModel(const VaeConfig& cfg);

enum class Mode { kTrain, kEval };

struct LayerCache {
  Matrix input;       // layer input
  Matrix normalized;  // batch-norm output before gain/shift
  Vector inv_std;     // 1 / sqrt(var + eps) used for normalization
  Vector batch_mean;
  Vector batch_var;   // biased
  Matrix output;      // after ReLU
};

struct ForwardResult {
  Matrix x_hat;
  Matrix mu;
  Matrix logvar;
  Matrix z;
  Matrix noise;
  std::vector<LayerCache> encoder;
  std::vector<LayerCache> decoder;
  Matrix decoder_head_input;
};

// Rows of `batch` are samples. Train mode draws epsilon ~ N(0, I) from `rng`
// and normalizes with batch statistics; eval mode uses epsilon = 0 and the
// running statistics. Running statistics are not touched here.
ForwardResult Forward(const VaeModel& model, const Matrix& batch, Mode mode,
                      RandomEngine& rng);
// Same, with caller-supplied epsilon (batch x latent).
ForwardResult ForwardWithNoise(const VaeModel& model, const Matrix& batch, Mode mode,
                               const Matrix& noise);

// Exponential moving average of the batch statistics of a train-mode pass;
// the running variance uses the unbiased batch variance.
void UpdateRunningStats(VaeModel& model, const ForwardResult& fwd);

struct LossBreakdown {
  double reconstruction = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

LossBreakdown ElboLoss(const Matrix& x, const Matrix& x_hat, const Matrix& mu,
                       const Matrix& logvar);

// Gradients of ElboLoss(batch, fwd...).total w.r.t. every parameter, for a
// train-mode forward pass on the same batch.
VaeParams Backward(const VaeModel& model, const Matrix& batch, const ForwardResult& fwd);

double LearningRateAt(const VaeConfig& cfg, int epoch);

struct OptimizerState {
  VaeParams velocity;
  long step = 0;
};

OptimizerState InitOptimizer(const VaeParams& params);

// v = beta * v + g; theta = theta - lr * v, element-wise.
void SgdMomentumStep(std::span<double> params, std::span<const double> grads,
                     std::span<double> velocity, double lr, double beta);
// Whole-model step; NumericError names the first non-finite gradient tensor.
void SgdMomentumStep(VaeParams& params, const VaeParams& grads, OptimizerState& state,
                     double lr, double beta);

struct SplitRecord {
  std::vector<int> train;
  std::vector<int> test;
};

// Seeded permutation; ceil(test_fraction * n) samples are held out.
SplitRecord SplitDataset(size_t n, const VaeConfig& cfg);

struct TrainResult {
  VaeModel model;  // parameters of the best held-out epoch
  std::vector<double> train_loss;
  std::vector<double> test_loss;
  SplitRecord split;
};

inline constexpr size_t kMinTrainingSamples = 20;

// `data` must already be scaled; model.scaler is left empty.
TrainResult Train(std::span<const Vector> data, const VaeConfig& cfg);

// Fits the input scaler on the training part of the split, scales every
// vector and trains. The returned model carries the scaler.
TrainResult TrainUser(std::span<const Vector> raw, const VaeConfig& cfg);

// Eval-mode mu of a scaled vector.
Vector EncodeLatent(const VaeModel& model, const Vector& scaled);
// Applies the model's scaler first.
Vector EncodeRaw(const VaeModel& model, const Vector& raw);

// Single JSON document; Save(Load(Save(m))) reproduces the bytes of Save(m).
std::string SaveModel(const VaeModel& model);
VaeModel ParseModel(std::string_view json_text);
void SaveModelFile(const VaeModel& model, const std::filesystem::path& path);
VaeModel LoadModelFile(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

template <typename Self, typename Fn>
void VaeParams::Visit(Self& self, Fn& fn) {
  using Scalar = std::conditional_t<std::is_const_v<Self>, const double, double>;
  auto emit = [&](const std::string& name, auto& tensor) {
    fn(name, std::span<Scalar>(tensor.data(), static_cast<size_t>(tensor.size())));
  };
  for (size_t i = 0; i < self.encoder.size(); ++i) {
    const std::string p = "encoder." + std::to_string(i);
    emit(p + ".weight", self.encoder[i].weight);
    emit(p + ".bias", self.encoder[i].bias);
    emit(p + ".gain", self.encoder_norm[i].gain);
    emit(p + ".shift", self.encoder_norm[i].shift);
  }
  emit("mu_head.weight", self.mu_head.weight);
  emit("mu_head.bias", self.mu_head.bias);
  emit("logvar_head.weight", self.logvar_head.weight);
  emit("logvar_head.bias", self.logvar_head.bias);
  for (size_t i = 0; i < self.decoder.size(); ++i) {
    const std::string p = "decoder." + std::to_string(i);
    emit(p + ".weight", self.decoder[i].weight);
    emit(p + ".bias", self.decoder[i].bias);
    if (i < self.decoder_norm.size()) {
      emit(p + ".gain", self.decoder_norm[i].gain);
      emit(p + ".shift", self.decoder_norm[i].shift);
    }
  }
}

}  // namespace scene_latent::vae

#endif  // SCENE_LATENT_VAE_H_

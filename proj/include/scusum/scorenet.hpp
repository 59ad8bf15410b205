#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scusum/core.hpp"

namespace scusum {

enum class Activation { SiLU };

/// Fully connected network psi(y, x) : R^{2d} -> R^d. Hidden layers use
/// SiLU, the output layer is affine. An empty `hidden_widths` gives a single
/// affine map, which is occasionally useful as an exactly-Gaussian model.
struct MlpArchitecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;
  std::size_t output_dim = 0;
  Activation activation = Activation::SiLU;

  static MlpArchitecture for_state_dim(std::size_t d, std::vector<std::size_t> hidden_widths);

  std::size_t state_dim() const noexcept { return output_dim; }
  std::size_t num_layers() const noexcept { return hidden_widths.size() + 1; }
  void validate() const;
};

bool operator==(const MlpArchitecture& a, const MlpArchitecture& b);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Per-dimension affine map z = (v - mean) / scale applied to both y and x
/// before the network sees them.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  /// Population statistics of `states`; zero-variance dimensions get scale 1.
  static Standardization fit(std::span<const StateVector> states);

  StateVector apply(const StateVector& v) const;
};

struct MlpParameters {
  MlpArchitecture arch;
  std::vector<DenseLayer> layers;
  std::optional<Standardization> standardization;

  std::size_t parameter_count() const;
  /// Throws UsageError on shape mismatch, NumericError on non-finite entries.
  void validate() const;
};

/// Same shapes as MlpParameters::layers.
using MlpGradient = std::vector<DenseLayer>;

double silu(double u);
double silu_prime(double u);
double silu_second(double u);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) (variance 1/(3 fan_in)),
/// biases zero. Deterministic in (arch, seed).
MlpParameters init_params(const MlpArchitecture& arch, std::uint64_t seed);

/// psi(y, x) in the network's own coordinates (no standardization applied).
Eigen::VectorXd forward(const MlpParameters& params, const StateVector& y, const StateVector& x);

/// Exact trace of d psi / d y, from one tangent pass per output coordinate.
double divergence(const MlpParameters& params, const StateVector& y, const StateVector& x);

/// Outputs and divergences for a batch stored column-wise (d x B each).
/// `div_weights`, when given, turns the trace into sum_i w_i d psi_i / d y_i.
struct BatchOutput {
  Eigen::MatrixXd psi;
  Eigen::VectorXd divergence;
};
BatchOutput evaluate_batch(const MlpParameters& params, const Eigen::MatrixXd& y,
                           const Eigen::MatrixXd& x, const Eigen::VectorXd* div_weights = nullptr);

/// Mean over the batch of sum_i [ 0.5 psi_i^2 + d psi_i / d y_i ] at (y = next, x = prev).
double surrogate_loss(const MlpParameters& params, std::span<const TransitionPair> batch);

struct LossAndGradient {
  double loss = 0.0;
  MlpGradient gradient;
};

/// surrogate_loss and its exact gradient with respect to every weight and bias.
/// The divergence term is differentiated through the tangent passes.
LossAndGradient loss_gradient(const MlpParameters& params, std::span<const TransitionPair> batch);

double gradient_norm(const MlpGradient& g);

enum class Optimizer { Adam, SGD };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 40;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool shuffle = true;
  /// Fit a Standardization on the training states and train in z-coordinates.
  bool standardize = false;

  void validate() const;
};

struct TrainResult {
  MlpParameters params;
  /// Sample-weighted mean minibatch loss of each epoch.
  std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Minibatch minimisation of surrogate_loss. Deterministic in config.seed.
/// Throws TrainingError (with the epoch) when the loss stops being finite.
TrainResult train(const MlpArchitecture& arch, std::span<const TransitionPair> dataset,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct AccuracyReport {
  double mse = 0.0;        // mean |psi - oracle|^2
  double var_scale = 0.0;  // mean |oracle|^2
  double rel_error = 0.0;  // mse / var_scale
};

AccuracyReport evaluate_accuracy(const ScoreField& model, const ScoreField& oracle,
                                 std::span<const TransitionPair> eval_pairs);
AccuracyReport evaluate_accuracy(const MlpParameters& params, const ScoreField& oracle,
                                 std::span<const TransitionPair> eval_pairs);

/// Trained network exposed as a ScoreField on raw (unstandardized) states.
/// With a standardization (mean m, scale c) the chain rule gives
/// score_i = psi_i(z) / c_i and divergence = sum_i (d psi_i / d z_i) / c_i^2.
class NetworkScoreField final : public ScoreField {
 public:
  explicit NetworkScoreField(std::shared_ptr<const MlpParameters> params);

  std::size_t dim() const override { return params_->arch.state_dim(); }
  StateVector score(const StateVector& y, const StateVector& x) const override;
  double divergence(const StateVector& y, const StateVector& x) const override;
  std::vector<double> hyvarinen_scores(std::span<const TransitionPair> pairs) const override;

  /// Scores for many pairs at once (d x N).
  Eigen::MatrixXd scores(std::span<const TransitionPair> pairs) const;

  const MlpParameters& params() const noexcept { return *params_; }

 private:
  std::shared_ptr<const MlpParameters> params_;
};

NetworkScoreField as_score_field(MlpParameters params);

/// Binary model container, all integers and doubles little-endian:
///   char[8]  "SCUSUMNN"
///   u32      format version (1)
///   u32      input_dim, output_dim, hidden count H, then H u32 widths
///   u32      activation (1 = SiLU)
///   u8       has_standardization; if 1: f64 mean[d], f64 scale[d]
///   per layer: f64 weight (row-major, out x in), f64 bias[out]
void save_model(std::ostream& out, const MlpParameters& params);
MlpParameters load_model(std::istream& in);
void save_model(const std::filesystem::path& path, const MlpParameters& params);
MlpParameters load_model(const std::filesystem::path& path);

}  // namespace scusum

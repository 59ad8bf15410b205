#include "scusum/scorenet.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "scusum/error.hpp"
#include "scusum/random.hpp"

namespace scusum {

namespace {

constexpr std::size_t kEvalChunk = 256;

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

// Primal activations and tangent columns of one batch. Tangent column
// b * d + i holds d(layer)/d(y_i) for sample b.
struct Tape {
  std::size_t batch = 0;
  std::size_t d = 0;
  std::vector<Eigen::MatrixXd> inputs;       // H_l, input of layer l
  std::vector<Eigen::MatrixXd> preacts;      // Z_l
  std::vector<Eigen::MatrixXd> tan_inputs;   // dH_l for l >= 1 (index 0 unused)
  std::vector<Eigen::MatrixXd> tan_preacts;  // dZ_l
};

template <typename F>
Eigen::MatrixXd map(const Eigen::MatrixXd& m, F f) {
  return m.unaryExpr(f);
}

// Multiplies each sample's block of d tangent columns by that sample's column of `scale`.
void scale_tangents(Eigen::MatrixXd& tangents, const Eigen::MatrixXd& scale, std::size_t d) {
  const auto batch = scale.cols();
  for (Eigen::Index b = 0; b < batch; ++b) {
    tangents.middleCols(b * static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))
        .array()
        .colwise() *= scale.col(b).array();
  }
}

Tape run_forward(const MlpParameters& params, const Eigen::MatrixXd& y, const Eigen::MatrixXd& x) {
  const std::size_t d = params.arch.state_dim();
  const auto di = static_cast<Eigen::Index>(d);
  if (static_cast<std::size_t>(y.rows()) != d) throw DimensionError("y", d, static_cast<std::size_t>(y.rows()));
  if (static_cast<std::size_t>(x.rows()) != d) throw DimensionError("x", d, static_cast<std::size_t>(x.rows()));
  if (y.cols() != x.cols()) throw UsageError("y and x batches differ in size");

  Tape tape;
  tape.batch = static_cast<std::size_t>(y.cols());
  tape.d = d;
  const std::size_t layers = params.layers.size();
  tape.inputs.resize(layers);
  tape.preacts.resize(layers);
  tape.tan_inputs.resize(layers);
  tape.tan_preacts.resize(layers);

  Eigen::MatrixXd input(2 * di, y.cols());
  input.topRows(di) = y;
  input.bottomRows(di) = x;
  tape.inputs[0] = std::move(input);

  for (std::size_t l = 0; l < layers; ++l) {
    const DenseLayer& layer = params.layers[l];
    tape.preacts[l] = (layer.weight * tape.inputs[l]).colwise() + layer.bias;
    if (l == 0) {
      Eigen::MatrixXd t(layer.weight.rows(), y.cols() * di);
      for (Eigen::Index b = 0; b < y.cols(); ++b) t.middleCols(b * di, di) = layer.weight.leftCols(di);
      tape.tan_preacts[0] = std::move(t);
    } else {
      Eigen::MatrixXd t = tape.tan_preacts[l - 1];
      scale_tangents(t, map(tape.preacts[l - 1], silu_prime), d);
      tape.tan_preacts[l] = layer.weight * t;
      tape.tan_inputs[l] = std::move(t);
    }
    if (l + 1 < layers) tape.inputs[l + 1] = map(tape.preacts[l], silu);
  }
  return tape;
}

Eigen::VectorXd trace_of(const Tape& tape, const Eigen::MatrixXd& out_tangents,
                         const Eigen::VectorXd* weights) {
  const auto di = static_cast<Eigen::Index>(tape.d);
  Eigen::VectorXd div(static_cast<Eigen::Index>(tape.batch));
  for (Eigen::Index b = 0; b < div.size(); ++b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < di; ++i) {
      const double v = out_tangents(i, b * di + i);
      acc += weights ? (*weights)[i] * v : v;
    }
    div[b] = acc;
  }
  return div;
}

void pack_batch(std::span<const TransitionPair> pairs, std::size_t d, Eigen::MatrixXd& y,
                Eigen::MatrixXd& x) {
  const auto n = static_cast<Eigen::Index>(pairs.size());
  y.resize(static_cast<Eigen::Index>(d), n);
  x.resize(static_cast<Eigen::Index>(d), n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& p = pairs[static_cast<std::size_t>(b)];
    check_pair(p, d);
    y.col(b) = p.next;
    x.col(b) = p.prev;
  }
}

MlpGradient zero_like(const MlpParameters& params) {
  MlpGradient g;
  g.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    g.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                 Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return g;
}

}  // namespace

MlpArchitecture MlpArchitecture::for_state_dim(std::size_t d, std::vector<std::size_t> hidden_widths) {
  MlpArchitecture arch;
  arch.input_dim = 2 * d;
  arch.output_dim = d;
  arch.hidden_widths = std::move(hidden_widths);
  arch.validate();
  return arch;
}

void MlpArchitecture::validate() const {
  if (output_dim == 0) throw UsageError("architecture output_dim must be >= 1");
  if (input_dim != 2 * output_dim) {
    throw UsageError("architecture input_dim must equal 2 * output_dim for (y, x) inputs");
  }
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw UsageError("hidden widths must be positive");
  }
}

bool operator==(const MlpArchitecture& a, const MlpArchitecture& b) {
  return a.input_dim == b.input_dim && a.output_dim == b.output_dim &&
         a.hidden_widths == b.hidden_widths && a.activation == b.activation;
}

Standardization Standardization::fit(std::span<const StateVector> states) {
  if (states.empty()) throw UsageError("cannot fit standardization on zero states");
  const auto d = states.front().size();
  Standardization s;
  s.mean = Eigen::VectorXd::Zero(d);
  for (const auto& v : states) {
    if (v.size() != d) throw DimensionError("state", static_cast<std::size_t>(d), static_cast<std::size_t>(v.size()));
    s.mean += v;
  }
  s.mean /= static_cast<double>(states.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& v : states) var.array() += (v - s.mean).array().square();
  var /= static_cast<double>(states.size());
  s.scale = var.array().sqrt();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(s.scale[i] > 0.0)) s.scale[i] = 1.0;
  }
  return s;
}

StateVector Standardization::apply(const StateVector& v) const {
  check_state(v, static_cast<std::size_t>(mean.size()), "state");
  return (v - mean).cwiseQuotient(scale);
}

std::size_t MlpParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

void MlpParameters::validate() const {
  arch.validate();
  if (layers.size() != arch.num_layers()) throw UsageError("layer count does not match architecture");
  std::size_t in = arch.input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t out = l < arch.hidden_widths.size() ? arch.hidden_widths[l] : arch.output_dim;
    const auto& layer = layers[l];
    if (static_cast<std::size_t>(layer.weight.rows()) != out ||
        static_cast<std::size_t>(layer.weight.cols()) != in ||
        static_cast<std::size_t>(layer.bias.size()) != out) {
      throw UsageError("layer " + std::to_string(l) + " has shape inconsistent with architecture");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw NumericError("layer " + std::to_string(l) + " has non-finite parameters");
    }
    in = out;
  }
  if (standardization) {
    const auto d = static_cast<Eigen::Index>(arch.output_dim);
    if (standardization->mean.size() != d || standardization->scale.size() != d) {
      throw UsageError("standardization vectors do not match state dimension");
    }
    if (!(standardization->scale.array() > 0.0).all() || !standardization->mean.allFinite() ||
        !standardization->scale.allFinite()) {
      throw NumericError("standardization must have finite mean and positive scale");
    }
  }
}

double silu(double u) { return u * sigmoid(u); }

double silu_prime(double u) {
  const double s = sigmoid(u);
  return s * (1.0 + u * (1.0 - s));
}

double silu_second(double u) {
  const double s = sigmoid(u);
  return s * (1.0 - s) * (2.0 + u * (1.0 - 2.0 * s));
}

MlpParameters init_params(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  MlpParameters params;
  params.arch = arch;
  Rng rng(seed);
  std::size_t in = arch.input_dim;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const std::size_t out = l < arch.hidden_widths.size() ? arch.hidden_widths[l] : arch.output_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    }
    params.layers.push_back(std::move(layer));
    in = out;
  }
  return params;
}

BatchOutput evaluate_batch(const MlpParameters& params, const Eigen::MatrixXd& y,
                           const Eigen::MatrixXd& x, const Eigen::VectorXd* div_weights) {
  const Tape tape = run_forward(params, y, x);
  return {tape.preacts.back(), trace_of(tape, tape.tan_preacts.back(), div_weights)};
}

Eigen::VectorXd forward(const MlpParameters& params, const StateVector& y, const StateVector& x) {
  const std::size_t d = params.arch.state_dim();
  check_state(y, d, "y");
  check_state(x, d, "x");
  Eigen::VectorXd h(params.arch.input_dim);
  h << y, x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Eigen::VectorXd z = params.layers[l].weight * h + params.layers[l].bias;
    h = l + 1 < params.layers.size() ? Eigen::VectorXd(z.unaryExpr(&silu)) : z;
  }
  return h;
}

double divergence(const MlpParameters& params, const StateVector& y, const StateVector& x) {
  const std::size_t d = params.arch.state_dim();
  check_state(y, d, "y");
  check_state(x, d, "x");
  return evaluate_batch(params, y, x).divergence[0];
}

double surrogate_loss(const MlpParameters& params, std::span<const TransitionPair> batch) {
  if (batch.empty()) throw UsageError("surrogate_loss: empty batch");
  const std::size_t d = params.arch.state_dim();
  double total = 0.0;
  Eigen::MatrixXd y;
  Eigen::MatrixXd x;
  for (std::size_t start = 0; start < batch.size(); start += kEvalChunk) {
    const auto chunk = batch.subspan(start, std::min(kEvalChunk, batch.size() - start));
    pack_batch(chunk, d, y, x);
    const BatchOutput out = evaluate_batch(params, y, x);
    total += 0.5 * out.psi.squaredNorm() + out.divergence.sum();
  }
  return total / static_cast<double>(batch.size());
}

LossAndGradient loss_gradient(const MlpParameters& params, std::span<const TransitionPair> batch) {
  if (batch.empty()) throw UsageError("loss_gradient: empty batch");
  const std::size_t d = params.arch.state_dim();
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd y;
  Eigen::MatrixXd x;
  pack_batch(batch, d, y, x);
  const Tape tape = run_forward(params, y, x);
  const auto nb = static_cast<Eigen::Index>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  LossAndGradient result;
  const Eigen::MatrixXd& psi = tape.preacts.back();
  result.loss = (0.5 * psi.squaredNorm() + trace_of(tape, tape.tan_preacts.back(), nullptr).sum()) * inv_b;
  result.gradient = zero_like(params);

  // Adjoints of the primal pre-activation and of every tangent pre-activation.
  Eigen::MatrixXd adj_z = psi * inv_b;
  Eigen::MatrixXd adj_dz = Eigen::MatrixXd::Zero(di, nb * di);
  for (Eigen::Index b = 0; b < nb; ++b) {
    for (Eigen::Index i = 0; i < di; ++i) adj_dz(i, b * di + i) = inv_b;
  }

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    DenseLayer& grad = result.gradient[l];
    grad.weight.noalias() += adj_z * tape.inputs[l].transpose();
    grad.bias += adj_z.rowwise().sum();
    if (l == 0) {
      for (Eigen::Index b = 0; b < nb; ++b) grad.weight.leftCols(di) += adj_dz.middleCols(b * di, di);
      break;
    }
    grad.weight.noalias() += adj_dz * tape.tan_inputs[l].transpose();

    const Eigen::MatrixXd adj_h = layer.weight.transpose() * adj_z;
    Eigen::MatrixXd adj_dh = layer.weight.transpose() * adj_dz;
    const Eigen::MatrixXd& z_prev = tape.preacts[l - 1];
    const Eigen::MatrixXd s1 = map(z_prev, silu_prime);
    const Eigen::MatrixXd s2 = map(z_prev, silu_second);

    Eigen::MatrixXd next_adj_z = s1.cwiseProduct(adj_h);
    const Eigen::MatrixXd& dz_prev = tape.tan_preacts[l - 1];
    for (Eigen::Index b = 0; b < nb; ++b) {
      const auto block = dz_prev.middleCols(b * di, di).cwiseProduct(adj_dh.middleCols(b * di, di));
      next_adj_z.col(b) += s2.col(b).cwiseProduct(block.rowwise().sum());
    }
    scale_tangents(adj_dh, s1, d);
    adj_z = std::move(next_adj_z);
    adj_dz = std::move(adj_dh);
  }

  for (std::size_t l = 0; l < result.gradient.size(); ++l) {
    if (!result.gradient[l].weight.allFinite() || !result.gradient[l].bias.allFinite()) {
      throw NumericError("non-finite gradient in layer " + std::to_string(l));
    }
  }
  return result;
}

double gradient_norm(const MlpGradient& g) {
  double ss = 0.0;
  for (const auto& layer : g) ss += layer.weight.squaredNorm() + layer.bias.squaredNorm();
  return std::sqrt(ss);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning_rate must be finite and non-negative");
  }
  if (batch_size == 0) throw UsageError("batch_size must be >= 1");
  if (epochs == 0) throw UsageError("epochs must be >= 1");
  if (optimizer == Optimizer::Adam && !(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw UsageError("Adam requires beta1, beta2 in [0, 1) and epsilon > 0");
  }
}

TrainResult train(const MlpArchitecture& arch, std::span<const TransitionPair> dataset,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  arch.validate();
  if (dataset.size() < config.batch_size) {
    throw UsageError("dataset has " + std::to_string(dataset.size()) + " pairs, fewer than batch_size " +
                     std::to_string(config.batch_size));
  }
  const std::size_t d = arch.state_dim();
  for (const auto& p : dataset) check_pair(p, d);

  TrainResult result;
  result.params = init_params(arch, derive_seed(config.seed, 0));

  std::vector<TransitionPair> standardized;
  std::span<const TransitionPair> data = dataset;
  if (config.standardize) {
    std::vector<StateVector> states;
    states.reserve(dataset.size() + 1);
    states.push_back(dataset.front().prev);
    for (const auto& p : dataset) states.push_back(p.next);
    const Standardization st = Standardization::fit(states);
    standardized.reserve(dataset.size());
    for (const auto& p : dataset) standardized.push_back({st.apply(p.prev), st.apply(p.next)});
    result.params.standardization = st;
    data = standardized;
  }

  MlpGradient m = zero_like(result.params);
  MlpGradient v = zero_like(result.params);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config.seed, 1));
  std::vector<TransitionPair> batch;
  batch.reserve(config.batch_size);
  std::size_t t = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
      LossAndGradient lg;
      try {
        lg = loss_gradient(result.params, batch);
      } catch (const NumericError& e) {
        throw TrainingError(e.what(), epoch);
      }
      if (!std::isfinite(lg.loss)) throw TrainingError("surrogate loss diverged", epoch);
      loss_sum += lg.loss * static_cast<double>(batch.size());

      const double lr = config.learning_rate;
      ++t;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      for (std::size_t l = 0; l < lg.gradient.size(); ++l) {
        DenseLayer& p = result.params.layers[l];
        const DenseLayer& g = lg.gradient[l];
        if (config.optimizer == Optimizer::SGD) {
          p.weight -= lr * g.weight;
          p.bias -= lr * g.bias;
          continue;
        }
        m[l].weight = config.beta1 * m[l].weight + (1.0 - config.beta1) * g.weight;
        m[l].bias = config.beta1 * m[l].bias + (1.0 - config.beta1) * g.bias;
        v[l].weight = config.beta2 * v[l].weight + (1.0 - config.beta2) * g.weight.cwiseAbs2();
        v[l].bias = config.beta2 * v[l].bias + (1.0 - config.beta2) * g.bias.cwiseAbs2();
        p.weight.array() -= lr * (m[l].weight.array() / bc1) /
                            ((v[l].weight.array() / bc2).sqrt() + config.epsilon);
        p.bias.array() -= lr * (m[l].bias.array() / bc1) /
                          ((v[l].bias.array() / bc2).sqrt() + config.epsilon);
      }
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    result.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

AccuracyReport evaluate_accuracy(const ScoreField& model, const ScoreField& oracle,
                                 std::span<const TransitionPair> eval_pairs) {
  if (eval_pairs.empty()) throw UsageError("evaluate_accuracy: no evaluation pairs");
  if (model.dim() != oracle.dim()) throw DimensionError("model", oracle.dim(), model.dim());
  Eigen::MatrixXd predicted(static_cast<Eigen::Index>(model.dim()), static_cast<Eigen::Index>(eval_pairs.size()));
  if (const auto* net = dynamic_cast<const NetworkScoreField*>(&model)) {
    predicted = net->scores(eval_pairs);
  } else {
    for (std::size_t k = 0; k < eval_pairs.size(); ++k) {
      predicted.col(static_cast<Eigen::Index>(k)) = model.score(eval_pairs[k].next, eval_pairs[k].prev);
    }
  }
  double se = 0.0;
  double ss = 0.0;
  for (std::size_t k = 0; k < eval_pairs.size(); ++k) {
    const StateVector truth = oracle.score(eval_pairs[k].next, eval_pairs[k].prev);
    se += (predicted.col(static_cast<Eigen::Index>(k)) - truth).squaredNorm();
    ss += truth.squaredNorm();
  }
  const auto n = static_cast<double>(eval_pairs.size());
  AccuracyReport report{se / n, ss / n, 0.0};
  if (!(report.var_scale > 0.0)) throw NumericError("evaluate_accuracy: var_scale is zero, ratio undefined");
  report.rel_error = report.mse / report.var_scale;
  return report;
}

AccuracyReport evaluate_accuracy(const MlpParameters& params, const ScoreField& oracle,
                                 std::span<const TransitionPair> eval_pairs) {
  return evaluate_accuracy(as_score_field(params), oracle, eval_pairs);
}

NetworkScoreField::NetworkScoreField(std::shared_ptr<const MlpParameters> params)
    : params_(std::move(params)) {
  if (!params_) throw UsageError("NetworkScoreField: null parameters");
  params_->validate();
}

StateVector NetworkScoreField::score(const StateVector& y, const StateVector& x) const {
  const auto& st = params_->standardization;
  if (!st) return forward(*params_, y, x);
  return forward(*params_, st->apply(y), st->apply(x)).cwiseQuotient(st->scale);
}

double NetworkScoreField::divergence(const StateVector& y, const StateVector& x) const {
  const auto& st = params_->standardization;
  if (!st) return scusum::divergence(*params_, y, x);
  const Eigen::VectorXd w = st->scale.array().square().inverse();
  return evaluate_batch(*params_, st->apply(y), st->apply(x), &w).divergence[0];
}

Eigen::MatrixXd NetworkScoreField::scores(std::span<const TransitionPair> pairs) const {
  const std::size_t d = dim();
  const auto& st = params_->standardization;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(pairs.size()));
  Eigen::MatrixXd y;
  Eigen::MatrixXd x;
  for (std::size_t start = 0; start < pairs.size(); start += kEvalChunk) {
    const auto chunk = pairs.subspan(start, std::min(kEvalChunk, pairs.size() - start));
    pack_batch(chunk, d, y, x);
    if (st) {
      y = (y.colwise() - st->mean).array().colwise() / st->scale.array();
      x = (x.colwise() - st->mean).array().colwise() / st->scale.array();
    }
    Eigen::MatrixXd h(2 * static_cast<Eigen::Index>(d), y.cols());
    h.topRows(y.rows()) = y;
    h.bottomRows(x.rows()) = x;
    for (std::size_t l = 0; l < params_->layers.size(); ++l) {
      Eigen::MatrixXd z = (params_->layers[l].weight * h).colwise() + params_->layers[l].bias;
      h = l + 1 < params_->layers.size() ? Eigen::MatrixXd(z.unaryExpr(&silu)) : z;
    }
    if (st) h = h.array().colwise() / st->scale.array();
    out.middleCols(static_cast<Eigen::Index>(start), h.cols()) = h;
  }
  return out;
}

std::vector<double> NetworkScoreField::hyvarinen_scores(std::span<const TransitionPair> pairs) const {
  const std::size_t d = dim();
  const auto& st = params_->standardization;
  Eigen::VectorXd w;
  if (st) w = st->scale.array().square().inverse();
  std::vector<double> out;
  out.reserve(pairs.size());
  Eigen::MatrixXd y;
  Eigen::MatrixXd x;
  for (std::size_t start = 0; start < pairs.size(); start += kEvalChunk) {
    const auto chunk = pairs.subspan(start, std::min(kEvalChunk, pairs.size() - start));
    pack_batch(chunk, d, y, x);
    if (st) {
      y = (y.colwise() - st->mean).array().colwise() / st->scale.array();
      x = (x.colwise() - st->mean).array().colwise() / st->scale.array();
    }
    BatchOutput res = evaluate_batch(*params_, y, x, st ? &w : nullptr);
    if (st) res.psi = res.psi.array().colwise() / st->scale.array();
    for (Eigen::Index b = 0; b < res.psi.cols(); ++b) {
      const double value = 0.5 * res.psi.col(b).squaredNorm() + res.divergence[b];
      if (!std::isfinite(value)) throw NumericError("network Hyvarinen score is not finite");
      out.push_back(value);
    }
  }
  return out;
}

NetworkScoreField as_score_field(MlpParameters params) {
  return NetworkScoreField(std::make_shared<const MlpParameters>(std::move(params)));
}

// ---- model file ------------------------------------------------------------

namespace {

constexpr std::array<char, 8> kMagic{'S', 'C', 'U', 'S', 'U', 'M', 'N', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint64_t get_bytes(std::istream& in, int n, const char* what) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ParseError(std::string("model file truncated while reading ") + what);
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  return static_cast<std::uint32_t>(get_bytes(in, 4, what));
}

double get_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(get_bytes(in, 8, what));
}

}  // namespace

void save_model(std::ostream& out, const MlpParameters& params) {
  params.validate();
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(params.arch.input_dim));
  put_u32(out, static_cast<std::uint32_t>(params.arch.output_dim));
  put_u32(out, static_cast<std::uint32_t>(params.arch.hidden_widths.size()));
  for (std::size_t w : params.arch.hidden_widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u32(out, 1);  // SiLU
  out.put(params.standardization ? 1 : 0);
  if (params.standardization) {
    for (Eigen::Index i = 0; i < params.standardization->mean.size(); ++i) put_f64(out, params.standardization->mean[i]);
    for (Eigen::Index i = 0; i < params.standardization->scale.size(); ++i) put_f64(out, params.standardization->scale[i]);
  }
  for (const auto& layer : params.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put_f64(out, layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_f64(out, layer.bias[r]);
  }
  if (!out) throw IoError("failed writing model");
}

MlpParameters load_model(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
    throw ParseError("not a score-network model file (bad magic)");
  }
  const std::uint32_t version = get_u32(in, "version");
  if (version != kFormatVersion) throw ParseError("unsupported model format version " + std::to_string(version));

  MlpParameters params;
  params.arch.input_dim = get_u32(in, "input_dim");
  params.arch.output_dim = get_u32(in, "output_dim");
  const std::uint32_t hidden = get_u32(in, "hidden count");
  if (hidden > 1024) throw ParseError("implausible hidden layer count " + std::to_string(hidden));
  for (std::uint32_t h = 0; h < hidden; ++h) params.arch.hidden_widths.push_back(get_u32(in, "hidden width"));
  if (get_u32(in, "activation") != 1) throw ParseError("unknown activation code");
  params.arch.validate();

  const int has_st = in.get();
  if (has_st != 0 && has_st != 1) throw ParseError("bad standardization flag");
  const auto d = static_cast<Eigen::Index>(params.arch.output_dim);
  if (has_st == 1) {
    Standardization st{Eigen::VectorXd(d), Eigen::VectorXd(d)};
    for (Eigen::Index i = 0; i < d; ++i) st.mean[i] = get_f64(in, "standardization mean");
    for (Eigen::Index i = 0; i < d; ++i) st.scale[i] = get_f64(in, "standardization scale");
    params.standardization = std::move(st);
  }
  std::size_t fan_in = params.arch.input_dim;
  for (std::size_t l = 0; l < params.arch.num_layers(); ++l) {
    const std::size_t out = l < params.arch.hidden_widths.size() ? params.arch.hidden_widths[l] : params.arch.output_dim;
    DenseLayer layer{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd(static_cast<Eigen::Index>(out))};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = get_f64(in, "weights");
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = get_f64(in, "biases");
    params.layers.push_back(std::move(layer));
    fan_in = out;
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after model parameters");
  params.validate();
  return params;
}

void save_model(const std::filesystem::path& path, const MlpParameters& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_model(out, params);
}

MlpParameters load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  return load_model(in);
}

}  // namespace scusum

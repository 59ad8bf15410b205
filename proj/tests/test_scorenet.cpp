#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "scusum/error.hpp"
#include "scusum/scorenet.hpp"
#include "scusum/simulate.hpp"
#include "test_support.hpp"

using namespace scusum;
using scusum::testing::fd_divergence;
using scusum::testing::random_pairs;
using scusum::testing::rel_err;

namespace {

// Wraps the Gaussian oracle as a "network" with zero hidden layers: for the
// linear kernel mean(x) = slope * x the exact score is affine in (y, x).
MlpParameters linear_gaussian_net(std::size_t d, double sigma, double slope) {
  MlpParameters p;
  p.arch = MlpArchitecture::for_state_dim(d, {});
  const double inv = 1.0 / (sigma * sigma);
  DenseLayer layer{Eigen::MatrixXd::Zero(d, 2 * d), Eigen::VectorXd::Zero(d)};
  layer.weight.leftCols(d) = -inv * Eigen::MatrixXd::Identity(d, d);
  layer.weight.rightCols(d) = slope * inv * Eigen::MatrixXd::Identity(d, d);
  p.layers.push_back(layer);
  return p;
}

double numeric_partial(MlpParameters params, std::span<const TransitionPair> batch, std::size_t layer,
                       bool bias, Eigen::Index r, Eigen::Index c, double h) {
  double& slot = bias ? params.layers[layer].bias[r] : params.layers[layer].weight(r, c);
  const double orig = slot;
  slot = orig + h;
  const double up = surrogate_loss(params, batch);
  slot = orig - h;
  const double down = surrogate_loss(params, batch);
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST(Silu, KnownValues) {
  EXPECT_DOUBLE_EQ(silu(0.0), 0.0);
  // 1 * sigmoid(1) = 1 / (1 + e^-1)
  EXPECT_NEAR(silu(1.0), 0.7310585786300049, 1e-15);
}

TEST(Silu, DerivativesMatchFiniteDifferences) {
  for (double u : {-4.0, -1.3, -0.2, 0.0, 0.7, 2.5, 6.0}) {
    const double h = 1e-5;
    EXPECT_NEAR(silu_prime(u), (silu(u + h) - silu(u - h)) / (2 * h), 1e-9) << u;
    EXPECT_NEAR(silu_second(u), (silu_prime(u + h) - silu_prime(u - h)) / (2 * h), 1e-9) << u;
  }
}

TEST(InitParams, DeterministicWithZeroBiases) {
  const auto arch = MlpArchitecture::for_state_dim(3, {8, 5});
  const auto a = init_params(arch, 42);
  const auto b = init_params(arch, 42);
  ASSERT_EQ(a.layers.size(), 3u);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_EQ(a.layers[l].weight, b.layers[l].weight);
    EXPECT_TRUE(a.layers[l].bias.isZero(0.0));
  }
  const auto c = init_params(arch, 43);
  EXPECT_NE(a.layers[0].weight, c.layers[0].weight);
}

TEST(InitParams, WeightVarianceMatchesFanInScheme) {
  const auto arch = MlpArchitecture::for_state_dim(10, {128, 128, 128});
  const auto p = init_params(arch, 7);
  for (const auto& layer : p.layers) {
    const double fan_in = static_cast<double>(layer.weight.cols());
    const double expected = 1.0 / (3.0 * fan_in);
    const double mean = layer.weight.mean();
    const double var = (layer.weight.array() - mean).square().mean();
    EXPECT_NEAR(var / expected, 1.0, 0.10);
  }
}

TEST(Forward, ZeroWeightsGiveZeroOutput) {
  auto p = init_params(MlpArchitecture::for_state_dim(2, {4}), 1);
  for (auto& layer : p.layers) layer.weight.setZero();
  Rng rng(3);
  const auto pairs = random_pairs(rng, 2, 4);
  for (const auto& pair : pairs) {
    EXPECT_TRUE(forward(p, pair.next, pair.prev).isZero(0.0));
    EXPECT_EQ(divergence(p, pair.next, pair.prev), 0.0);
  }
  EXPECT_EQ(surrogate_loss(p, pairs), 0.0);
}

TEST(Forward, SingleLinearLayerHandComputed) {
  // d = 1: psi = [a b] (y, x)^T + c with a = 2, b = -3, c = 0.5.
  MlpParameters p;
  p.arch = MlpArchitecture::for_state_dim(1, {});
  p.layers.push_back({Eigen::MatrixXd{{2.0, -3.0}}, Eigen::VectorXd::Constant(1, 0.5)});
  const StateVector y = StateVector::Constant(1, 1.5);
  const StateVector x = StateVector::Constant(1, 0.25);
  EXPECT_DOUBLE_EQ(forward(p, y, x)[0], 2.0 * 1.5 - 3.0 * 0.25 + 0.5);
  EXPECT_DOUBLE_EQ(divergence(p, y, x), 2.0);
}

TEST(Divergence, LinearLayerIsTraceOfYBlock) {
  Rng rng(11);
  MlpParameters p = init_params(MlpArchitecture::for_state_dim(4, {}), 5);
  const double trace = p.layers[0].weight.leftCols(4).trace();
  for (const auto& pair : random_pairs(rng, 4, 5)) {
    EXPECT_NEAR(divergence(p, pair.next, pair.prev), trace, 1e-14);
  }
}

TEST(Divergence, MatchesFiniteDifferencesOnRandomNets) {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(3);
    std::vector<std::size_t> widths;
    const std::size_t depth = 1 + rng.below(3);
    for (std::size_t k = 0; k < depth; ++k) widths.push_back(1 + rng.below(8));
    const auto p = init_params(MlpArchitecture::for_state_dim(d, widths), rng());
    for (const auto& pair : random_pairs(rng, d, 3)) {
      const double exact = divergence(p, pair.next, pair.prev);
      const double fd = fd_divergence([&](const StateVector& y, const StateVector& x) { return forward(p, y, x); },
                                      pair.next, pair.prev, 1e-4);
      EXPECT_LT(rel_err(exact, fd, 1e-3), 1e-6) << "trial " << trial;
    }
  }
}

TEST(EvaluateBatch, AgreesWithSingleSamplePath) {
  Rng rng(5);
  const auto p = init_params(MlpArchitecture::for_state_dim(3, {6, 5}), 8);
  const auto pairs = random_pairs(rng, 3, 7);
  Eigen::MatrixXd y(3, 7);
  Eigen::MatrixXd x(3, 7);
  for (int k = 0; k < 7; ++k) {
    y.col(k) = pairs[k].next;
    x.col(k) = pairs[k].prev;
  }
  const BatchOutput out = evaluate_batch(p, y, x);
  for (int k = 0; k < 7; ++k) {
    EXPECT_LT((out.psi.col(k) - forward(p, pairs[k].next, pairs[k].prev)).norm(), 1e-12);
    EXPECT_NEAR(out.divergence[k], divergence(p, pairs[k].next, pairs[k].prev), 1e-12);
  }
}

TEST(LossGradient, ZeroNetworkOnlyDivergenceTermContributes) {
  Rng rng(4);
  const auto batch = random_pairs(rng, 2, 6);

  // Affine net with zero weights: psi = 0, so only d(trace W_y)/dW = [I | 0] remains.
  auto linear = init_params(MlpArchitecture::for_state_dim(2, {}), 2);
  linear.layers[0].weight.setZero();
  const auto lg = loss_gradient(linear, batch);
  EXPECT_EQ(lg.loss, 0.0);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(2, 4);
  expected.leftCols(2).setIdentity();
  EXPECT_LT((lg.gradient[0].weight - expected).norm(), 1e-14);
  EXPECT_TRUE(lg.gradient[0].bias.isZero(0.0));

  // With a hidden layer every path through the trace crosses two zero
  // matrices, so the whole gradient vanishes.
  auto hidden = init_params(MlpArchitecture::for_state_dim(2, {4}), 2);
  for (auto& layer : hidden.layers) layer.weight.setZero();
  const auto lg2 = loss_gradient(hidden, batch);
  EXPECT_EQ(gradient_norm(lg2.gradient), 0.0);
}

TEST(LossGradient, MatchesFiniteDifferencesTinyNet) {
  Rng rng(2024);
  const auto p = init_params(MlpArchitecture::for_state_dim(2, {4}), 17);
  const auto batch = random_pairs(rng, 2, 8);
  const auto lg = loss_gradient(p, batch);
  EXPECT_NEAR(lg.loss, surrogate_loss(p, batch), 1e-12);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (Eigen::Index r = 0; r < p.layers[l].weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.layers[l].weight.cols(); ++c) {
        const double fd = numeric_partial(p, batch, l, false, r, c, 1e-5);
        EXPECT_LT(rel_err(lg.gradient[l].weight(r, c), fd, 1e-6), 1e-4) << l << ' ' << r << ' ' << c;
      }
      const double fdb = numeric_partial(p, batch, l, true, r, 0, 1e-5);
      EXPECT_LT(rel_err(lg.gradient[l].bias[r], fdb, 1e-6), 1e-4) << l << ' ' << r;
    }
  }
}

TEST(SurrogateLoss, EmptyBatchIsUsageError) {
  const auto p = init_params(MlpArchitecture::for_state_dim(2, {3}), 1);
  EXPECT_THROW(surrogate_loss(p, {}), UsageError);
  EXPECT_THROW(loss_gradient(p, {}), UsageError);
}

TEST(SurrogateLoss, AtGaussianOracleEqualsMinusHalfFisherInformation) {
  // Linear kernel y = 0.5 x + sigma z. At the exact score the surrogate loss
  // equals -(1/2) E|grad log p|^2 = -d / (2 sigma^2).
  const std::size_t d = 3;
  const double sigma = 0.5;
  const auto p = linear_gaussian_net(d, sigma, 0.5);
  Rng rng(8);
  std::vector<TransitionPair> pairs;
  for (int k = 0; k < 20000; ++k) {
    const StateVector x = scusum::testing::random_state(rng, d);
    pairs.push_back({x, 0.5 * x + sigma * scusum::testing::random_state(rng, d)});
  }
  std::vector<double> per;
  for (const auto& pr : pairs) {
    per.push_back(0.5 * forward(p, pr.next, pr.prev).squaredNorm() + divergence(p, pr.next, pr.prev));
  }
  const Estimate e = summarize(per);
  EXPECT_NEAR(surrogate_loss(p, pairs), e.mean, 1e-9);
  EXPECT_LT(std::abs(e.mean + d / (2 * sigma * sigma)), 3 * e.std_error);
}

TEST(Train, ZeroLearningRateLeavesParametersAndLossUnchanged) {
  Rng rng(3);
  const auto data = random_pairs(rng, 2, 64);
  const auto arch = MlpArchitecture::for_state_dim(2, {5});
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 16;
  cfg.epochs = 4;
  cfg.seed = 9;
  const auto result = train(arch, data, cfg);
  const auto init = init_params(arch, derive_seed(cfg.seed, 0));
  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    EXPECT_EQ(result.params.layers[l].weight, init.layers[l].weight);
  }
  ASSERT_EQ(result.epoch_loss.size(), 4u);
  for (double loss : result.epoch_loss) EXPECT_NEAR(loss, result.epoch_loss.front(), 1e-12);
  EXPECT_NEAR(result.epoch_loss.front(), surrogate_loss(init, data), 1e-12);
}

TEST(Train, DeterministicForFixedSeed) {
  const GaussianKernelSpec spec{2, 0.3, 0.3, 0.2};
  const auto data = stationary_pairs(spec, 512, 1);
  const auto arch = MlpArchitecture::for_state_dim(2, {16});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  const auto a = train(arch, data, cfg);
  const auto b = train(arch, data, cfg);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(a.params.layers.back().weight, b.params.layers.back().weight);
}

TEST(Train, RejectsUndersizedDatasetAndReportsDivergence) {
  Rng rng(1);
  const auto data = random_pairs(rng, 2, 10);
  const auto arch = MlpArchitecture::for_state_dim(2, {4});
  TrainConfig cfg;
  cfg.batch_size = 11;
  EXPECT_THROW(train(arch, data, cfg), UsageError);

  // Gradient descent on an unbounded-below objective with a huge step blows up.
  cfg.batch_size = 5;
  cfg.optimizer = Optimizer::SGD;
  cfg.learning_rate = 1e6;
  cfg.epochs = 50;
  try {
    train(arch, data, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_LT(e.epoch(), 50u);
  }
}

TEST(Train, LearnsSmallGaussianKernel) {
  const GaussianKernelSpec spec{2, 0.5, 0.5, 0.3};
  const auto data = stationary_pairs(spec, 4000, 21);
  const auto eval = stationary_pairs(spec, 2000, 22);
  const auto arch = MlpArchitecture::for_state_dim(2, {32, 32});
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 64;
  cfg.learning_rate = 3e-3;
  const auto result = train(arch, data, cfg);
  // Average loss over the last epochs is below the first ones.
  EXPECT_LT(result.epoch_loss.back(), result.epoch_loss.front());
  const auto report = evaluate_accuracy(result.params, closed_form_score(spec), eval);
  EXPECT_LT(report.rel_error, 0.10);
  EXPECT_NEAR(report.rel_error, report.mse / report.var_scale, 1e-15);
}

TEST(Train, DoublingEpochsDoesNotRaiseFinalLossBeyondNoise) {
  const GaussianKernelSpec spec{2, 0.5, 0.5, 0.3};
  const auto data = stationary_pairs(spec, 4000, 23);
  const auto arch = MlpArchitecture::for_state_dim(2, {32, 32});
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.epochs = 10;
  const auto shorter = train(arch, data, cfg);
  cfg.epochs = 20;
  const auto longer = train(arch, data, cfg);
  // Spread of a single minibatch loss at the shorter run's final parameters.
  const Estimate per_sample = summarize(as_score_field(shorter.params).hyvarinen_scores(data));
  const double batch_sd = per_sample.std_error * std::sqrt(static_cast<double>(data.size() / cfg.batch_size));
  EXPECT_LE(longer.epoch_loss.back(), shorter.epoch_loss.back() + 3 * batch_sd);
}

TEST(Train, LearnedHyvarinenScoresCorrelateWithOracle) {
  const GaussianKernelSpec spec{10, 0.3, 0.3, 0.2};
  const auto data = stationary_pairs(spec, 10000, 24);
  const auto eval = stationary_pairs(spec, 10000, 25);
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto result = train(MlpArchitecture::for_state_dim(10, {64, 64}), data, cfg);
  const auto learned = as_score_field(result.params).hyvarinen_scores(eval);
  const auto exact = closed_form_score(spec).hyvarinen_scores(eval);
  const Eigen::Map<const Eigen::VectorXd> a(learned.data(), static_cast<Eigen::Index>(learned.size()));
  const Eigen::Map<const Eigen::VectorXd> b(exact.data(), static_cast<Eigen::Index>(exact.size()));
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  EXPECT_GE(da.dot(db) / (da.norm() * db.norm()), 0.95);
}

TEST(Accuracy, OracleAgainstItselfIsExact) {
  const GaussianKernelSpec spec{3, 0.4, 0.6, 0.1};
  const auto eval = stationary_pairs(spec, 100, 2);
  const auto oracle = closed_form_score(spec);
  const auto report = evaluate_accuracy(oracle, oracle, eval);
  EXPECT_EQ(report.mse, 0.0);
  EXPECT_EQ(report.rel_error, 0.0);
  EXPECT_THROW(evaluate_accuracy(oracle, oracle, {}), UsageError);
}

TEST(Accuracy, ZeroVarScaleIsUndefined) {
  const auto zero_net = [] {
    auto p = init_params(MlpArchitecture::for_state_dim(1, {2}), 1);
    for (auto& layer : p.layers) layer.weight.setZero();
    return as_score_field(p);
  }();
  Rng rng(1);
  const auto pairs = random_pairs(rng, 1, 3);
  EXPECT_THROW(evaluate_accuracy(zero_net, zero_net, pairs), NumericError);
}

TEST(ScoreFieldAdapter, DelegatesToNetwork) {
  Rng rng(12);
  const auto p = init_params(MlpArchitecture::for_state_dim(3, {7}), 4);
  const auto field = as_score_field(p);
  for (const auto& pair : random_pairs(rng, 3, 5)) {
    EXPECT_EQ(field.divergence(pair.next, pair.prev), divergence(p, pair.next, pair.prev));
    const Eigen::VectorXd psi = forward(p, pair.next, pair.prev);
    EXPECT_NEAR(hyvarinen_score(field, pair), 0.5 * psi.squaredNorm() + divergence(p, pair.next, pair.prev), 1e-12);
  }
  const auto pairs = random_pairs(rng, 3, 300);
  const auto batched = field.hyvarinen_scores(pairs);
  for (std::size_t k = 0; k < pairs.size(); ++k) EXPECT_NEAR(batched[k], hyvarinen_score(field, pairs[k]), 1e-10);
}

TEST(ScoreFieldAdapter, StandardizationAppliesChainRule) {
  Rng rng(13);
  auto p = init_params(MlpArchitecture::for_state_dim(3, {6}), 4);
  p.standardization = Standardization{Eigen::Vector3d(1.0, -2.0, 0.5), Eigen::Vector3d(2.0, 0.5, 3.0)};
  const auto field = as_score_field(p);
  for (const auto& pair : random_pairs(rng, 3, 4)) {
    const double fd = fd_divergence([&](const StateVector& y, const StateVector& x) { return field.score(y, x); },
                                    pair.next, pair.prev, 1e-4);
    EXPECT_LT(rel_err(field.divergence(pair.next, pair.prev), fd, 1e-3), 1e-6);
    EXPECT_NEAR(field.hyvarinen_scores(std::span(&pair, 1))[0], hyvarinen_score(field, pair), 1e-10);
  }
}

TEST(ModelFile, RoundTripPreservesEverything) {
  auto p = init_params(MlpArchitecture::for_state_dim(3, {5, 4}), 77);
  p.standardization = Standardization{Eigen::Vector3d(0.1, 0.2, 0.3), Eigen::Vector3d(1.0, 2.0, 3.0)};
  std::stringstream buf;
  save_model(buf, p);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "SCUSUMNN");
  const auto q = load_model(buf);
  EXPECT_EQ(q.arch, p.arch);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_EQ(q.layers[l].weight, p.layers[l].weight);
    EXPECT_EQ(q.layers[l].bias, p.layers[l].bias);
  }
  ASSERT_TRUE(q.standardization.has_value());
  EXPECT_EQ(q.standardization->scale, p.standardization->scale);

  // Little-endian version field right after the magic.
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);
  EXPECT_EQ(bytes[9], 0);
}

TEST(ModelFile, RejectsCorruptInput) {
  const auto p = init_params(MlpArchitecture::for_state_dim(2, {3}), 1);
  std::stringstream buf;
  save_model(buf, p);
  std::string bytes = buf.str();

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_model(truncated), ParseError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream bm(bad_magic);
  EXPECT_THROW(load_model(bm), ParseError);

  // A NaN weight is rejected on load.
  std::string nan_bytes = bytes;
  const double nan = std::nan("");
  // First weight sits after magic(8) + version(4) + dims(4+4) + count(4) + width(4) + act(4) + flag(1).
  std::memcpy(nan_bytes.data() + 33, &nan, sizeof nan);
  std::stringstream nb(nan_bytes);
  EXPECT_THROW(load_model(nb), NumericError);
}

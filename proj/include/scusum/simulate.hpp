#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "scusum/core.hpp"
#include "scusum/random.hpp"

namespace scusum {

/// Gaussian transition kernel X' = mean(X) + sigma * Z with
///   mean(x) = x - alpha * x + shift * tanh(x)   (elementwise),
/// i.e. a quadratic potential V(x) = alpha/2 |x|^2 plus a bounded drift
/// f(x) = shift * tanh(x). For 0 < alpha < 2 the linear part contracts and the
/// chain is geometrically ergodic.
struct GaussianKernelSpec {
  std::size_t dim = 10;
  double alpha = 0.3;
  double sigma = 0.3;
  double shift = 0.2;

  /// UsageError on dim == 0, sigma <= 0, or alpha outside (0, 2).
  void validate() const;
};

bool operator==(const GaussianKernelSpec& a, const GaussianKernelSpec& b);

struct TrajectoryConfig {
  GaussianKernelSpec pre;
  std::optional<GaussianKernelSpec> post;
  /// First index n whose transition X_{n-1} -> X_n uses the post kernel;
  /// nullopt means the change never happens.
  std::optional<std::size_t> change_point;
  std::size_t length = 1000;
  std::uint64_t seed = 1;
  std::size_t burn_in = 1000;

  void validate() const;
};

StateVector transition_mean(const GaussianKernelSpec& spec, const StateVector& x);

/// One transition: transition_mean(spec, x) + sigma * z, z ~ N(0, I) from `rng`.
StateVector step(const GaussianKernelSpec& spec, const StateVector& x, Rng& rng);

/// Starts at the zero vector, runs `burn_in` pre-kernel steps, then emits
/// X_0 .. X_{length-1}. X_n (n >= 1) is drawn from X_{n-1} under `pre` when
/// n < change_point and under `post` otherwise; the state carries across the change.
std::vector<StateVector> simulate_path(const TrajectoryConfig& config);

/// Convenience: `count` consecutive pairs from a single stationary path of `spec`.
std::vector<TransitionPair> stationary_pairs(const GaussianKernelSpec& spec, std::size_t count,
                                             std::uint64_t seed, std::size_t burn_in = 1000);

/// Exact score of the kernel: -(y - transition_mean(x)) / sigma^2, divergence -d / sigma^2.
class ClosedFormScore final : public ScoreField {
 public:
  explicit ClosedFormScore(GaussianKernelSpec spec);

  std::size_t dim() const override { return spec_.dim; }
  StateVector score(const StateVector& y, const StateVector& x) const override;
  double divergence(const StateVector& y, const StateVector& x) const override;
  std::vector<double> hyvarinen_scores(std::span<const TransitionPair> pairs) const override;

  const GaussianKernelSpec& spec() const noexcept { return spec_; }

 private:
  GaussianKernelSpec spec_;
};

ClosedFormScore closed_form_score(const GaussianKernelSpec& spec);

/// log N(y; mean(x), sigma^2 I) under `spec`.
double log_density(const GaussianKernelSpec& spec, const TransitionPair& pair);

/// log q(x_next | x_prev) - log p(x_next | x_prev): the increment of the
/// likelihood-ratio CUSUM that is optimal when both kernels are known.
double log_likelihood_ratio(const GaussianKernelSpec& pre, const GaussianKernelSpec& post,
                            const TransitionPair& pair);

/// Trajectory CSV: header x0..x{d-1}, optionally followed by a `regime`
/// column (0 = pre-change, 1 = post-change).
void write_trajectory_csv(std::ostream& out, std::size_t dim, std::span<const StateVector> path,
                          std::optional<std::size_t> change_point = std::nullopt);

struct TrajectoryTable {
  std::vector<StateVector> states;
  /// Per-row regime flags when the file had a `regime` column.
  std::optional<std::vector<int>> regime;
};

TrajectoryTable read_trajectory_csv(std::istream& in);

}  // namespace scusum

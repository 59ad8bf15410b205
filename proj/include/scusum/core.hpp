#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace scusum {

/// One observation X_n of the chain.
using StateVector = Eigen::VectorXd;

/// Consecutive observations (X_{n-1}, X_n).
struct TransitionPair {
  StateVector prev;
  StateVector next;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(next.size()); }
};

/// Throws DimensionError unless `v` has `dim` entries, NumericError unless all are finite.
void check_state(const StateVector& v, std::size_t dim, std::string_view what);

/// Throws unless both halves of `pair` have dimension `dim` and are finite.
void check_pair(const TransitionPair& pair, std::size_t dim);

/// Consecutive pairs (path[n-1], path[n]) for n = 1..size-1.
std::vector<TransitionPair> make_pairs(std::span<const StateVector> path);

/// A model of the conditional score y -> grad_y log p(y|x) and its divergence
/// (the Laplacian of log p in y). Implementations are immutable after
/// construction and safe to share between threads.
class ScoreField {
 public:
  virtual ~ScoreField() = default;

  virtual std::size_t dim() const = 0;
  virtual StateVector score(const StateVector& y, const StateVector& x) const = 0;
  virtual double divergence(const StateVector& y, const StateVector& x) const = 0;

  /// Conditional Hyvarinen score 0.5 * |score|^2 + divergence at every pair.
  /// Implementations may override with a batched evaluation; the default
  /// loops over hyvarinen_score.
  virtual std::vector<double> hyvarinen_scores(std::span<const TransitionPair> pairs) const;
};

/// Monte-Carlo mean with its standard error (sample std / sqrt(n)).
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Mean and standard error of `values`; UsageError when empty.
Estimate summarize(std::span<const double> values);

/// 0.5 * |score(x_next, x_prev)|^2 + divergence(x_next, x_prev).
double hyvarinen_score(const ScoreField& field, const TransitionPair& pair);

/// S_H(pair; p) - S_H(pair; q). Positive values favour q.
double score_difference(const ScoreField& field_p, const ScoreField& field_q,
                        const TransitionPair& pair);

/// Score differences for a whole stream, using each field's batched path.
std::vector<double> score_differences(const ScoreField& field_p, const ScoreField& field_q,
                                      std::span<const TransitionPair> pairs);

/// Conditional Fisher divergence D_F(p||q) = 0.5 * E |score_p - score_q|^2,
/// averaged over the supplied pairs (which should be drawn from p).
///
/// The 1/2 factor makes E_p[score_difference] = -D_F hold exactly, which is the
/// identity the detector's drift relies on.
Estimate estimate_fisher_divergence(const ScoreField& field_p, const ScoreField& field_q,
                                    std::span<const TransitionPair> samples);

/// Empirical mean of score_difference over `pairs`. Negative in expectation
/// when the pairs come from p's stationary law, positive under q.
/// Stationarity (burn-in) is the caller's responsibility.
Estimate estimate_drift(const ScoreField& field_p, const ScoreField& field_q,
                        std::span<const TransitionPair> pairs);

/// Isotropic Gaussian kernel N(mean(x), sigma^2 I) with affine mean
/// mean(x) = slope * x + offset. Mostly a test fixture; the nonlinear
/// synthetic kernel lives in simulate.hpp.
class GaussianScoreField final : public ScoreField {
 public:
  GaussianScoreField(std::size_t dim, double sigma, double slope = 0.0, double offset = 0.0);

  std::size_t dim() const override { return dim_; }
  StateVector score(const StateVector& y, const StateVector& x) const override;
  double divergence(const StateVector& y, const StateVector& x) const override;

 private:
  std::size_t dim_;
  double sigma_;
  double slope_;
  double offset_;
};

}  // namespace scusum

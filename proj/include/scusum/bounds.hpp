#pragma once

#include <cstddef>

namespace scusum {

/// Minorization constants (l, lambda) with P^l(x, .) >= lambda * nu(.).
struct DoeblinConstants {
  std::size_t l = 1;
  double lambda = 1.0;

  void validate() const;
};

/// Quantities entering the false-alarm and delay guarantees of the truncated
/// detector: pre-change drift -delta, concentration scale mu, threshold b,
/// post-change drift I, truncation level M.
struct BoundInputs {
  double delta = 0.0;
  double mu = 0.0;
  double b = 0.0;
  double I = 0.0;
  double M = 0.0;
};

/// mu = 2 (l + 1) |phi| / lambda, the Hoeffding concentration scale.
double concentration_mu(double norm_phi, const DoeblinConstants& constants);

/// Practical substitute for unknown Doeblin constants: factor * M.
double heuristic_mu(double truncation_level, double factor = 2.05);

/// E_inf[T(b)] >= (2 sqrt(2) / 3) exp(4 delta (b - mu) / mu^2). Valid only for b > mu.
double false_alarm_lower_bound(const BoundInputs& inputs);

/// Leading-order detection delay bound. The true statement is
/// E_1[T(b)] <= 1 + n0 (1 + o(1)) as n0 -> infinity, so `bound` is asymptotic.
struct DelayBound {
  std::size_t n0 = 0;
  double bound = 1.0;
};

/// n0 = floor((b + mu) / I), bound = 1 + n0. UsageError unless I > 0.
DelayBound delay_upper_bound(const BoundInputs& inputs);

/// P(|S_n - E S_n| >= n eps) <= 2 exp(-2 (n eps - mu_f)^2 / (n mu_f^2)) for
/// bounded functionals of a uniformly ergodic chain; requires n > mu_f / eps.
double hoeffding_tail(std::size_t n, double eps, double mu_f);

}  // namespace scusum

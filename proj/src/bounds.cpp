#include "scusum/bounds.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "scusum/error.hpp"

namespace scusum {

void DoeblinConstants::validate() const {
  if (l < 1) throw UsageError("Doeblin l must be >= 1");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw UsageError("Doeblin lambda must lie in (0, 1]");
}

double concentration_mu(double norm_phi, const DoeblinConstants& constants) {
  constants.validate();
  if (!(norm_phi > 0.0)) throw UsageError("sup-norm of phi must be > 0");
  return 2.0 * (static_cast<double>(constants.l) + 1.0) * norm_phi / constants.lambda;
}

double heuristic_mu(double truncation_level, double factor) {
  if (!(truncation_level > 0.0)) throw UsageError("truncation level M must be > 0");
  if (!(factor > 0.0)) throw UsageError("heuristic factor must be > 0");
  return factor * truncation_level;
}

double false_alarm_lower_bound(const BoundInputs& in) {
  if (!(in.mu > 0.0)) throw UsageError("mu must be > 0");
  if (!(in.delta > 0.0)) throw UsageError("delta must be > 0 (pre-change drift must be negative)");
  if (!(in.b > in.mu)) {
    throw DomainError("false-alarm bound requires b > μ (got b = " + std::to_string(in.b) +
                      ", mu = " + std::to_string(in.mu) + ")");
  }
  return (2.0 * std::numbers::sqrt2 / 3.0) * std::exp(4.0 * in.delta * (in.b - in.mu) / (in.mu * in.mu));
}

DelayBound delay_upper_bound(const BoundInputs& in) {
  if (!(in.I > 0.0)) throw UsageError("post-change drift I must be > 0");
  if (in.b < 0.0 || in.mu < 0.0) throw UsageError("b and mu must be non-negative");
  const double ratio = std::floor((in.b + in.mu) / in.I);
  DelayBound out;
  out.n0 = static_cast<std::size_t>(ratio);
  out.bound = 1.0 + static_cast<double>(out.n0);
  return out;
}

double hoeffding_tail(std::size_t n, double eps, double mu_f) {
  if (n == 0) throw UsageError("n must be >= 1");
  if (!(eps > 0.0) || !(mu_f > 0.0)) throw UsageError("eps and mu_f must be > 0");
  const auto nd = static_cast<double>(n);
  if (!(nd * eps > mu_f)) throw DomainError("Hoeffding bound requires n > mu_f / eps");
  const double gap = nd * eps - mu_f;
  return 2.0 * std::exp(-2.0 * gap * gap / (nd * mu_f * mu_f));
}

}  // namespace scusum

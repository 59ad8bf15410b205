#include "scusum/core.hpp"

#include <cmath>
#include <string>

#include "scusum/error.hpp"

namespace scusum {

void check_state(const StateVector& v, std::size_t dim, std::string_view what) {
  if (static_cast<std::size_t>(v.size()) != dim) {
    throw DimensionError(std::string(what), dim, static_cast<std::size_t>(v.size()));
  }
  if (!v.allFinite()) throw NumericError(std::string(what) + " has non-finite entries");
}

void check_pair(const TransitionPair& pair, std::size_t dim) {
  check_state(pair.prev, dim, "x_prev");
  check_state(pair.next, dim, "x_next");
}

std::vector<TransitionPair> make_pairs(std::span<const StateVector> path) {
  std::vector<TransitionPair> pairs;
  if (path.size() < 2) return pairs;
  pairs.reserve(path.size() - 1);
  for (std::size_t n = 1; n < path.size(); ++n) pairs.push_back({path[n - 1], path[n]});
  return pairs;
}

std::vector<double> ScoreField::hyvarinen_scores(std::span<const TransitionPair> pairs) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) out.push_back(hyvarinen_score(*this, pair));
  return out;
}

Estimate summarize(std::span<const double> values) {
  if (values.empty()) throw UsageError("cannot summarize an empty sample");
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = values.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n), values.size()};
}

double hyvarinen_score(const ScoreField& field, const TransitionPair& pair) {
  check_pair(pair, field.dim());
  const StateVector s = field.score(pair.next, pair.prev);
  if (static_cast<std::size_t>(s.size()) != field.dim()) {
    throw DimensionError("score output", field.dim(), static_cast<std::size_t>(s.size()));
  }
  const double norm_term = 0.5 * s.squaredNorm();
  if (!std::isfinite(norm_term)) throw NumericError("Hyvarinen score: squared-norm term is not finite");
  const double div = field.divergence(pair.next, pair.prev);
  if (!std::isfinite(div)) throw NumericError("Hyvarinen score: divergence term is not finite");
  return norm_term + div;
}

double score_difference(const ScoreField& field_p, const ScoreField& field_q,
                        const TransitionPair& pair) {
  return hyvarinen_score(field_p, pair) - hyvarinen_score(field_q, pair);
}

std::vector<double> score_differences(const ScoreField& field_p, const ScoreField& field_q,
                                      std::span<const TransitionPair> pairs) {
  if (field_p.dim() != field_q.dim()) {
    throw DimensionError("score fields", field_p.dim(), field_q.dim());
  }
  for (const auto& pair : pairs) check_pair(pair, field_p.dim());
  std::vector<double> out = field_p.hyvarinen_scores(pairs);
  const std::vector<double> sq = field_q.hyvarinen_scores(pairs);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] -= sq[i];
    if (!std::isfinite(out[i])) {
      throw NumericError("score difference at pair " + std::to_string(i) + " is not finite");
    }
  }
  return out;
}

Estimate estimate_fisher_divergence(const ScoreField& field_p, const ScoreField& field_q,
                                    std::span<const TransitionPair> samples) {
  if (samples.empty()) throw UsageError("estimate_fisher_divergence: no samples");
  if (field_p.dim() != field_q.dim()) {
    throw DimensionError("score fields", field_p.dim(), field_q.dim());
  }
  std::vector<double> terms;
  terms.reserve(samples.size());
  for (const auto& pair : samples) {
    check_pair(pair, field_p.dim());
    const StateVector diff = field_p.score(pair.next, pair.prev) - field_q.score(pair.next, pair.prev);
    terms.push_back(0.5 * diff.squaredNorm());
  }
  return summarize(terms);
}

Estimate estimate_drift(const ScoreField& field_p, const ScoreField& field_q,
                        std::span<const TransitionPair> pairs) {
  if (pairs.empty()) throw UsageError("estimate_drift: no pairs");
  const std::vector<double> diffs = score_differences(field_p, field_q, pairs);
  return summarize(diffs);
}

GaussianScoreField::GaussianScoreField(std::size_t dim, double sigma, double slope, double offset)
    : dim_(dim), sigma_(sigma), slope_(slope), offset_(offset) {
  if (dim == 0) throw UsageError("GaussianScoreField: dimension must be positive");
  if (!(sigma > 0.0)) throw UsageError("GaussianScoreField: sigma must be positive");
}

StateVector GaussianScoreField::score(const StateVector& y, const StateVector& x) const {
  check_state(y, dim_, "y");
  check_state(x, dim_, "x");
  const StateVector mean = (slope_ * x).array() + offset_;
  return -(y - mean) / (sigma_ * sigma_);
}

double GaussianScoreField::divergence(const StateVector& y, const StateVector& x) const {
  check_state(y, dim_, "y");
  check_state(x, dim_, "x");
  return -static_cast<double>(dim_) / (sigma_ * sigma_);
}

}  // namespace scusum

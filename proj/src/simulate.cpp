#include "scusum/simulate.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include "csv_util.hpp"
#include "scusum/error.hpp"

namespace scusum {

void GaussianKernelSpec::validate() const {
  if (dim == 0) throw UsageError("kernel dim must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("kernel sigma must be > 0");
  if (!(alpha > 0.0 && alpha < 2.0)) throw UsageError("kernel alpha must lie in (0, 2)");
  if (!std::isfinite(shift)) throw UsageError("kernel shift must be finite");
}

bool operator==(const GaussianKernelSpec& a, const GaussianKernelSpec& b) {
  return a.dim == b.dim && a.alpha == b.alpha && a.sigma == b.sigma && a.shift == b.shift;
}

void TrajectoryConfig::validate() const {
  pre.validate();
  if (post) {
    post->validate();
    if (post->dim != pre.dim) throw DimensionError("post kernel", pre.dim, post->dim);
  }
  if (change_point) {
    if (!post) throw UsageError("finite change_point requires a post kernel");
    if (*change_point == 0) throw UsageError("change_point must be >= 1");
    if (*change_point > length) throw UsageError("change_point must not exceed length");
  }
}

StateVector transition_mean(const GaussianKernelSpec& spec, const StateVector& x) {
  check_state(x, spec.dim, "x");
  return (1.0 - spec.alpha) * x.array() + spec.shift * x.array().tanh();
}

StateVector step(const GaussianKernelSpec& spec, const StateVector& x, Rng& rng) {
  StateVector next = transition_mean(spec, x);
  for (Eigen::Index i = 0; i < next.size(); ++i) next[i] += spec.sigma * rng.normal();
  return next;
}

std::vector<StateVector> simulate_path(const TrajectoryConfig& config) {
  config.validate();
  Rng rng(config.seed);
  StateVector x = StateVector::Zero(static_cast<Eigen::Index>(config.pre.dim));
  for (std::size_t i = 0; i < config.burn_in; ++i) x = step(config.pre, x, rng);

  std::vector<StateVector> path;
  path.reserve(config.length);
  if (config.length == 0) return path;
  path.push_back(x);
  for (std::size_t n = 1; n < config.length; ++n) {
    const bool after_change = config.change_point && n >= *config.change_point;
    x = step(after_change ? *config.post : config.pre, x, rng);
    path.push_back(x);
  }
  return path;
}

std::vector<TransitionPair> stationary_pairs(const GaussianKernelSpec& spec, std::size_t count,
                                             std::uint64_t seed, std::size_t burn_in) {
  TrajectoryConfig cfg;
  cfg.pre = spec;
  cfg.length = count + 1;
  cfg.seed = seed;
  cfg.burn_in = burn_in;
  const auto path = simulate_path(cfg);
  return make_pairs(path);
}

ClosedFormScore::ClosedFormScore(GaussianKernelSpec spec) : spec_(spec) { spec_.validate(); }

StateVector ClosedFormScore::score(const StateVector& y, const StateVector& x) const {
  check_state(y, spec_.dim, "y");
  return -(y - transition_mean(spec_, x)) / (spec_.sigma * spec_.sigma);
}

double ClosedFormScore::divergence(const StateVector& y, const StateVector& x) const {
  check_state(y, spec_.dim, "y");
  check_state(x, spec_.dim, "x");
  return -static_cast<double>(spec_.dim) / (spec_.sigma * spec_.sigma);
}

std::vector<double> ClosedFormScore::hyvarinen_scores(std::span<const TransitionPair> pairs) const {
  const double var = spec_.sigma * spec_.sigma;
  const double div = -static_cast<double>(spec_.dim) / var;
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    check_pair(pair, spec_.dim);
    const double r2 = (pair.next - transition_mean(spec_, pair.prev)).squaredNorm();
    out.push_back(0.5 * r2 / (var * var) + div);
  }
  return out;
}

ClosedFormScore closed_form_score(const GaussianKernelSpec& spec) { return ClosedFormScore(spec); }

double log_density(const GaussianKernelSpec& spec, const TransitionPair& pair) {
  check_pair(pair, spec.dim);
  const double var = spec.sigma * spec.sigma;
  const double r2 = (pair.next - transition_mean(spec, pair.prev)).squaredNorm();
  const auto d = static_cast<double>(spec.dim);
  return -0.5 * r2 / var - 0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

double log_likelihood_ratio(const GaussianKernelSpec& pre, const GaussianKernelSpec& post,
                            const TransitionPair& pair) {
  if (pre.dim != post.dim) throw DimensionError("post kernel", pre.dim, post.dim);
  const double llr = log_density(post, pair) - log_density(pre, pair);
  if (!std::isfinite(llr)) throw NumericError("log-likelihood ratio is not finite");
  return llr;
}

void write_trajectory_csv(std::ostream& out, std::size_t d, std::span<const StateVector> path,
                          std::optional<std::size_t> change_point) {
  const bool with_regime = change_point.has_value();
  for (const auto& v : path) check_state(v, d, "trajectory row");
  for (std::size_t i = 0; i < d; ++i) out << (i ? "," : "") << 'x' << i;
  if (with_regime) out << (d ? "," : "") << "regime";
  out << '\n';
  for (std::size_t n = 0; n < path.size(); ++n) {
    for (std::size_t i = 0; i < d; ++i) {
      out << (i ? "," : "") << detail::format_double(path[n][static_cast<Eigen::Index>(i)]);
    }
    if (with_regime) out << ',' << (n >= *change_point ? 1 : 0);
    out << '\n';
  }
}

TrajectoryTable read_trajectory_csv(std::istream& in) {
  TrajectoryTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trajectory CSV is empty", 1);
  const auto header = detail::split(detail::trim(line), ',');
  std::size_t d = 0;
  bool has_regime = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = detail::trim(header[i]);
    if (name == "regime" && i + 1 == header.size()) {
      has_regime = true;
    } else if (name == "x" + std::to_string(i)) {
      ++d;
    } else {
      throw ParseError("unexpected trajectory column '" + std::string(name) + "'", 1);
    }
  }
  if (d == 0) throw ParseError("trajectory CSV has no state columns", 1);
  if (has_regime) table.regime.emplace();

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    StateVector v(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
      const auto value = detail::parse_double(cells[i]);
      if (!value) throw ParseError("non-numeric value '" + std::string(cells[i]) + "'", line_no);
      v[static_cast<Eigen::Index>(i)] = *value;
    }
    table.states.push_back(std::move(v));
    if (has_regime) {
      const auto r = detail::parse_double(cells.back());
      if (!r || (*r != 0.0 && *r != 1.0)) throw ParseError("regime must be 0 or 1", line_no);
      table.regime->push_back(static_cast<int>(*r));
    }
  }
  return table;
}

}  // namespace scusum

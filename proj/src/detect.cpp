#include "scusum/detect.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "csv_util.hpp"
#include "scusum/error.hpp"

namespace scusum {

TruncationSpec TruncationSpec::at(double m) {
  if (!(m > 0.0) || !std::isfinite(m)) throw UsageError("truncation level M must be finite and > 0");
  return TruncationSpec{m};
}

double truncate(const TruncationSpec& spec, double s) {
  if (!spec.level) return s;
  return std::clamp(s, -*spec.level, *spec.level);
}

void DetectorConfig::validate() const {
  if (!(threshold > 0.0)) throw UsageError("detector threshold b must be > 0");
  if (truncation.level && !(*truncation.level > 0.0)) throw UsageError("truncation level M must be > 0");
}

DetectorState detector_update(const DetectorState& state, double increment,
                              const DetectorConfig& config) {
  if (state.alarmed) throw UsageError("detector already alarmed; reset before updating");
  if (!std::isfinite(increment)) {
    throw NumericError("non-finite detector increment at n = " + std::to_string(state.time + 1));
  }
  DetectorState next = state;
  next.last_increment = truncate(config.truncation, increment);
  next.statistic = next.last_increment + std::max(0.0, state.statistic);
  next.time = state.time + 1;
  next.alarmed = next.statistic >= config.threshold;
  return next;
}

std::optional<std::size_t> run_detector(std::span<const double> increments,
                                        const DetectorConfig& config) {
  config.validate();
  DetectorState state;
  for (double s : increments) {
    state = detector_update(state, s, config);
    if (state.alarmed) return state.time;
  }
  return std::nullopt;
}

RunLengthReport measure_run_lengths(std::span<const double> increments,
                                    const DetectorConfig& config) {
  config.validate();
  RunLengthReport report;
  report.stream_length = increments.size();
  DetectorState state;
  double sum = 0.0;
  for (double s : increments) {
    state = detector_update(state, s, config);
    if (state.alarmed) {
      report.intervals.push_back(state.time);
      sum += static_cast<double>(state.time);
      state.reset();
    }
  }
  report.residual = state.time;
  report.count = report.intervals.size();
  report.mean = report.count ? sum / static_cast<double>(report.count) : 0.0;
  return report;
}

RunLengthReport measure_false_alarms(std::span<const double> increments,
                                     const DetectorConfig& config) {
  return measure_run_lengths(increments, config);
}

RunLengthReport measure_delays(std::span<const double> increments, const DetectorConfig& config) {
  return measure_run_lengths(increments, config);
}

std::vector<SweepRow> threshold_sweep(std::span<const double> increments,
                                      std::span<const double> thresholds,
                                      const DetectorConfig& config_template) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) throw UsageError("sweep thresholds must be strictly increasing");
  }
  std::vector<SweepRow> rows;
  rows.reserve(thresholds.size());
  for (double b : thresholds) {
    DetectorConfig cfg = config_template;
    cfg.threshold = b;
    const RunLengthReport r = measure_run_lengths(increments, cfg);
    rows.push_back({b, r.mean, r.count, r.stream_length});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "threshold,mean_run_length,count\n";
  for (const auto& row : rows) {
    out << detail::format_double(row.threshold) << ','
        << (row.count ? detail::format_double(row.mean_run_length) : std::string{}) << ',' << row.count
        << '\n';
  }
}

std::vector<TraceRow> trace_detector(std::span<const double> increments,
                                     const DetectorConfig& config) {
  config.validate();
  std::vector<TraceRow> rows;
  rows.reserve(increments.size());
  DetectorState state;
  for (std::size_t k = 0; k < increments.size(); ++k) {
    state = detector_update(state, increments[k], config);
    rows.push_back({k + 1, increments[k], state.statistic, state.alarmed});
    if (state.alarmed) state.reset();
  }
  return rows;
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows) {
  out << "n,score_diff,cusum_stat\n";
  for (const auto& row : rows) {
    out << row.n << ',' << detail::format_double(row.score_diff) << ','
        << detail::format_double(row.cusum_stat) << '\n';
  }
}

}  // namespace scusum

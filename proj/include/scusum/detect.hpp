#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace scusum {

/// Clipping level M for detector increments; nullopt disables truncation.
struct TruncationSpec {
  std::optional<double> level;

  static TruncationSpec none() { return {}; }
  static TruncationSpec at(double m);

  bool active() const noexcept { return level.has_value(); }
};

/// phi(s): s clipped to [-M, M], identity when truncation is off.
double truncate(const TruncationSpec& spec, double s);

struct DetectorConfig {
  double threshold = 1.0;
  TruncationSpec truncation;

  void validate() const;
};

struct DetectorState {
  double statistic = 0.0;
  std::size_t time = 0;
  bool alarmed = false;
  /// Last increment after truncation.
  double last_increment = 0.0;

  void reset() noexcept { *this = DetectorState{}; }
};

/// W_n = phi(s_n) + max(0, W_{n-1}); alarm once W_n >= b.
/// This recursion equals max_{1<=k<=n} sum_{i=k}^n phi(s_i).
/// Throws NumericError on a non-finite increment, UsageError if already alarmed.
DetectorState detector_update(const DetectorState& state, double increment,
                              const DetectorConfig& config);

/// Smallest n with W_n >= b, or nullopt if the stream runs out first.
std::optional<std::size_t> run_detector(std::span<const double> increments,
                                        const DetectorConfig& config);

struct RunLengthReport {
  std::vector<std::size_t> intervals;
  double mean = 0.0;
  std::size_t count = 0;
  /// Samples consumed after the last alarm (never closed into an interval).
  std::size_t residual = 0;
  std::size_t stream_length = 0;
};

/// Detect-and-reset over one long stream: each alarm closes an interval that
/// started right after the previous alarm, then the statistic restarts at 0.
/// Only the statistic is reset; the underlying stream continues.
RunLengthReport measure_run_lengths(std::span<const double> increments,
                                    const DetectorConfig& config);

/// Stream generated entirely under the pre-change kernel; intervals estimate E_inf[T(b)].
RunLengthReport measure_false_alarms(std::span<const double> increments,
                                     const DetectorConfig& config);

/// Stream generated entirely under the post-change kernel (change at the first
/// sample); intervals estimate E_1[T(b)].
RunLengthReport measure_delays(std::span<const double> increments, const DetectorConfig& config);

struct SweepRow {
  double threshold = 0.0;
  double mean_run_length = 0.0;
  std::size_t count = 0;
  std::size_t stream_length = 0;
};

/// One run-length summary per threshold, replaying the same increments.
/// Thresholds must be strictly increasing.
std::vector<SweepRow> threshold_sweep(std::span<const double> increments,
                                      std::span<const double> thresholds,
                                      const DetectorConfig& config_template);

/// CSV `threshold,mean_run_length,count`. Rows without alarms print an empty mean.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

/// Per-step trace `n,score_diff,cusum_stat` with detect-and-reset semantics.
struct TraceRow {
  std::size_t n = 0;
  double score_diff = 0.0;
  double cusum_stat = 0.0;
  bool alarm = false;
};

std::vector<TraceRow> trace_detector(std::span<const double> increments,
                                     const DetectorConfig& config);
void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows);

}  // namespace scusum

#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include "scusum/bounds.hpp"
#include "scusum/detect.hpp"
#include "scusum/error.hpp"
#include "scusum/mocap.hpp"
#include "scusum/random.hpp"
#include "scusum/scorenet.hpp"
#include "scusum/simulate.hpp"

namespace scusum::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

TrajectoryTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file " + path);
  try {
    return read_trajectory_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path);
  }
}

std::optional<std::size_t> first_post_row(const TrajectoryTable& table) {
  if (!table.regime) return std::nullopt;
  for (std::size_t n = 0; n < table.regime->size(); ++n) {
    if ((*table.regime)[n] != 0) return n;
  }
  return std::nullopt;
}

TruncationSpec truncation_of(const std::optional<double>& level) {
  return level ? TruncationSpec::at(*level) : TruncationSpec::none();
}

json optional_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

// Model dimensions must match each other and the data.
void check_dims(const ScoreField& pre, const ScoreField& post, std::size_t data_dim) {
  if (pre.dim() != post.dim()) throw DimensionError("post-change model", pre.dim(), post.dim());
  if (pre.dim() != data_dim) throw DimensionError("data", pre.dim(), data_dim);
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct MuChoice {
  double value;
  std::string provenance;
};

MuChoice choose_mu(const std::optional<double>& manual, const std::optional<DoeblinSection>& doeblin,
                   double M, double factor) {
  if (manual) return {*manual, "manual"};
  if (doeblin) return {concentration_mu(M, DoeblinConstants{doeblin->l, doeblin->lambda}), "doeblin"};
  return {heuristic_mu(M, factor), "heuristic"};
}

}  // namespace

std::shared_ptr<const ScoreField> resolve_model(const std::string& source, const GaussianKernelSpec& kernel) {
  if (source == "closed_form") return std::make_shared<ClosedFormScore>(closed_form_score(kernel));
  return std::make_shared<NetworkScoreField>(std::make_shared<const MlpParameters>(load_model(fs::path(source))));
}

json cmd_simulate(const RunContext& ctx) {
  const auto& c = ctx.config;
  TrajectoryConfig traj;
  traj.pre = c.pre_kernel;
  if (c.trajectory.change_point) traj.post = c.post_kernel;
  traj.change_point = c.trajectory.change_point;
  traj.length = c.trajectory.length;
  traj.seed = c.seed;
  traj.burn_in = c.trajectory.burn_in;
  const auto path = simulate_path(traj);

  const fs::path file = ctx.out_dir / "trajectory.csv";
  auto out = open_output(file);
  write_trajectory_csv(out, c.pre_kernel.dim, path, traj.change_point);
  close_output(out, file);
  ctx.log << "wrote " << path.size() << " states to " << file.string() << '\n';
  return {{"outputs", {"trajectory.csv"}}, {"rows", path.size()}, {"trajectory_seed", c.seed}};
}

json cmd_train(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& t = c.training;
  const GaussianKernelSpec& kernel = t.kernel == "pre" ? c.pre_kernel : c.post_kernel;

  std::vector<TransitionPair> data;
  std::optional<std::vector<TransitionPair>> eval;
  json source;
  if (t.dataset) {
    const auto table = read_table(*t.dataset);
    if (t.segment != "all" && !table.regime) {
      throw UsageError("training.segment '" + t.segment + "' needs a regime column in " + *t.dataset);
    }
    const int want = t.segment == "post" ? 1 : 0;
    for (std::size_t n = 1; n < table.states.size(); ++n) {
      if (t.segment != "all" && ((*table.regime)[n - 1] != want || (*table.regime)[n] != want)) continue;
      data.push_back({table.states[n - 1], table.states[n]});
    }
    source = {{"dataset", *t.dataset}, {"segment", t.segment}};
  } else {
    data = stationary_pairs(kernel, t.pairs, derive_seed(c.seed, kTrainData), c.trajectory.burn_in);
    eval = stationary_pairs(kernel, t.eval_pairs, derive_seed(c.seed, kTrainEval), c.trajectory.burn_in);
    source = {{"simulated_kernel", t.kernel}, {"data_seed", derive_seed(c.seed, kTrainData)}};
  }
  if (data.empty()) throw UsageError("training dataset is empty");

  const auto dim = static_cast<std::size_t>(data.front().prev.size());
  const auto arch = MlpArchitecture::for_state_dim(dim, t.hidden_widths);
  TrainConfig tc = t.optimizer;
  tc.seed = derive_seed(c.seed, kTrainInit);

  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(arch, data, tc, [&](std::size_t epoch, double loss) {
    ctx.log << "epoch " << epoch + 1 << " loss " << loss << '\n';
  });
  const double seconds = elapsed_seconds(start);

  const fs::path model_path = ctx.out_dir / t.model_file;
  save_model(model_path, result.params);
  const fs::path loss_path = ctx.out_dir / "loss.csv";
  auto loss_out = open_output(loss_path);
  loss_out << "epoch,loss\n";
  loss_out.precision(17);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) loss_out << e + 1 << ',' << result.epoch_loss[e] << '\n';
  close_output(loss_out, loss_path);

  json manifest = {{"outputs", {t.model_file, "loss.csv"}},
                   {"source", source},
                   {"pairs", data.size()},
                   {"init_seed", tc.seed},
                   {"train_seconds", seconds},
                   {"final_loss", result.epoch_loss.back()}};
  if (eval) {
    const AccuracyReport acc = evaluate_accuracy(result.params, closed_form_score(kernel), *eval);
    ctx.log << "mse " << acc.mse << " var_scale " << acc.var_scale << " rel_error " << acc.rel_error << '\n';
    manifest["accuracy"] = {{"mse", acc.mse}, {"var_scale", acc.var_scale}, {"rel_error", acc.rel_error}};
  }
  return manifest;
}

json cmd_detect(const RunContext& ctx) {
  const auto& c = ctx.config;
  std::vector<StateVector> states;
  std::optional<std::size_t> change_point = c.trajectory.change_point;
  if (c.detector.data) {
    auto table = read_table(*c.detector.data);
    if (!change_point) change_point = first_post_row(table);
    states = std::move(table.states);
  } else {
    TrajectoryConfig traj;
    traj.pre = c.pre_kernel;
    traj.post = c.post_kernel;
    traj.change_point = change_point;
    traj.length = c.trajectory.length;
    traj.seed = c.seed;
    traj.burn_in = c.trajectory.burn_in;
    states = simulate_path(traj);
  }
  if (states.size() < 2) throw UsageError("detection needs at least two states");

  const auto pre = resolve_model(c.models.pre, c.pre_kernel);
  const auto post = resolve_model(c.models.post, c.post_kernel);
  check_dims(*pre, *post, static_cast<std::size_t>(states.front().size()));

  const auto pairs = make_pairs(states);
  const auto increments = score_differences(*pre, *post, pairs);
  DetectorConfig dc;
  dc.threshold = c.detector.threshold;
  dc.truncation = truncation_of(c.detector.truncation);
  const auto trace = trace_detector(increments, dc);

  const fs::path trace_path = ctx.out_dir / "trace.csv";
  auto trace_out = open_output(trace_path);
  write_trace_csv(trace_out, trace);
  close_output(trace_out, trace_path);

  // Transition n = (X_{n-1}, X_n) is post-change once n >= change point.
  std::vector<std::size_t> alarms;
  for (const auto& row : trace) {
    if (row.alarm) alarms.push_back(row.n);
  }
  json summary = {{"threshold", dc.threshold},
                  {"truncation", c.detector.truncation ? json(*c.detector.truncation) : json(nullptr)},
                  {"steps", trace.size()},
                  {"change_point", optional_json(change_point)},
                  {"alarms", alarms}};
  std::optional<std::size_t> detection;
  std::size_t false_alarms = 0;
  for (auto n : alarms) {
    if (change_point && n >= *change_point) {
      if (!detection) detection = n;
    } else {
      ++false_alarms;
    }
  }
  summary["false_alarms_before_change"] = false_alarms;
  summary["first_alarm_after_change"] = optional_json(detection);
  summary["delay"] = detection ? json(*detection - *change_point) : json(nullptr);

  const fs::path summary_path = ctx.out_dir / "summary.json";
  auto summary_out = open_output(summary_path);
  summary_out << summary.dump(2) << '\n';
  close_output(summary_out, summary_path);

  ctx.log << "alarms " << alarms.size();
  if (detection) ctx.log << ", detection at n = " << *detection << " (delay " << *detection - *change_point << ")";
  ctx.log << '\n';
  return {{"outputs", {"trace.csv", "summary.json"}}, {"summary", summary}};
}

json cmd_sweep(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& w = c.sweep;
  if (w.thresholds.empty()) throw UsageError("sweep.thresholds must not be empty");
  const auto pre = resolve_model(c.models.pre, c.pre_kernel);
  const auto post = resolve_model(c.models.post, c.post_kernel);
  check_dims(*pre, *post, c.pre_kernel.dim);

  const auto pre_pairs = stationary_pairs(c.pre_kernel, w.false_alarm_length, derive_seed(c.seed, kSweepPre),
                                          c.trajectory.burn_in);
  TrajectoryConfig post_traj;
  post_traj.pre = c.pre_kernel;
  post_traj.post = c.post_kernel;
  post_traj.change_point = 1;
  post_traj.length = w.delay_length + 1;
  post_traj.seed = derive_seed(c.seed, kSweepPost);
  post_traj.burn_in = c.trajectory.burn_in;
  const auto post_pairs = make_pairs(simulate_path(post_traj));
  const auto s_pre = score_differences(*pre, *post, pre_pairs);
  const auto s_post = score_differences(*pre, *post, post_pairs);

  DetectorConfig truncated;
  truncated.truncation = TruncationSpec::at(w.truncation);
  const DetectorConfig plain;

  std::vector<std::string> outputs;
  auto write_rows = [&](const std::string& name, const std::vector<SweepRow>& rows) {
    const fs::path path = ctx.out_dir / name;
    auto out = open_output(path);
    write_sweep_csv(out, rows);
    close_output(out, path);
    outputs.push_back(name);
  };
  const auto fa_trunc = threshold_sweep(s_pre, w.thresholds, truncated);
  const auto fa_plain = threshold_sweep(s_pre, w.thresholds, plain);
  const auto dl_trunc = threshold_sweep(s_post, w.thresholds, truncated);
  const auto dl_plain = threshold_sweep(s_post, w.thresholds, plain);
  write_rows("sweep_false_alarm_truncated.csv", fa_trunc);
  write_rows("sweep_false_alarm_untruncated.csv", fa_plain);
  write_rows("sweep_delay_truncated.csv", dl_trunc);
  write_rows("sweep_delay_untruncated.csv", dl_plain);

  std::vector<double> clipped_pre;
  std::vector<double> clipped_post;
  for (double s : s_pre) clipped_pre.push_back(truncate(truncated.truncation, s));
  for (double s : s_post) clipped_post.push_back(truncate(truncated.truncation, s));
  const double delta = w.delta ? *w.delta : -summarize(clipped_pre).mean;
  const double I = w.I ? *w.I : summarize(clipped_post).mean;
  const MuChoice mu = choose_mu(w.mu, w.doeblin, w.truncation, w.mu_factor);

  json skipped = json::array();
  {
    const fs::path path = ctx.out_dir / "bound_false_alarm.csv";
    auto out = open_output(path);
    out << "b,bound\n";
    out.precision(17);
    for (double b : w.thresholds) {
      if (b > mu.value && delta > 0.0) {
        out << b << ',' << false_alarm_lower_bound({delta, mu.value, b, I, w.truncation}) << '\n';
      } else {
        skipped.push_back(b);
      }
    }
    close_output(out, path);
    outputs.push_back("bound_false_alarm.csv");
  }
  if (I > 0.0) {
    const fs::path path = ctx.out_dir / "bound_delay.csv";
    auto out = open_output(path);
    out << "b,bound\n";
    out.precision(17);
    for (double b : w.thresholds) out << b << ',' << delay_upper_bound({delta, mu.value, b, I, w.truncation}).bound << '\n';
    close_output(out, path);
    outputs.push_back("bound_delay.csv");
  } else {
    ctx.log << "post-change drift I = " << I << " is not positive; delay bound skipped\n";
  }

  ctx.log << "delta " << delta << " I " << I << " mu " << mu.value << " (" << mu.provenance << ")\n";
  return {{"outputs", outputs},
          {"delta", {{"value", delta}, {"provenance", w.delta ? "manual" : "estimated"}}},
          {"I", {{"value", I}, {"provenance", w.I ? "manual" : "estimated"}}},
          {"mu", {{"value", mu.value}, {"provenance", mu.provenance}}},
          {"delay_bound_label", "asymptotic leading term 1 + n0"},
          {"false_alarm_bound_skipped_thresholds", skipped},
          {"pre_stream_seed", derive_seed(c.seed, kSweepPre)},
          {"post_stream_seed", derive_seed(c.seed, kSweepPost)}};
}

json cmd_bounds(const RunContext& ctx) {
  const auto& b = ctx.config.bounds;
  json result;
  std::optional<MuChoice> mu;
  if (b.mu) {
    mu = MuChoice{*b.mu, "manual"};
  } else if (b.M) {
    mu = choose_mu(std::nullopt, b.doeblin, *b.M, b.mu_factor);
  }
  if (!mu) throw UsageError("bounds need either mu or the truncation level M");
  ctx.log << "mu " << mu->value << " (" << mu->provenance << ")\n";
  result["mu"] = {{"value", mu->value}, {"provenance", mu->provenance}};

  bool any = false;
  if (b.delta && b.b) {
    const double lb = false_alarm_lower_bound({*b.delta, mu->value, *b.b, 0.0, b.M.value_or(0.0)});
    ctx.log << "false_alarm_lower_bound " << lb << '\n';
    result["false_alarm_lower_bound"] = lb;
    any = true;
  }
  if (b.b && b.I) {
    const DelayBound d = delay_upper_bound({0.0, mu->value, *b.b, *b.I, 0.0});
    ctx.log << "n0 " << d.n0 << " delay_bound " << d.bound << " (asymptotic)\n";
    result["n0"] = d.n0;
    result["delay_bound"] = {{"value", d.bound}, {"label", "asymptotic"}};
    any = true;
  }
  if (!any) throw UsageError("bounds need b with delta (false-alarm bound) and/or I (delay bound)");

  const fs::path path = ctx.out_dir / "bounds.json";
  auto out = open_output(path);
  out << result.dump(2) << '\n';
  close_output(out, path);
  result["outputs"] = {"bounds.json"};
  return result;
}

json cmd_mocap(const RunContext& ctx) {
  const auto& s = ctx.config.scenario;
  if (!s.pre_clip) throw UsageError("scenario.pre_clip is required");
  mocap::ScenarioSpec spec;
  spec.pre_clip = mocap::parse_amc_file(*s.pre_clip);
  if (s.post_clip) spec.post_clip = mocap::parse_amc_file(*s.post_clip);
  spec.stride = s.stride;
  spec.standardize = s.standardize;
  spec.post_length = s.post_length;
  spec.splice_index = s.splice_index ? *s.splice_index : mocap::clip_to_vectors(spec.pre_clip, s.stride).size();
  const mocap::Scenario scenario = mocap::build_scenario(spec);

  const std::size_t dim = static_cast<std::size_t>(scenario.states.front().size());
  const fs::path frames_path = ctx.out_dir / "frames.csv";
  auto out = open_output(frames_path);
  write_trajectory_csv(out, dim, scenario.states, scenario.change_index);
  close_output(out, frames_path);

  json manifest = {{"outputs", {"frames.csv"}},
                   {"dimension", dim},
                   {"states", scenario.states.size()},
                   {"pairs", scenario.pairs.size()},
                   {"change_index", optional_json(scenario.change_index)}};
  if (scenario.standardization) {
    manifest["standardization"] = {
        {"mean", std::vector<double>(scenario.standardization->mean.begin(), scenario.standardization->mean.end())},
        {"scale", std::vector<double>(scenario.standardization->scale.begin(), scenario.standardization->scale.end())}};
  }
  ctx.log << "dimension " << dim << ", " << scenario.states.size() << " states";
  if (scenario.change_index) ctx.log << ", change at index " << *scenario.change_index;
  ctx.log << '\n';
  return manifest;
}

}  // namespace scusum::cli

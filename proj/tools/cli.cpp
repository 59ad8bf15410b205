#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <ostream>

#include "commands.hpp"
#include "scusum/error.hpp"

namespace scusum::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  // train
  std::optional<std::string> dataset;
  // detect
  std::optional<double> threshold;
  std::optional<std::string> data;
  // bounds
  std::optional<double> delta, mu, b, I, M;
  // mocap
  std::optional<std::string> pre_clip, post_clip;
  std::optional<std::size_t> splice, stride;
};

void apply(const Overrides& o, ExperimentConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (o.dataset) c.training.dataset = *o.dataset;
  if (o.threshold) c.detector.threshold = *o.threshold;
  if (o.data) c.detector.data = *o.data;
  if (o.delta) c.bounds.delta = *o.delta;
  if (o.mu) c.bounds.mu = *o.mu;
  if (o.b) c.bounds.b = *o.b;
  if (o.I) c.bounds.I = *o.I;
  if (o.M) c.bounds.M = *o.M;
  if (o.pre_clip) c.scenario.pre_clip = *o.pre_clip;
  if (o.post_clip) c.scenario.post_clip = *o.post_clip;
  if (o.splice) c.scenario.splice_index = *o.splice;
  if (o.stride) c.scenario.stride = *o.stride;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

int run_command(const std::string& name, const Overrides& o, std::ostream& out) {
  ExperimentConfig config = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  apply(o, config);
  const fs::path dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  const json resolved = config_to_json(config);
  write_json(dir / "config.json", resolved);

  const auto saved_precision = out.precision(12);
  const RunContext ctx{config, dir, out};
  json result;
  if (name == "simulate") {
    result = cmd_simulate(ctx);
  } else if (name == "train") {
    result = cmd_train(ctx);
  } else if (name == "detect") {
    result = cmd_detect(ctx);
  } else if (name == "sweep") {
    result = cmd_sweep(ctx);
  } else if (name == "bounds") {
    result = cmd_bounds(ctx);
  } else {
    result = cmd_mocap(ctx);
  }
  write_json(dir / "manifest.json", {{"command", name}, {"seed", config.seed}, {"config", resolved}, {"result", result}});
  out.precision(saved_precision);
  return kSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score-based CUSUM change detection for Markov processes"};
  app.require_subcommand(1);
  Overrides o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out_dir, "output directory (overrides out_dir)");
    sub->add_option("--seed", o.seed, "master seed (overrides seed)");
    return sub;
  };
  common(app.add_subcommand("simulate", "simulate a trajectory of the Gaussian kernel"));
  auto* train = common(app.add_subcommand("train", "fit a score network by score matching"));
  train->add_option("--dataset", o.dataset, "trajectory CSV to train on");
  auto* detect = common(app.add_subcommand("detect", "run the CUSUM detector over a trajectory"));
  detect->add_option("--threshold", o.threshold, "alarm threshold b");
  detect->add_option("--data", o.data, "trajectory CSV (simulated when absent)");
  common(app.add_subcommand("sweep", "run-length sweep over thresholds with bound curves"));
  auto* bounds = common(app.add_subcommand("bounds", "evaluate the false-alarm and delay bounds"));
  bounds->add_option("--delta", o.delta, "pre-change drift magnitude");
  bounds->add_option("--mu", o.mu, "concentration scale");
  bounds->add_option("--b", o.b, "threshold");
  bounds->add_option("--I", o.I, "post-change drift");
  bounds->add_option("--M", o.M, "truncation level");
  auto* mocap = common(app.add_subcommand("mocap", "build a change scenario from two AMC clips"));
  mocap->add_option("--pre-clip", o.pre_clip, "AMC clip before the change");
  mocap->add_option("--post-clip", o.post_clip, "AMC clip after the change");
  mocap->add_option("--splice", o.splice, "frames kept from the pre clip");
  mocap->add_option("--stride", o.stride, "keep every stride-th frame");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run_command(name, o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace scusum::cli

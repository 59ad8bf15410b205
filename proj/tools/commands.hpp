#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "scusum/core.hpp"

namespace scusum::cli {

/// Seed streams derived from the config's master seed. The simulate and
/// detect commands use the master seed itself for the trajectory.
enum SeedStream : std::uint64_t {
  kTrainData = 10,
  kTrainEval = 11,
  kTrainInit = 12,
  kSweepPre = 20,
  kSweepPost = 21,
};

struct RunContext {
  ExperimentConfig config;
  std::filesystem::path out_dir;
  std::ostream& log;
};

// Each command writes its artifacts under out_dir and returns the
// command-specific part of the manifest.
nlohmann::json cmd_simulate(const RunContext& ctx);
nlohmann::json cmd_train(const RunContext& ctx);
nlohmann::json cmd_detect(const RunContext& ctx);
nlohmann::json cmd_sweep(const RunContext& ctx);
nlohmann::json cmd_bounds(const RunContext& ctx);
nlohmann::json cmd_mocap(const RunContext& ctx);

/// "closed_form" selects the kernel's analytic score; anything else is a model file.
std::shared_ptr<const ScoreField> resolve_model(const std::string& source, const GaussianKernelSpec& kernel);

}  // namespace scusum::cli

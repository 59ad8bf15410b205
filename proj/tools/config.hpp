#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scusum/scorenet.hpp"
#include "scusum/simulate.hpp"

namespace scusum::cli {

struct TrajectorySection {
  std::size_t length = 1000;
  std::optional<std::size_t> change_point;
  std::size_t burn_in = 1000;
};

struct TrainingSection {
  /// Trajectory CSV; simulated stationary pairs from `kernel` when unset.
  std::optional<std::string> dataset;
  /// Pairs kept from a CSV dataset: "all", "pre" or "post" (by regime column).
  std::string segment = "all";
  std::string kernel = "pre";
  std::size_t pairs = 50000;
  std::size_t eval_pairs = 10000;
  std::vector<std::size_t> hidden_widths{128, 128, 128};
  TrainConfig optimizer;
  std::string model_file = "model.bin";
};

struct ModelsSection {
  /// "closed_form" or a model file path.
  std::string pre = "closed_form";
  std::string post = "closed_form";
};

struct DetectorSection {
  double threshold = 1.5e5;
  std::optional<double> truncation = 600.0;
  /// Trajectory CSV; simulated from the trajectory section when unset.
  std::optional<std::string> data;
};

struct DoeblinSection {
  std::size_t l = 1;
  double lambda = 1.0;
};

struct SweepSection {
  std::vector<double> thresholds{1300, 1600, 1900, 2200, 2500};
  std::size_t false_alarm_length = 100000;
  std::size_t delay_length = 10000;
  double truncation = 600.0;
  std::optional<double> delta;
  std::optional<double> I;
  std::optional<double> mu;
  double mu_factor = 2.05;
  std::optional<DoeblinSection> doeblin;
};

struct BoundsSection {
  std::optional<double> delta;
  std::optional<double> mu;
  std::optional<double> b;
  std::optional<double> I;
  std::optional<double> M;
  double mu_factor = 2.05;
  std::optional<DoeblinSection> doeblin;
};

struct ScenarioSection {
  std::optional<std::string> pre_clip;
  std::optional<std::string> post_clip;
  std::optional<std::size_t> splice_index;
  std::size_t stride = 1;
  bool standardize = true;
  std::optional<std::size_t> post_length;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  GaussianKernelSpec pre_kernel{10, 0.3, 0.3, 0.2};
  GaussianKernelSpec post_kernel{10, 0.6, 0.5, 0.9};
  TrajectorySection trajectory;
  TrainingSection training;
  ModelsSection models;
  DetectorSection detector;
  SweepSection sweep;
  BoundsSection bounds;
  ScenarioSection scenario;
  std::string out_dir = "out";
};

/// Overlays `doc` onto the defaults. Unknown keys and wrong types raise UsageError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
/// Fully resolved document, defaults included; unset optionals are null.
nlohmann::json config_to_json(const ExperimentConfig& config);

ExperimentConfig load_config(const std::string& path);

}  // namespace scusum::cli

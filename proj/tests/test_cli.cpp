#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "config.hpp"
#include "scusum/error.hpp"
#include "scusum/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scusum;
using namespace scusum::cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("scusum_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "scusum");
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_config(const std::string& name, const json& doc) const {
    std::ofstream(path(name)) << doc.dump();
    return path(name);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static json read_json(const fs::path& p) { return json::parse(slurp(p)); }

  static std::string fixture(const std::string& name) {
    return (fs::path(SCUSUM_TEST_DATA_DIR) / name).string();
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

}  // namespace

TEST(Config, DefaultsRoundTripThroughJson) {
  const ExperimentConfig c = config_from_json(json::object());
  const json doc = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(doc)), doc);
  EXPECT_EQ(doc["pre_kernel"]["sigma"], 0.3);
  EXPECT_EQ(doc["training"]["batch_size"], 128);
  EXPECT_EQ(doc["training"]["learning_rate"], 1e-3);
  EXPECT_TRUE(doc["trajectory"]["change_point"].is_null());
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(config_from_json(json{{"sede", 1}}), UsageError);
  EXPECT_THROW(config_from_json(json{{"training", {{"epoch", 3}}}}), UsageError);
  EXPECT_THROW(config_from_json(json{{"sweep", {{"doeblin", {{"l", 1}, {"lamda", 1}}}}}}), UsageError);
  EXPECT_THROW(config_from_json(json{{"seed", -1}}), UsageError);
  EXPECT_THROW(config_from_json(json{{"seed", "1"}}), UsageError);
  EXPECT_THROW(config_from_json(json{{"training", {{"optimizer", "rmsprop"}}}}), UsageError);
  EXPECT_THROW(config_from_json(json::array()), UsageError);
  const auto c = config_from_json(json{{"trajectory", {{"change_point", 120}}}, {"detector", {{"truncation", nullptr}}}});
  EXPECT_EQ(c.trajectory.change_point, std::optional<std::size_t>(120));
  EXPECT_FALSE(c.detector.truncation.has_value());
}

TEST_F(CliTest, SimulateIsDeterministicAndFlagsRegime) {
  const auto cfg = write_config("c.json", {{"trajectory", {{"length", 200}, {"change_point", 120}}}});
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", path("a")}), 0) << err_.str();
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", path("b")}), 0);
  const std::string a = slurp(dir_ / "a" / "trajectory.csv");
  EXPECT_EQ(a, slurp(dir_ / "b" / "trajectory.csv"));

  std::istringstream in(a);
  const auto table = read_trajectory_csv(in);
  ASSERT_EQ(table.states.size(), 200u);
  ASSERT_TRUE(table.regime);
  for (std::size_t n = 0; n < 200; ++n) EXPECT_EQ((*table.regime)[n], n < 120 ? 0 : 1);

  const json manifest = read_json(dir_ / "a" / "manifest.json");
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_EQ(manifest["config"]["trajectory"]["change_point"], 120);
  EXPECT_EQ(read_json(dir_ / "a" / "config.json"), manifest["config"]);

  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", path("c"), "--seed", "9"}), 0);
  EXPECT_NE(slurp(dir_ / "c" / "trajectory.csv"), a);
  EXPECT_EQ(read_json(dir_ / "c" / "config.json")["seed"], 9);
}

TEST_F(CliTest, SimulateLengthZeroWritesHeaderOnly) {
  const auto cfg = write_config("c.json", {{"trajectory", {{"length", 0}}}, {"pre_kernel", {{"dim", 2}}}});
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", path("o")}), 0) << err_.str();
  EXPECT_EQ(slurp(dir_ / "o" / "trajectory.csv"), "x0,x1\n");
}

TEST_F(CliTest, TrainIsReproducibleAndReportsAccuracy) {
  const json doc = {{"pre_kernel", {{"dim", 2}, {"alpha", 0.5}, {"sigma", 0.5}, {"shift", 0.0}}},
                    {"trajectory", {{"burn_in", 100}}},
                    {"training", {{"pairs", 2000}, {"eval_pairs", 500}, {"epochs", 3}, {"hidden_widths", {16}}}}};
  const auto cfg = write_config("c.json", doc);
  ASSERT_EQ(run({"train", "--config", cfg, "--out", path("a")}), 0) << err_.str();
  EXPECT_NE(out_.str().find("rel_error"), std::string::npos);
  ASSERT_EQ(run({"train", "--config", cfg, "--out", path("b")}), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "model.bin"), slurp(dir_ / "b" / "model.bin"));
  const json m = read_json(dir_ / "a" / "manifest.json");
  EXPECT_TRUE(m["result"]["accuracy"]["rel_error"].is_number());
  EXPECT_EQ(slurp(dir_ / "a" / "loss.csv").substr(0, 11), "epoch,loss\n");
}

TEST_F(CliTest, TrainOnCsvSegment) {
  const auto sim = write_config("s.json", {{"pre_kernel", {{"dim", 2}}},
                                           {"post_kernel", {{"dim", 2}}},
                                           {"trajectory", {{"length", 600}, {"change_point", 300}}}});
  ASSERT_EQ(run({"simulate", "--config", sim, "--out", path("s")}), 0);
  const auto cfg = write_config("t.json", {{"training", {{"segment", "post"}, {"epochs", 1}, {"batch_size", 32}, {"hidden_widths", {8}}}}});
  ASSERT_EQ(run({"train", "--config", cfg, "--dataset", path("s/trajectory.csv"), "--out", path("t")}), 0) << err_.str();
  EXPECT_EQ(read_json(dir_ / "t" / "manifest.json")["result"]["pairs"], 299);
}

TEST_F(CliTest, TrainMissingDatasetIsIoError) {
  EXPECT_EQ(run({"train", "--dataset", path("missing.csv"), "--out", path("o")}), kIo);
  EXPECT_NE(err_.str().find("missing.csv"), std::string::npos);
}

TEST_F(CliTest, DetectReportsDelayAfterChange) {
  const auto cfg = write_config("c.json", {{"trajectory", {{"length", 400}, {"change_point", 120}}},
                                           {"detector", {{"threshold", 3000.0}}}});
  ASSERT_EQ(run({"detect", "--config", cfg, "--out", path("o")}), 0) << err_.str();
  const json s = read_json(dir_ / "o" / "summary.json");
  EXPECT_EQ(s["false_alarms_before_change"], 0);
  ASSERT_TRUE(s["first_alarm_after_change"].is_number());
  EXPECT_EQ(s["delay"].get<long>(), s["first_alarm_after_change"].get<long>() - 120);
  EXPECT_GT(s["first_alarm_after_change"].get<long>(), 120);
  EXPECT_EQ(slurp(dir_ / "o" / "trace.csv").substr(0, 24), "n,score_diff,cusum_stat\n");
}

TEST_F(CliTest, DetectWithIdenticalModelsNeverAlarms) {
  const auto cfg = write_config("c.json", {{"trajectory", {{"length", 500}, {"change_point", 100}}},
                                           {"post_kernel", {{"alpha", 0.3}, {"sigma", 0.3}, {"shift", 0.2}}},
                                           {"detector", {{"threshold", 1e-6}}}});
  ASSERT_EQ(run({"detect", "--config", cfg, "--out", path("o")}), 0) << err_.str();
  EXPECT_TRUE(read_json(dir_ / "o" / "summary.json")["alarms"].empty());
}

TEST_F(CliTest, DetectDimensionMismatchIsUsageError) {
  const auto sim = write_config("s.json", {{"pre_kernel", {{"dim", 3}}}, {"trajectory", {{"length", 10}}}});
  ASSERT_EQ(run({"simulate", "--config", sim, "--out", path("s")}), 0);
  EXPECT_EQ(run({"detect", "--data", path("s/trajectory.csv"), "--out", path("o")}), kUsage);
}

TEST_F(CliTest, SweepWritesRunLengthsAndBounds) {
  const auto cfg = write_config("c.json", {{"sweep", {{"thresholds", {1300.0, 1800.0}},
                                                      {"false_alarm_length", 2000},
                                                      {"delay_length", 1000}}}});
  ASSERT_EQ(run({"sweep", "--config", cfg, "--out", path("o")}), 0) << err_.str();
  for (const char* f : {"sweep_false_alarm_truncated.csv", "sweep_false_alarm_untruncated.csv",
                        "sweep_delay_truncated.csv", "sweep_delay_untruncated.csv"}) {
    EXPECT_EQ(slurp(dir_ / "o" / f).substr(0, 32), "threshold,mean_run_length,count\n") << f;
  }
  const std::string fa = slurp(dir_ / "o" / "bound_false_alarm.csv");
  EXPECT_EQ(fa.substr(0, 8), "b,bound\n");
  EXPECT_EQ(std::count(fa.begin(), fa.end(), '\n'), 3);
  const json m = read_json(dir_ / "o" / "manifest.json")["result"];
  EXPECT_EQ(m["mu"]["value"], 1230.0);
  EXPECT_EQ(m["mu"]["provenance"], "heuristic");
  EXPECT_EQ(m["delta"]["provenance"], "estimated");
  EXPECT_GT(m["delta"]["value"].get<double>(), 0.0);
  EXPECT_GT(m["I"]["value"].get<double>(), 0.0);
}

TEST_F(CliTest, SweepSingleThresholdGivesOneRow) {
  const auto cfg = write_config("c.json", {{"sweep", {{"thresholds", {50.0}}, {"false_alarm_length", 500}, {"delay_length", 200}}}});
  ASSERT_EQ(run({"sweep", "--config", cfg, "--out", path("o")}), 0) << err_.str();
  const std::string rows = slurp(dir_ / "o" / "sweep_delay_truncated.csv");
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 2);
  EXPECT_EQ(read_json(dir_ / "o" / "manifest.json")["result"]["false_alarm_bound_skipped_thresholds"], json({50.0}));
}

TEST_F(CliTest, BoundsValuesAndDomainError) {
  ASSERT_EQ(run({"bounds", "--delta", "1", "--mu", "2", "--b", "4", "--out", path("a")}), 0) << err_.str();
  EXPECT_NE(out_.str().find("6.96646889883"), std::string::npos) << out_.str();
  ASSERT_EQ(run({"bounds", "--b", "100", "--mu", "10", "--I", "5", "--out", path("b")}), 0);
  EXPECT_EQ(read_json(dir_ / "b" / "bounds.json")["n0"], 22);
  EXPECT_EQ(run({"bounds", "--delta", "1", "--mu", "10", "--b", "4", "--out", path("c")}), kUsage);
  EXPECT_NE(err_.str().find("b > μ"), std::string::npos);
  ASSERT_EQ(run({"bounds", "--M", "600", "--b", "3000", "--I", "90", "--out", path("d")}), 0);
  EXPECT_EQ(read_json(dir_ / "d" / "bounds.json")["mu"]["value"], 1230.0);
  EXPECT_EQ(run({"bounds", "--b", "100", "--I", "-1", "--mu", "2", "--out", path("e")}), kUsage);
}

TEST_F(CliTest, MocapFixturesAndStride) {
  ASSERT_EQ(run({"mocap", "--pre-clip", fixture("walk.amc"), "--post-clip", fixture("jump.amc"), "--splice", "30",
                 "--out", path("a")}),
            0)
      << err_.str();
  json m = read_json(dir_ / "a" / "manifest.json")["result"];
  EXPECT_EQ(m["dimension"], 9);
  EXPECT_EQ(m["states"], 70);
  EXPECT_EQ(m["change_index"], 30);

  ASSERT_EQ(run({"mocap", "--pre-clip", fixture("walk.amc"), "--stride", "2", "--out", path("b")}), 0);
  m = read_json(dir_ / "b" / "manifest.json")["result"];
  EXPECT_EQ(m["states"], 20);
  EXPECT_TRUE(m["change_index"].is_null());

  EXPECT_EQ(run({"mocap", "--pre-clip", fixture("walk.amc"), "--post-clip", fixture("minimal.amc"), "--splice", "5",
                 "--out", path("c")}),
            0);
}

TEST_F(CliTest, MocapErrorsMapToExitCodes) {
  EXPECT_EQ(run({"mocap", "--pre-clip", fixture("gap.amc"), "--out", path("a")}), kParse);
  EXPECT_NE(err_.str().find("line 6"), std::string::npos);
  EXPECT_EQ(run({"mocap", "--pre-clip", fixture("non_numeric.amc"), "--out", path("b")}), kParse);
  EXPECT_EQ(run({"mocap", "--pre-clip", path("none.amc"), "--out", path("c")}), kIo);
  EXPECT_EQ(run({"mocap", "--out", path("d")}), kUsage);
}

TEST_F(CliTest, ConfigErrorsMapToExitCodes) {
  EXPECT_EQ(run({"simulate", "--config", write_config("u.json", {{"unknown", 1}}), "--out", path("a")}), kUsage);
  std::ofstream(path("bad.json")) << "{not json";
  EXPECT_EQ(run({"simulate", "--config", path("bad.json"), "--out", path("b")}), kParse);
  EXPECT_EQ(run({"simulate", "--config", path("absent.json")}), kUsage);
  EXPECT_EQ(run({}), kUsage);
  EXPECT_EQ(run({"frobnicate"}), kUsage);
  EXPECT_EQ(run({"simulate", "--help"}), kSuccess);
}

#include "commands.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "looptrack/io.hpp"

namespace looptrack::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// File content minus the metadata, which names the output directory.
std::string data_of(const fs::path& p) {
  if (p.extension() == ".json") {
    json j = read_json(p);
    j.erase("meta");
    return j.dump();
  }
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) != 0) out += line + "\n";
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("looptrack_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int call(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }
  // Global flags first, then the subcommand and its options.
  int in_dir(const fs::path& dir, std::vector<std::string> args) {
    args.insert(args.begin(), {"--output", dir.string()});
    return call(std::move(args));
  }
  int simulate(const fs::path& dir, const std::string& family, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"--seed", "5", "simulate", "--family", family};
    args.insert(args.end(), extra.begin(), extra.end());
    return in_dir(dir, args);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(call({}), kExitUsage);
  EXPECT_EQ(call({"fly"}), kExitUsage);
  EXPECT_EQ(call({"simulate"}), kExitUsage);
  EXPECT_EQ(call({"simulate", "--family", "spiral"}), kExitUsage);
  EXPECT_EQ(call({"--format", "xml", "simulate", "--family", "astroid"}), kExitUsage);
  EXPECT_EQ(simulate(dir_, "astroid", {"--b", "1"}), kExitUsage);
  EXPECT_EQ(simulate(dir_, "limacon"), kExitUsage);
  EXPECT_EQ(simulate(dir_, "astroid", {"--speed", "-1"}), kExitUsage);
}

TEST_F(CliTest, HelpAndVersion) {
  EXPECT_EQ(call({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("simulate"), std::string::npos);
  EXPECT_EQ(call({"--version"}), kExitOk);
  EXPECT_NE(out_.str().find(kToolVersion), std::string::npos);
}

TEST_F(CliTest, MissingInputIsDataError) {
  EXPECT_EQ(in_dir(dir_, {"track", "--input", (dir_ / "nope.csv").string()}), kExitData);
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, NonLoopIsDataError) {
  std::ofstream(dir_ / "line.csv") << "t,x,y\n0,0,0\n1,1,0\n2,2,0\n3,3,0\n4,4,0\n5,5,0\n6,6,0\n7,7,0\n8,8,0\n";
  EXPECT_EQ(in_dir(dir_, {"fit", "--input", (dir_ / "line.csv").string(), "--family", "astroid"}), kExitData);
}

TEST_F(CliTest, SimulateIsReproducible) {
  ASSERT_EQ(simulate(dir_ / "a", "astroid", {"--noise", "0.01"}), kExitOk) << err_.str();
  ASSERT_EQ(simulate(dir_ / "b", "astroid", {"--noise", "0.01"}), kExitOk);
  EXPECT_EQ(data_of(dir_ / "a" / "trajectory.csv"), data_of(dir_ / "b" / "trajectory.csv"));
  EXPECT_EQ(data_of(dir_ / "a" / "trajectory.truth.json"), data_of(dir_ / "b" / "trajectory.truth.json"));

  ASSERT_EQ(in_dir(dir_ / "c", {"--seed", "6", "simulate", "--family", "astroid", "--noise", "0.01"}), kExitOk);
  EXPECT_NE(data_of(dir_ / "a" / "trajectory.csv"), data_of(dir_ / "c" / "trajectory.csv"));
}

TEST_F(CliTest, OutputsEmbedVersionConfigAndSeeds) {
  ASSERT_EQ(simulate(dir_, "deltoid", {"--a", "2"}), kExitOk);
  const json side = read_json(dir_ / "trajectory.truth.json");
  EXPECT_EQ(side.at("meta").at("version"), kToolVersion);
  EXPECT_EQ(side.at("meta").at("config").at("seed"), 5);
  EXPECT_EQ(side.at("meta").at("config").at("simulate").at("a"), 2.0);
  EXPECT_TRUE(side.at("meta").contains("seeds"));
  EXPECT_NE(slurp(dir_ / "trajectory.csv").find("# meta "), std::string::npos);
}

TEST_F(CliTest, ConfigFileReproducesRun) {
  ASSERT_EQ(simulate(dir_ / "a", "limacon", {"--b", "0.7", "--noise", "0.02"}), kExitOk);
  ASSERT_EQ(call({"--config", (dir_ / "a" / "trajectory.truth.json").string(), "--output", (dir_ / "b").string(),
                  "simulate"}),
            kExitOk)
      << err_.str();
  EXPECT_EQ(data_of(dir_ / "a" / "trajectory.csv"), data_of(dir_ / "b" / "trajectory.csv"));
}

TEST_F(CliTest, JsonFormatWritesJsonTables) {
  ASSERT_EQ(in_dir(dir_, {"--format", "json", "simulate", "--family", "squircle"}), kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "trajectory.json"));
  const auto tr = read_trajectory(dir_ / "trajectory.json");
  EXPECT_GT(tr.samples.size(), 10u);
}

TEST_F(CliTest, TrackPredictAndFit) {
  ASSERT_EQ(simulate(dir_, "circle_ellipse", {"--a", "5", "--b", "5", "--speed", "2", "--noise", "0.1", "--loops", "2"}),
            kExitOk);
  const auto input = (dir_ / "trajectory.csv").string();
  ASSERT_EQ(in_dir(dir_, {"track", "--input", input}), kExitOk) << err_.str();
  const json summary = read_json(dir_ / "track.summary.json");
  EXPECT_LT(summary.at("filtered_rmse").get<double>(), summary.at("raw_rmse").get<double>());

  ASSERT_EQ(in_dir(dir_, {"predict", "--input", (dir_ / "track.csv").string(), "--steps", "5"}), kExitOk)
      << err_.str();
  EXPECT_EQ(read_table(dir_ / "prediction.csv").rows.size(), 5u);

  ASSERT_EQ(in_dir(dir_, {"fit", "--input", input, "--family", "circle_ellipse"}), kExitOk) << err_.str();
  const json fit = read_json(dir_ / "fit.json");
  EXPECT_NEAR(fit.at("fit").at("model").at("a").get<double>(), 5.0, 0.1);
}

TEST_F(CliTest, TrainClassifyPipelineEvaluate) {
  ASSERT_EQ(in_dir(dir_, {"--seed", "3", "train", "--per-class", "20", "--epochs", "2", "--hidden", "16",
                          "--resample", "16", "--lr", "0.003"}),
            kExitOk)
      << err_.str();
  const auto model = (dir_ / "model.json").string();
  const auto again = dir_ / "again";
  ASSERT_EQ(in_dir(again, {"--seed", "3", "train", "--per-class", "20", "--epochs", "2", "--hidden", "16",
                           "--resample", "16", "--lr", "0.003"}),
            kExitOk);
  EXPECT_EQ(data_of(model), data_of(again / "model.json"));

  ASSERT_EQ(simulate(dir_, "nephroid", {"--normal", "0.1", "0.2", "1"}), kExitOk);
  const auto input = (dir_ / "trajectory.csv").string();
  ASSERT_EQ(in_dir(dir_, {"classify", "--model", model, "--input", input}), kExitOk) << err_.str();
  EXPECT_TRUE(read_json(dir_ / "classification.json").contains("probabilities"));

  // a weak model forces the residual fallback, which is exact on noiseless data
  ASSERT_EQ(in_dir(dir_, {"pipeline", "--model", model, "--input", input, "--min-confidence", "1"}), kExitOk)
      << err_.str();
  const json report = read_json(dir_ / "pipeline.report.json");
  EXPECT_EQ(report.at("family"), "nephroid");
  EXPECT_TRUE(fs::exists(dir_ / "pipeline.predicted.csv"));

  ASSERT_EQ(in_dir(dir_, {"evaluate", "--report", (dir_ / "pipeline.report.json").string(), "--input", input}),
            kExitOk)
      << err_.str();
  const json metrics = read_json(dir_ / "evaluation.json").at("metrics");
  EXPECT_TRUE(metrics.at("family_correct").get<bool>());
  EXPECT_LT(metrics.at("mean_track_distance").get<double>(), 1e-4);
}

TEST_F(CliTest, CorruptModelIsDataError) {
  std::ofstream(dir_ / "bad.json") << "{\"format\": \"something\"}";
  ASSERT_EQ(simulate(dir_, "astroid"), kExitOk);
  EXPECT_EQ(in_dir(dir_, {"classify", "--model", (dir_ / "bad.json").string(), "--input",
                          (dir_ / "trajectory.csv").string()}),
            kExitData);
  std::ofstream(dir_ / "broken.json") << "{not json";
  EXPECT_EQ(in_dir(dir_, {"classify", "--model", (dir_ / "broken.json").string(), "--input",
                          (dir_ / "trajectory.csv").string()}),
            kExitData);
}

}  // namespace
}  // namespace looptrack::cli

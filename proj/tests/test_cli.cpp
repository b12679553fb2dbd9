#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs = ICAREC_CONFIG_DIR;
const std::string kCli = ICAREC_CLI_PATH;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("icarec_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  /// Runs the CLI inside the scratch directory; returns the exit code.
  int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + kCli + "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& p) const {
    std::ifstream in(p.is_absolute() ? p : dir_ / p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write(const fs::path& p, const std::string& text) const { std::ofstream(dir_ / p, std::ios::binary) << text; }

  json error_line() const {
    const std::string err = read("stderr.txt");
    EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1) << err;
    return json::parse(err);
  }

  std::string cfg(const std::string& name) const { return "'" + (kConfigs / name).string() + "'"; }

  fs::path dir_;
};

const char* kSmallTrain = R"({
  "name": "small", "seed": 3,
  "dataset": {"generator": "2d-linear", "n": 400, "holdout": 200},
  "model": {"kind": "mlp", "hidden": 2, "units": 16},
  "train": {"epochs": 3, "batch_size": 32, "lambda": 0.05, "lr_ae": 0.001, "lr_disc": 0.001, "recon": "mse",
            "checkpoint_every": 1},
  "eval": {"hsic_permutations": 20, "probe_epochs": 2}
})";

}  // namespace

TEST_F(Cli, GenTwoDimensionalLinear) {
  ASSERT_EQ(run("gen --config " + cfg("2d-linear.json") + " --out lin.csv"), 0) << read("stderr.txt");
  const std::string csv = read("lin.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x_0,x_1,t_0,s_0");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5001);
  const json meta = json::parse(read("lin.csv.meta.json"));
  EXPECT_EQ(meta.at("generator"), "2d-linear");
  EXPECT_EQ(meta.at("seed"), 0);
  EXPECT_EQ(meta.at("config").at("dataset").at("n"), 5000);
  ASSERT_EQ(run("gen --config " + cfg("2d-linear.json") + " --out lin2.csv"), 0);
  EXPECT_EQ(read("lin2.csv"), csv);
}

TEST_F(Cli, TrainThenEvalRecoversSource) {
  ASSERT_EQ(run("gen --config " + cfg("2d-linear.json") + " --out lin.csv"), 0) << read("stderr.txt");
  ASSERT_EQ(run("train --config " + cfg("2d-linear.json") + " --out run"), 0) << read("stderr.txt");
  ASSERT_EQ(run("eval --checkpoint run --data lin.csv --out eval.json"), 0) << read("stderr.txt");
  const json ev = json::parse(read("eval.json"));
  EXPECT_GE(std::abs(ev.at("metrics").at("spearman_code_source").get<double>()), 0.9);
  EXPECT_EQ(ev.at("config").at("name"), "2d-linear");
  EXPECT_EQ(ev.at("seed"), 0);
}

TEST_F(Cli, TrainOutputsCarryProvenanceAndRepeatBytewise) {
  write("small.json", kSmallTrain);
  ASSERT_EQ(run("train --config small.json --out a"), 0) << read("stderr.txt");
  ASSERT_EQ(run("train --config small.json --out b"), 0) << read("stderr.txt");
  for (const char* f : {"metrics.csv", "report.json", "config.json", "final/encoder.json", "final/decoder.json",
                        "final/discriminator.json", "checkpoints/epoch-1/encoder.json"}) {
    EXPECT_EQ(read(fs::path("a") / f), read(fs::path("b") / f)) << f;
  }
  const json report = json::parse(read("a/report.json"));
  EXPECT_EQ(report.at("seed"), 3);
  EXPECT_EQ(report.at("config").at("train").at("epochs"), 3);
  EXPECT_TRUE(report.at("final").contains("probe_r2"));
  const json ck = json::parse(read("a/final/encoder.json"));
  EXPECT_EQ(ck.at("provenance").at("seed"), 3);
  EXPECT_EQ(ck.at("provenance").at("config").at("name"), "small");
  const std::string metrics = read("a/metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "epoch,disc_steps,ae_steps,recon,ind_disc,disc_score,spearman_code_s,hsic_code_t");
}

TEST_F(Cli, LemmaSystems) {
  ASSERT_EQ(run("lemma --system " + cfg("lemma/xor.json") + " --out xor.json"), 0) << read("stderr.txt");
  const json x = json::parse(read("xor.json"));
  EXPECT_EQ(x.at("report").at("conclusion_holds"), false);
  EXPECT_EQ(x.at("report").at("premise_independence"), true);
  ASSERT_EQ(run("lemma --system " + cfg("lemma/projection.json") + " --out p.json"), 0);
  EXPECT_EQ(json::parse(read("p.json")).at("report").at("conclusion_holds"), true);
  ASSERT_EQ(run("lemma --system " + cfg("lemma/constant.json") + " --out c.json"), 0);
  EXPECT_EQ(json::parse(read("c.json")).at("report").at("premise_reconstruction"), false);
  const std::string first = read("xor.json");
  ASSERT_EQ(run("lemma --system " + cfg("lemma/xor.json")), 0);
  EXPECT_EQ(read("xor.report.json"), first);
}

TEST_F(Cli, BaselineAndPlotsOnSmallFecgRecord) {
  write("f.json", R"({"seed": 1, "dataset": {"generator": "fecg", "n_a": 3, "record_length": 6000, "train_segments": 4}})");
  ASSERT_EQ(run("gen --config f.json --out f.csv"), 0) << read("stderr.txt");
  ASSERT_EQ(run("baseline --method rls --config " + cfg("baseline-rls.json") + " --data f.csv --out res.csv"), 0)
      << read("stderr.txt");
  const std::string res = read("res.csv");
  EXPECT_EQ(res.substr(0, res.find('\n')), "r_0,r_1,r_2");
  EXPECT_EQ(std::count(res.begin(), res.end(), '\n'), 6001);
  const json pr = json::parse(read("res.csv.presence.json"));
  EXPECT_EQ(pr.at("method"), "rls");
  EXPECT_EQ(pr.at("seed"), 1);
  EXPECT_GT(pr.at("presence_residual").at("R").get<double>(), pr.at("presence_x").at("R").get<double>());
  ASSERT_EQ(run("plot --data f.csv --kind pca-color --out a.svg"), 0) << read("stderr.txt");
  ASSERT_EQ(run("plot --data f.csv --kind pca-color --out b.svg"), 0);
  EXPECT_EQ(read("a.svg"), read("b.svg"));
  EXPECT_EQ(read("a.svg").rfind("<svg", 0), 0u);
  EXPECT_EQ(run("plot --data f.csv --kind scatter --out c.svg"), 2);
}

TEST_F(Cli, ScatterPlotIsDeterministic) {
  ASSERT_EQ(run("gen --config " + cfg("2d-nonlinear.json") + " --out n.csv"), 0);
  ASSERT_EQ(run("plot --data n.csv --kind scatter --out a.svg"), 0) << read("stderr.txt");
  ASSERT_EQ(run("plot --data n.csv --kind scatter --out b.svg"), 0);
  EXPECT_EQ(read("a.svg"), read("b.svg"));
  const std::string svg = read("a.svg");
  EXPECT_EQ(static_cast<std::size_t>(std::count(svg.begin(), svg.end(), '\n')), 5000u + 7u);
}

TEST_F(Cli, ExitCodeMissingFile) {
  EXPECT_EQ(run("lemma --system nowhere.json"), 1);
  EXPECT_EQ(error_line().at("error"), "missing_file");
  write("csvcfg.json", R"({"dataset": {"generator": "csv", "path": "absent.csv"}})");
  EXPECT_EQ(run("gen --config csvcfg.json --out x.csv"), 1);
}

TEST_F(Cli, ExitCodeSchemaViolation) {
  std::string bad = kSmallTrain;
  bad.replace(bad.find("\"lambda\""), 8, "\"lamda\"");
  write("bad.json", bad);
  EXPECT_EQ(run("train --config bad.json --out run"), 2);
  const json e = error_line();
  EXPECT_EQ(e.at("exit_code"), 2);
  EXPECT_NE(e.at("message").get<std::string>().find("lamda"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "run"));
  write("nomodel.json", R"({"dataset": {"generator": "2d-linear"}})");
  EXPECT_EQ(run("train --config nomodel.json --out run"), 2);
  EXPECT_EQ(run("train"), 2);
  EXPECT_EQ(error_line().at("error"), "usage");
  EXPECT_EQ(run("baseline --method nlms --config " + cfg("baseline-lms.json") + " --data x.csv --out r.csv"), 2);
}

TEST_F(Cli, ExitCodeParseError) {
  write("trunc.json", R"({"dataset": {"generator": )");
  EXPECT_EQ(run("gen --config trunc.json --out x.csv"), 3);
  EXPECT_EQ(error_line().at("error"), "parse");
  write("bad.csv", "x_0,t_0\n1,2\n3,oops\n");
  write("cfg.json", R"({"dataset": {"generator": "csv", "path": "bad.csv"}, "model": {"kind": "mlp"}, "train": {}})");
  EXPECT_EQ(run("train --config cfg.json --out run"), 3);
}

TEST_F(Cli, ExitCodeNonFiniteTraining) {
  std::ostringstream csv;
  csv << "x_0,x_1,t_0\n";
  for (int i = 0; i < 64; ++i) csv << (i == 5 ? "1e308" : std::to_string(i * 0.01)) << ',' << (i % 7) * 0.1 << ',' << (i % 5) * 0.2 << '\n';
  write("inf.csv", csv.str());
  write("cfg.json", R"({"dataset": {"generator": "csv", "path": "inf.csv"}, "model": {"kind": "mlp", "hidden": 1, "units": 4},
                        "train": {"epochs": 2, "batch_size": 8}})");
  EXPECT_EQ(run("train --config cfg.json --out run"), 4);
  EXPECT_EQ(error_line().at("error"), "non_finite");
}

TEST_F(Cli, ExitCodeOtherFailure) {
  write("blocker", "a file where a directory is needed");
  EXPECT_EQ(run("gen --config " + cfg("2d-linear.json") + " --out blocker/x.csv"), 5);
  EXPECT_EQ(error_line().at("error"), "other");
}

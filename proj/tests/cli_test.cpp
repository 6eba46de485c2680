/*
 * Copyright 2026 The ecmsoh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cli_app.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "gtest/gtest.h"
#include "test_util.hpp"
#include "waveform_util.hpp"

namespace ecmsoh {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("ecmsoh_cli_" + std::string(info->name()) + "_" +
                                        std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "ecmsoh");
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  static std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

const std::vector<std::string> kRef946 = {"--r0", "14.7e-3", "--r1", "1.9e-3", "--r2", "2.1e-3",
                                          "--aw", "2.5e-3",  "--c1", "1.2",    "--c2", "0.24"};

TEST_F(CliTest, SweepToStdout) {
  std::vector<std::string> args = {"ecm", "sweep"};
  args.insert(args.end(), kRef946.begin(), kRef946.end());
  ASSERT_EQ(run(args), 0) << err_.str();
  const auto rows = lines(out_.str());
  ASSERT_EQ(rows.size(), 61u);
  EXPECT_EQ(rows[0], "freq_hz,re_ohm,im_ohm");
  const auto first = csv::split(rows[1]);
  const auto last = csv::split(rows[60]);
  EXPECT_GT(*csv::parse_double(first[0]), *csv::parse_double(last[0]));
  EXPECT_NEAR(*csv::parse_double(first[1]), 14.7e-3, 1e-4);
  EXPECT_LT(*csv::parse_double(last[2]), 0.0);

  const Json report = Json::parse(lines(err_.str()).back());
  EXPECT_EQ(report.at("kind"), "run_report");
  EXPECT_EQ(report.at("command"), "ecm sweep");
  EXPECT_EQ(report.at("schema_version"), 1);
}

TEST_F(CliTest, SweepFromParamsFile) {
  save_params(path("p.json"), testing::reference_cell_768());
  ASSERT_EQ(run({"ecm", "sweep", "--params", path("p.json"), "--points", "5", "--out", path("n.csv"),
                 "--report", path("r.json")}),
            0)
      << err_.str();
  EXPECT_EQ(lines(slurp(path("n.csv"))).size(), 6u);
  EXPECT_EQ(load_json(path("r.json")).at("command"), "ecm sweep");
}

TEST_F(CliTest, SweepMissingParameterIsUsageError) {
  EXPECT_EQ(run({"ecm", "sweep", "--r0", "0.01"}), 2);
  EXPECT_NE(err_.str().find("--params"), std::string::npos);
  EXPECT_EQ(run({"ecm", "sweep", "--r0", "-1", "--r1", "1", "--r2", "1", "--aw", "1", "--c1", "1", "--c2", "1"}), 2);
  EXPECT_EQ(run({"bogus"}), 2);
  EXPECT_EQ(run({}), 2);
}

TEST_F(CliTest, ExtractFromFourPoints) {
  ASSERT_EQ(run({"ecm", "extract", "--high", "15.915494309189533,1,0", "--mid2", "0.15915494309189533,2,-1",
                 "--mid1", "0.015915494309189533,4,-0.5", "--low", "0.0015915494309189533,6,-0.2",
                 "--fit-out", path("fit.json")}),
            0)
      << err_.str();
  const Json p = Json::parse(out_.str());
  EXPECT_EQ(p.at("kind"), "ecm_params");
  EXPECT_DOUBLE_EQ(p.at("R0").get<double>(), 1.0);
  EXPECT_NEAR(p.at("R2").get<double>(), 2.0, 1e-12);
  EXPECT_TRUE(load_json(path("fit.json")).contains("rmse_pct"));
}

TEST_F(CliTest, ExtractFailures) {
  // Frequencies out of order.
  EXPECT_EQ(run({"ecm", "extract", "--high", "1,1,0", "--mid2", "10,2,-1", "--mid1", "0.01,4,-0.5", "--low",
                 "0.001,6,-0.2"}),
            2);
  // Mid2 real part below R0 makes R2 non-physical.
  EXPECT_EQ(run({"ecm", "extract", "--high", "100,1,0", "--mid2", "1,0.5,-1", "--mid1", "0.1,4,-0.5", "--low",
                 "0.01,6,-0.2"}),
            3);
  EXPECT_NE(err_.str().find("R2"), std::string::npos);
  EXPECT_EQ(run({"ecm", "extract", "--high", "100,1,0"}), 2);
  EXPECT_EQ(run({"ecm", "extract", "--high", "100,1"}), 2);
}

TEST_F(CliTest, ExtractFromSpectrum) {
  ASSERT_EQ(run({"dataset", "synth", "--cells", "2", "--soh-points", "3", "--noise", "0", "--emit-eis",
                 path("eis.csv")}),
            0)
      << err_.str();
  ASSERT_EQ(run({"ecm", "extract", "--spectrum", path("eis.csv"), "--cell", "S02", "--out", path("p.json")}), 0)
      << err_.str();
  const EcmParams p = load_params(path("p.json"));
  EXPECT_LT(testing::rel_err(p.r0_ohm, 14.7e-3), 0.05);
  const Json report = Json::parse(lines(err_.str()).back());
  EXPECT_EQ(report.at("inputs").at("group"), 3);
  EXPECT_TRUE(report.at("details").contains("selected"));
  EXPECT_EQ(run({"ecm", "extract", "--spectrum", path("eis.csv"), "--cell", "S09"}), 2);
}

TEST_F(CliTest, EstimateImpedanceFromWaveform) {
  const EcmParams p = testing::reference_cell_856();
  const SignalFrame frame = testing::square_frame(p, 2.0, 400.0, 120);
  {
    std::ofstream f(path("w.csv"));
    write_waveform_csv(f, frame);
  }
  ASSERT_EQ(run({"signal", "estimate-z", "--waveform", path("w.csv"), "--freqs-hz", "2"}), 0) << err_.str();
  const auto rows = lines(out_.str());
  ASSERT_EQ(rows.size(), 2u);
  const auto f = csv::split(rows[1]);
  const ComplexZ got(*csv::parse_double(f[1]), *csv::parse_double(f[2]));
  EXPECT_LT(std::abs(got - ecm_impedance(p, omega_from_hz(2.0))) / std::abs(ecm_impedance(p, omega_from_hz(2.0))),
            0.03);
  EXPECT_EQ(run({"signal", "estimate-z", "--waveform", path("w.csv"), "--freqs-hz", "0.05"}), 4);
}

TEST_F(CliTest, FullPipeline) {
  ASSERT_EQ(run({"dataset", "synth", "--seed", "3", "--emit-eis", path("eis.csv"), "--truth", path("truth.json")}),
            0)
      << err_.str();
  ASSERT_EQ(run({"dataset", "build", "--eis", path("eis.csv"), "--out", path("table.json")}), 0) << err_.str();
  EXPECT_EQ(load_feature_table(path("table.json")).rows.size(), 60u);
  ASSERT_EQ(run({"dataset", "train", "--table", path("table.json"), "--model", path("model.json"), "--test-out",
                 path("test.json")}),
            0)
      << err_.str();
  EXPECT_EQ(out_.str().rfind("train: n=36 ", 0), 0u) << out_.str();
  ASSERT_EQ(run({"dataset", "eval", "--model", path("model.json"), "--table", path("test.json"), "--out",
                 path("pred.csv")}),
            0)
      << err_.str();
  const Json report = Json::parse(lines(err_.str()).back());
  EXPECT_LT(report.at("metrics").at("eval").at("mae_pct").get<double>(), 2.0);
  const auto pred = lines(slurp(path("pred.csv")));
  ASSERT_EQ(pred.size(), 25u);
  EXPECT_EQ(pred[0], "cell_id,soh_true_pct,soh_pred_pct,abs_err_pct");

  const FeatureRow held_out = load_feature_table(path("test.json")).rows.front();
  save_params(path("p.json"), held_out.params);
  ASSERT_EQ(run({"dataset", "predict", "--model", path("model.json"), "--params", path("p.json")}), 0);
  EXPECT_NEAR(std::stod(out_.str()), 100.0 * held_out.soh_frac, 2.0);
}

TEST_F(CliTest, TrainByCell) {
  ASSERT_EQ(run({"dataset", "synth", "--cells", "4", "--soh-points", "6", "--emit-eis", path("eis.csv")}), 0);
  ASSERT_EQ(run({"dataset", "build", "--eis", path("eis.csv"), "--out", path("t.json")}), 0);
  ASSERT_EQ(run({"dataset", "train", "--table", path("t.json"), "--model", path("m.json"), "--test-cells", "S02",
                 "--test-out", path("test.json")}),
            0)
      << err_.str();
  EXPECT_EQ(load_feature_table(path("test.json")).rows.size(), 6u);
  EXPECT_EQ(run({"dataset", "train", "--table", path("t.json"), "--model", path("m.json"), "--test-cells", "S07"}),
            2);
}

TEST_F(CliTest, SchemaMismatchIsArtifactError) {
  ASSERT_EQ(run({"dataset", "synth", "--cells", "2", "--soh-points", "6", "--emit-eis", path("eis.csv"),
                 "--truth", path("truth.json")}),
            0);
  ASSERT_EQ(run({"dataset", "train", "--table", path("truth.json"), "--model", path("m.json"), "--all"}), 0)
      << err_.str();
  Json m = load_json(path("m.json"));
  m["schema_version"] = 2;
  save_json(path("m2.json"), m);
  EXPECT_EQ(run({"dataset", "eval", "--model", path("m2.json"), "--table", path("truth.json")}), 5);
  EXPECT_EQ(run({"dataset", "eval", "--model", path("truth.json"), "--table", path("truth.json")}), 5);
  EXPECT_EQ(run({"dataset", "eval", "--model", path("missing.json"), "--table", path("truth.json")}), 5);
}

TEST_F(CliTest, ConfigFileSuppliesOptions) {
  {
    std::ofstream cfg(path("cfg.toml"));
    cfg << "[ecm.sweep]\nr0 = 0.0147\nr1 = 0.0019\nr2 = 0.0021\naw = 0.0025\nc1 = 1.2\nc2 = 0.24\npoints = 7\n";
  }
  ASSERT_EQ(run({"--config", path("cfg.toml"), "ecm", "sweep"}), 0) << err_.str();
  EXPECT_EQ(lines(out_.str()).size(), 8u);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string exe = ECMSOH_CLI_PATH;
  const std::string quiet = " >" + path("o.txt") + " 2>" + path("e.txt");
  auto status = [&](const std::string& args) {
    const int raw = std::system((exe + " " + args + quiet).c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("ecm sweep --r0 1"), 2);
  EXPECT_EQ(status("ecm sweep --r0 14.7e-3 --r1 1.9e-3 --r2 2.1e-3 --aw 2.5e-3 --c1 1.2 --c2 0.24 --points 3"), 0);
  EXPECT_EQ(lines(slurp(path("o.txt"))).size(), 4u);
}

}  // namespace
}  // namespace ecmsoh

// Copyright 2026 The matu-sim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "matu/matu.hpp"

namespace {

namespace fs = std::filesystem;
using matu::ConfigError;
using matu::FederationConfig;

const fs::path kSource = MATU_SOURCE_DIR;

std::string slurp(const fs::path& p) { return matu::read_text_file(p.string()); }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("matu_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string field_of(const std::string& text) {
  try {
    matu::parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

TEST(Config, MinimalGetsDefaults) {
  const auto cfg = matu::parse_config("num_clients = 4\nrounds = 2\nnum_tasks = 3\n");
  EXPECT_EQ(cfg.num_clients, 4u);
  EXPECT_EQ(cfg.aggregation.rho, 0.4);
  EXPECT_EQ(cfg.aggregation.epsilon, 0.5);
  EXPECT_EQ(cfg.aggregation.kappa, 3u);
  EXPECT_EQ(cfg.aggregation.cross_task, matu::CrossTaskMode::kSimilarityWeighted);
  EXPECT_EQ(cfg.algorithm, matu::Algorithm::kMatu);
  EXPECT_EQ(cfg.participation, 1.0);
}

TEST(Config, DiagnosticsNameTheField) {
  const std::string base = "num_clients = 4\nrounds = 2\nnum_tasks = 3\n";
  EXPECT_EQ(field_of(base + "participation = 0\n"), "participation");
  EXPECT_EQ(field_of(base + "participation = 1.5\n"), "participation");
  EXPECT_EQ(field_of(base + "rho = 2\n"), "rho");
  EXPECT_EQ(field_of(base + "bogus = 1\n"), "bogus");
  EXPECT_EQ(field_of(base + "rho = 0.3\nrho = 0.5\n"), "rho");
  EXPECT_EQ(field_of(base + "cross_task = sideways\n"), "cross_task");
  EXPECT_EQ(field_of(base + "task_groups = 0,7\n"), "task_groups");
  EXPECT_EQ(field_of("rounds = 2\nnum_tasks = 3\n"), "num_clients");
  EXPECT_EQ(field_of("num_clients = 0\nrounds = 2\nnum_tasks = 3\n"), "num_clients");
  EXPECT_EQ(field_of(base + "suite = x.suite\ndim = 8\n"), "dim");
}

TEST(Config, CanonicalRoundTrip) {
  const std::string src =
      "# comment\nnum_tasks=8\n  num_clients = 10 \nrounds = 300\nkappa = 2\n"
      "cross_task = sim\ntask_groups = 0,1,2;3,4,5 ; 6,7\nalgorithm = fedprox_multi\n";
  const auto cfg = matu::parse_config(src);
  const std::string canonical = matu::emit_config(cfg);
  EXPECT_EQ(matu::emit_config(matu::parse_config(canonical)), canonical);
  EXPECT_EQ(matu::parse_config(canonical), cfg);
  EXPECT_NE(canonical.find("cross_task = similarity_weighted"), std::string::npos);
  EXPECT_NE(canonical.find("task_groups = 0,1,2; 3,4,5; 6,7"), std::string::npos);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"eight_task.cfg", "eight_task_conflict.cfg", "thirty_task.cfg"}) {
    const fs::path p = kSource / "configs" / name;
    const auto cfg = matu::parse_config(slurp(p));
    const auto suite = matu::load_suite(cfg, p.parent_path().string());
    EXPECT_EQ(suite.tasks.size(), cfg.num_tasks) << name;
  }
}

TEST(Suite, ParseEmitRoundTrip) {
  const std::string text = slurp(kSource / "suites" / "eight_task.suite");
  const auto spec = matu::parse_suite(text);
  EXPECT_EQ(matu::parse_suite(matu::emit_suite(spec)), spec);
  const auto suite = matu::build_suite(spec);
  ASSERT_EQ(suite.tasks.size(), 8u);
  EXPECT_EQ(suite.dim, 64u);
  EXPECT_EQ(suite.task(5).cluster, 1);
}

TEST(Suite, ErrorsAreReported) {
  EXPECT_THROW(matu::build_suite(matu::parse_suite("suite x\ndim 2\ntask 0 cluster=0 curvature=const:1 seed=0\n")),
               std::invalid_argument);  // planted optimum without a planted line
  EXPECT_THROW(matu::parse_suite("suite x\ndim 2\ntask 0 bogus=1\n"), std::invalid_argument);
  EXPECT_THROW(matu::build_suite(matu::parse_suite(
                   "suite x\ndim 2\ntask 0 cluster=0 curvature=const:1 seed=0 optimum=1\n")),
               std::invalid_argument);
  EXPECT_THROW(matu::build_suite(matu::parse_suite(
                   "suite x\ndim 1\ntask 0 cluster=0 curvature=const:0 seed=0 optimum=1\n")),
               std::invalid_argument);
}

matu::SimulationResult run_golden() {
  const fs::path cfg_path = kSource / "tests" / "golden" / "two_client_three_task.cfg";
  const auto cfg = matu::parse_config(slurp(cfg_path));
  return matu::run_simulation(cfg, matu::load_suite(cfg, cfg_path.parent_path().string()));
}

TEST(Golden, TwoClientThreeTaskTranscript) {
  std::ostringstream got;
  for (const auto& log : run_golden().logs) {
    for (const auto& rec : log.transcript) got << matu::format_transcript_line(rec) << "\n";
  }
  const fs::path golden = kSource / "tests" / "golden" / "two_client_three_task.jsonl";
  if (std::getenv("MATU_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(golden, std::ios::binary) << got.str();
  }
  EXPECT_EQ(got.str(), slurp(golden));
}

TEST(Report, ConfigEchoRoundTrips) {
  const auto cfg = matu::parse_config(slurp(kSource / "tests" / "golden" / "two_client_three_task.cfg"));
  const auto res = run_golden();
  const auto j = matu::report_json(res.report, cfg);
  EXPECT_EQ(matu::parse_config(j["config"].get<std::string>()), cfg);
  EXPECT_EQ(j["version"], matu::kVersion);
  for (const auto& t : j["tasks"]) {
    EXPECT_GE(t["normalized_performance"].get<double>(), 0.0);
    EXPECT_LE(t["normalized_performance"].get<double>(), 1.0);
  }
}

TEST(PlotData, CommRowMatchesCostFunction) {
  const std::string csv = matu::comm_scaling_csv(1000, 5);
  const auto c = matu::comm_cost(1000, 4);
  const std::string row = "1000,4," + std::to_string(c.matu_bytes) + "," + std::to_string(c.baseline_bytes) +
                          "," + matu::text::format_double(c.ratio()) + "\n";
  EXPECT_NE(csv.find(row), std::string::npos);
}

TEST(PlotData, OptionalFilesOmittedAndBytesStable) {
  const auto res = run_golden();
  matu::PlotInputs in;
  in.logs = &res.logs;
  in.report = &res.report;
  in.dim = 6;
  in.max_tasks_per_client = 2;
  const fs::path a = scratch_dir("plot_a");
  const auto written = matu::emit_plotdata(in, a);
  EXPECT_FALSE(fs::exists(a / "plotdata" / "similarity.csv"));
  EXPECT_TRUE(fs::exists(a / "plotdata" / "cross_task.csv"));
  EXPECT_EQ(written.size(), 4u);

  in.similarity = &res.final_similarity;
  const fs::path b = scratch_dir("plot_b");
  const fs::path c = scratch_dir("plot_c");
  matu::emit_plotdata(in, b);
  matu::emit_plotdata(in, c);
  for (const auto& e : fs::directory_iterator(b / "plotdata")) {
    EXPECT_EQ(slurp(e.path()), slurp(c / "plotdata" / e.path().filename()));
  }
  EXPECT_TRUE(fs::exists(b / "plotdata" / "similarity.csv"));

  std::vector<matu::RoundLog> none;
  in.logs = &none;
  EXPECT_THROW(matu::emit_plotdata(in, b), std::invalid_argument);
}

TEST(PlotData, UnwritableDirectoryNamesPath) {
  const auto res = run_golden();
  matu::PlotInputs in;
  in.logs = &res.logs;
  in.report = &res.report;
  in.dim = 6;
  const fs::path blocker = scratch_dir("blocked") / "file";
  std::ofstream(blocker) << "x";
  try {
    matu::emit_plotdata(in, blocker);
    FAIL() << "expected failure";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("file"), std::string::npos);
  }
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MATU_CLI) + " " + args + " > " + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

TEST(Cli, SimulateWritesOutputsAndInspectsPayloads) {
  const fs::path out = scratch_dir("cli");
  const fs::path cfg = kSource / "tests" / "golden" / "two_client_three_task.cfg";
  ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --out " + out.string() +
                        " --seed 5 --rounds 3 --kappa 1 --rho 0.5 --epsilon 0.4 --cross-task uniform"
                        " --dump-payloads",
                    out / "log.txt"),
            0)
      << slurp(out / "log.txt");
  for (const char* f : {"rounds.jsonl", "report.json", "comm.csv", "plotdata/convergence.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  std::size_t lines = 0;
  std::ifstream in(out / "rounds.jsonl");
  for (std::string line; std::getline(in, line);) {
    EXPECT_TRUE(nlohmann::json::parse(line).is_object());
    ++lines;
  }
  EXPECT_EQ(lines, 3u);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  const auto echoed = matu::parse_config(report["config"].get<std::string>());
  EXPECT_EQ(echoed.master_seed, 5u);
  EXPECT_EQ(echoed.aggregation.kappa, 1u);
  EXPECT_EQ(echoed.aggregation.cross_task, matu::CrossTaskMode::kUniform);

  ASSERT_EQ(run_cli("inspect-payload " + (out / "payloads" / "client_0.bin").string(), out / "inspect.txt"), 0);
  const std::string shown = slurp(out / "inspect.txt");
  EXPECT_NE(shown.find("dim"), std::string::npos);
  EXPECT_NE(shown.find("lambda"), std::string::npos);
}

TEST(Cli, RejectsBadInput) {
  const fs::path out = scratch_dir("cli_bad");
  const fs::path cfg = kSource / "tests" / "golden" / "two_client_three_task.cfg";
  EXPECT_NE(run_cli("simulate --config " + cfg.string() + " --out " + out.string() + " --participation 0",
                    out / "a.txt"),
            0);
  EXPECT_NE(slurp(out / "a.txt").find("participation"), std::string::npos);
  std::ofstream(out / "junk.bin", std::ios::binary) << "nope";
  EXPECT_NE(run_cli("inspect-payload " + (out / "junk.bin").string(), out / "b.txt"), 0);
}

}  // namespace

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

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "matu/matu.hpp"

namespace {

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::optional<std::uint64_t>& seed, const std::optional<std::string>& algorithm,
                 const std::optional<std::size_t>& rounds, const std::optional<double>& participation,
                 const std::optional<std::size_t>& kappa, const std::optional<double>& rho,
                 const std::optional<double>& epsilon, const std::optional<std::string>& cross_task,
                 bool timing, bool dump_payloads) {
  matu::FederationConfig cfg = matu::parse_config(matu::read_text_file(config_path));
  if (seed) cfg.master_seed = *seed;
  if (algorithm) cfg.algorithm = matu::parse_algorithm(*algorithm);
  if (rounds) cfg.rounds = *rounds;
  if (participation) cfg.participation = *participation;
  if (kappa) cfg.aggregation.kappa = *kappa;
  if (rho) cfg.aggregation.rho = *rho;
  if (epsilon) cfg.aggregation.epsilon = *epsilon;
  if (cross_task) cfg.aggregation.cross_task = matu::parse_cross_task(*cross_task);
  // Re-validate overrides through the same path as the file.
  cfg = matu::parse_config(matu::emit_config(cfg));

  const std::string base = std::filesystem::path(config_path).parent_path().string();
  matu::TaskSuite suite = matu::load_suite(cfg, base);
  const std::size_t dim = suite.dim;

  matu::OutputWriter writer(out_dir);
  matu::Simulation sim(cfg, suite);
  matu::SimulationResult result;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    result.logs.push_back(sim.run_round(timing));
    writer.append_round(result.logs.back());
  }
  result.report = matu::build_report(sim, result.logs);
  result.final_similarity = sim.last_similarity();

  std::size_t max_k = 1;
  for (std::size_t n = 0; n < cfg.num_clients; ++n) {
    max_k = std::max(max_k, sim.allocation().tasks_of(n).size());
  }
  writer.finish(result, cfg, dim, std::max(max_k, cfg.num_tasks));

  if (dump_payloads && cfg.algorithm == matu::Algorithm::kMatu) {
    const auto dir = std::filesystem::path(out_dir) / "payloads";
    std::filesystem::create_directories(dir);
    for (std::size_t n = 0; n < cfg.num_clients; ++n) {
      const auto tasks = sim.allocation().tasks_of(n);
      const auto bundle = matu::form_client_payload(tasks, sim.task_state());
      const auto bytes = matu::encode_bundle(bundle, static_cast<matu::ClientId>(n), sim.next_round());
      std::ofstream f(dir / ("client_" + std::to_string(n) + ".bin"), std::ios::binary);
      f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
  }

  std::cout << "algorithm " << result.report.algorithm << ", rounds " << result.report.rounds_run
            << ", mean distance " << matu::text::format_fixed(result.report.mean_distance, 6)
            << ", mean normalized performance "
            << matu::text::format_fixed(result.report.mean_normalized_performance, 4) << "\n";
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

int run_inspect(const std::string& path) {
  const std::string raw = matu::read_text_file(path);
  const std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
  const matu::BundleEnvelope env = matu::decode_bundle(bytes);
  const auto& b = env.bundle;
  std::cout << "client " << env.client << "\n";
  std::cout << "round " << env.round << "\n";
  std::cout << "dim " << b.unified.dim() << "\n";
  std::cout << "bytes " << bytes.size() << "\n";
  std::cout << "unified_l1 " << matu::text::format_fixed(matu::l1_norm(b.unified), 6) << "\n";
  std::cout << "tasks " << b.task_ids.size() << "\n";
  for (matu::TaskId t : b.task_ids) {
    const auto& mods = b.per_task.at(t);
    const double density = b.unified.dim() == 0
                               ? 0.0
                               : static_cast<double>(mods.mask.count()) / static_cast<double>(b.unified.dim());
    std::cout << "  task " << t << "  mask_density " << matu::text::format_fixed(density, 4) << "  lambda "
              << matu::text::format_fixed(mods.scaler, 6) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Many-task federated learning simulator with unified task vectors"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Run a federation from a config file");
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algorithm;
  std::optional<std::size_t> rounds;
  std::optional<double> participation;
  std::optional<std::size_t> kappa;
  std::optional<double> rho;
  std::optional<double> epsilon;
  std::optional<std::string> cross_task;
  bool timing = false;
  bool dump_payloads = false;
  simulate->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_option("--seed", seed, "Master seed");
  simulate->add_option("--algorithm", algorithm, "matu|fedavg|fedprox")
      ->check(CLI::IsMember({"matu", "fedavg", "fedprox"}));
  simulate->add_option("--rounds", rounds, "Rounds R");
  simulate->add_option("--participation", participation, "Participation rate in (0,1]");
  simulate->add_option("--kappa", kappa, "Top-kappa similar tasks");
  simulate->add_option("--rho", rho, "Agreement threshold");
  simulate->add_option("--epsilon", epsilon, "Similarity floor");
  simulate->add_option("--cross-task", cross_task, "sim|uniform|off")
      ->check(CLI::IsMember({"sim", "uniform", "off"}));
  simulate->add_flag("--timing", timing, "Record per-round wall-clock time in rounds.jsonl");
  simulate->add_flag("--dump-payloads", dump_payloads, "Write each client's next downlink bundle");

  auto* inspect = app.add_subcommand("inspect-payload", "Pretty-print a serialized bundle");
  std::string payload_path;
  inspect->add_option("file", payload_path, "Bundle file")->required()->check(CLI::ExistingFile);

  auto* comm = app.add_subcommand("comm-cost", "Closed-form upload bytes per client and round");
  std::size_t comm_dim = 1000;
  std::size_t comm_k = 30;
  comm->add_option("--dim", comm_dim, "Vector dimension d")->check(CLI::PositiveNumber);
  comm->add_option("--max-tasks", comm_k, "Largest task count k")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      return run_simulate(config_path, out_dir, seed, algorithm, rounds, participation, kappa, rho, epsilon,
                          cross_task, timing, dump_payloads);
    }
    if (inspect->parsed()) return run_inspect(payload_path);
    if (comm->parsed()) {
      std::cout << matu::comm_scaling_csv(comm_dim, comm_k);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "matu/config.hpp"
#include "matu/federation.hpp"
#include "matu/text.hpp"

namespace matu {

inline constexpr const char* kVersion = "matu-sim 0.1.0";

using ordered_json = nlohmann::ordered_json;

inline ordered_json transcript_json(const TaskRoundRecord& r) {
  return ordered_json{{"round", r.round},
                      {"task", r.task},
                      {"participants", r.participants},
                      {"l1_same_task", r.l1_same_task},
                      {"l1_cross_task", r.l1_cross_task},
                      {"num_similar", r.num_similar},
                      {"mean_alpha", r.mean_alpha}};
}

// One structured text line per task per round.
inline std::string format_transcript_line(const TaskRoundRecord& r) { return transcript_json(r).dump(); }

inline ordered_json round_log_json(const RoundLog& log) {
  ordered_json j;
  j["round"] = log.round;
  j["selected"] = log.selected;
  j["distance"] = log.distance;
  j["l1_same_task"] = log.l1_same_task;
  j["l1_cross_task"] = log.l1_cross_task;
  ordered_json up = ordered_json::object();
  for (const auto& [n, b] : log.up_bytes) up[std::to_string(n)] = b;
  ordered_json down = ordered_json::object();
  for (const auto& [n, b] : log.down_bytes) down[std::to_string(n)] = b;
  j["up_bytes"] = std::move(up);
  j["down_bytes"] = std::move(down);
  ordered_json tr = ordered_json::array();
  for (const auto& r : log.transcript) tr.push_back(transcript_json(r));
  j["transcript"] = std::move(tr);
  if (log.wall_clock_ms) j["wall_clock_ms"] = *log.wall_clock_ms;
  return j;
}

inline ordered_json report_json(const Report& rep, const FederationConfig& cfg) {
  ordered_json j;
  j["version"] = kVersion;
  j["algorithm"] = rep.algorithm;
  j["rounds_run"] = rep.rounds_run;
  ordered_json tasks = ordered_json::array();
  for (const auto& t : rep.tasks) {
    tasks.push_back(ordered_json{{"task", t.task},
                                 {"cluster", t.cluster},
                                 {"initial_distance", t.initial_distance},
                                 {"final_distance", t.final_distance},
                                 {"normalized_performance", t.normalized_performance}});
  }
  j["tasks"] = std::move(tasks);
  j["mean_distance"] = rep.mean_distance;
  j["mean_normalized_performance"] = rep.mean_normalized_performance;
  ordered_json comm;
  comm["total_up_bytes"] = rep.total_up_bytes;
  comm["total_down_bytes"] = rep.total_down_bytes;
  comm["bytes_per_task_round"] = rep.bytes_per_task_round;
  comm["count_downlink"] = cfg.count_downlink;
  ordered_json per_client = ordered_json::object();
  for (const auto& [n, b] : rep.bytes_per_client) per_client[std::to_string(n)] = b;
  comm["bytes_per_client"] = std::move(per_client);
  j["communication"] = std::move(comm);
  j["config"] = emit_config(cfg);
  return j;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << body;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
}

}  // namespace detail

struct PlotInputs {
  const std::vector<RoundLog>* logs = nullptr;
  const Report* report = nullptr;
  std::size_t dim = 0;
  std::size_t max_tasks_per_client = 1;
  const SimilarityMatrix* similarity = nullptr;  // optional; MaTU only
};

inline std::string comm_scaling_csv(std::size_t dim, std::size_t max_k) {
  std::ostringstream out;
  out << "d,k,matu_bytes,baseline_bytes,ratio\n";
  for (std::size_t k = 1; k <= max_k; ++k) {
    const CommCost c = comm_cost(dim, k);
    out << dim << "," << k << "," << c.matu_bytes << "," << c.baseline_bytes << ","
        << text::format_double(c.ratio()) << "\n";
  }
  return out.str();
}

// Returns the file names written, relative to out_dir.
inline std::vector<std::string> emit_plotdata(const PlotInputs& in, const std::filesystem::path& out_dir) {
  if (in.logs == nullptr || in.logs->empty()) throw std::invalid_argument("emit_plotdata: no round logs");
  if (in.report == nullptr) throw std::invalid_argument("emit_plotdata: no report");
  const std::filesystem::path dir = out_dir / "plotdata";
  detail::ensure_dir(dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& body) {
    detail::write_file(dir / name, body);
    written.push_back("plotdata/" + name);
  };

  {
    std::ostringstream out;
    out << "task_id,cluster_id,initial_distance,final_distance,normalized_performance\n";
    for (const auto& t : in.report->tasks) {
      out << t.task << "," << t.cluster << "," << text::format_double(t.initial_distance) << ","
          << text::format_double(t.final_distance) << ","
          << text::format_double(t.normalized_performance) << "\n";
    }
    emit("normalized_performance.csv", out.str());
  }

  emit("comm_scaling.csv", comm_scaling_csv(in.dim, in.max_tasks_per_client));

  {
    std::ostringstream out;
    out << "round,task_id,distance\n";
    for (const auto& log : *in.logs) {
      for (std::size_t t = 0; t < log.distance.size(); ++t) {
        out << log.round << "," << t << "," << text::format_double(log.distance[t]) << "\n";
      }
    }
    emit("convergence.csv", out.str());
  }

  bool any_transcript = false;
  for (const auto& log : *in.logs) any_transcript = any_transcript || !log.transcript.empty();
  if (any_transcript) {
    std::ostringstream out;
    out << "round,task_id,l1_same_task,l1_cross_task,num_similar,mean_alpha\n";
    for (const auto& log : *in.logs) {
      for (const auto& r : log.transcript) {
        out << r.round << "," << r.task << "," << text::format_double(r.l1_same_task) << ","
            << text::format_double(r.l1_cross_task) << "," << r.num_similar << ","
            << text::format_double(r.mean_alpha) << "\n";
      }
    }
    emit("cross_task.csv", out.str());
  }

  if (in.similarity != nullptr && in.similarity->size() > 0) {
    std::ostringstream out;
    out << "task_a,task_b,similarity\n";
    const auto& ids = in.similarity->tasks();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t k = 0; k < ids.size(); ++k) {
        out << ids[i] << "," << ids[k] << "," << text::format_double(in.similarity->at_index(i, k)) << "\n";
      }
    }
    emit("similarity.csv", out.str());
  }
  return written;
}

inline std::string comm_csv(const std::vector<RoundLog>& logs) {
  std::ostringstream out;
  out << "round,client,up_bytes,down_bytes\n";
  for (const auto& log : logs) {
    for (const auto& [n, b] : log.up_bytes) {
      const auto it = log.down_bytes.find(n);
      out << log.round << "," << n << "," << b << "," << (it == log.down_bytes.end() ? 0 : it->second)
          << "\n";
    }
  }
  return out.str();
}

// Streams rounds.jsonl as rounds complete, then writes the report, the
// communication table and the plot data.
class OutputWriter {
 public:
  explicit OutputWriter(std::filesystem::path out_dir) : dir_(std::move(out_dir)) {
    detail::ensure_dir(dir_);
    rounds_.open(dir_ / "rounds.jsonl", std::ios::binary | std::ios::trunc);
    if (!rounds_) throw std::runtime_error("cannot write '" + (dir_ / "rounds.jsonl").string() + "'");
  }

  void append_round(const RoundLog& log) {
    rounds_ << round_log_json(log).dump() << "\n";
    rounds_.flush();
  }

  void finish(const SimulationResult& result, const FederationConfig& cfg, std::size_t dim,
              std::size_t max_tasks_per_client) {
    rounds_.close();
    detail::write_file(dir_ / "report.json", report_json(result.report, cfg).dump(2) + "\n");
    detail::write_file(dir_ / "comm.csv", comm_csv(result.logs));
    if (!result.logs.empty()) {
      PlotInputs in;
      in.logs = &result.logs;
      in.report = &result.report;
      in.dim = dim;
      in.max_tasks_per_client = max_tasks_per_client;
      in.similarity = cfg.algorithm == Algorithm::kMatu ? &result.final_similarity : nullptr;
      emit_plotdata(in, dir_);
    }
  }

 private:
  std::filesystem::path dir_;
  std::ofstream rounds_;
};

}  // namespace matu

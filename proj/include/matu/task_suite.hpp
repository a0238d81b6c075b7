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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "matu/local_training.hpp"
#include "matu/random.hpp"
#include "matu/text.hpp"

namespace matu {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double draw(rng::Stream& s) const { return lo + (hi - lo) * s.uniform(); }
  friend bool operator==(const Range&, const Range&) = default;
};

// Planted cluster structure. A block of coordinates is split into one part
// per cluster; on part p, cluster p carries sign +r_j and every other cluster
// carries -r_j (r_j a shared random sign). Two clusters are therefore exactly
// opposed on the block; three have pairwise sign correlation -1/3 there.
// Magnitudes are drawn from `dominant` on a task's own part, `shared` on the
// other parts, and `personal` on the coordinates outside the block, where
// signs are task-specific.
struct PlantedSpec {
  std::uint64_t seed = 0;
  std::size_t clusters = 3;
  double block_fraction = 1.0;
  Range dominant{1.0, 2.0};
  Range shared{0.01, 0.05};
  Range personal{0.01, 0.05};
  // When set, block magnitudes come from a per-cluster template scaled by
  // 1 + jitter * U(-1, 1); otherwise every task draws its own.
  std::optional<double> jitter = 0.1;

  void validate() const {
    if (clusters == 0 || clusters > 3) {
      throw std::invalid_argument("planted: clusters must be 1, 2 or 3");
    }
    if (!(block_fraction >= 0.0 && block_fraction <= 1.0)) {
      throw std::invalid_argument("planted: block_fraction must lie in [0, 1]");
    }
    for (const Range* r : {&dominant, &shared, &personal}) {
      if (!(r->lo > 0.0 && r->hi >= r->lo)) {
        throw std::invalid_argument("planted: magnitude ranges need 0 < lo <= hi");
      }
    }
    if (jitter && !(*jitter >= 0.0 && *jitter < 1.0)) {
      throw std::invalid_argument("planted: jitter must lie in [0, 1)");
    }
  }

  friend bool operator==(const PlantedSpec&, const PlantedSpec&) = default;
};

struct CurvatureSpec {
  enum class Kind { kConstant, kUniform, kList } kind = Kind::kUniform;
  Range range{0.5, 1.5};       // kConstant uses lo
  std::vector<double> values;  // kList

  friend bool operator==(const CurvatureSpec&, const CurvatureSpec&) = default;
};

struct TaskDecl {
  TaskId id = 0;
  int cluster = 0;
  CurvatureSpec curvature;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> optimum;  // explicit; planted otherwise

  friend bool operator==(const TaskDecl&, const TaskDecl&) = default;
};

struct SuiteSpec {
  std::string name = "planted";
  std::size_t dim = 64;
  std::optional<PlantedSpec> planted;
  std::vector<TaskDecl> tasks;

  friend bool operator==(const SuiteSpec&, const SuiteSpec&) = default;
};

struct TaskSuite {
  std::string name;
  std::size_t dim = 0;
  std::vector<SyntheticTask> tasks;

  const SyntheticTask& task(TaskId id) const { return tasks.at(static_cast<std::size_t>(id)); }
  double max_curvature() const {
    double m = 0.0;
    for (const auto& t : tasks) m = std::max(m, t.max_curvature());
    return m;
  }
};

namespace detail {

struct PlantedLayout {
  std::vector<int> part;       // -1 outside the block
  std::vector<int> base_sign;  // r_j
};

inline PlantedLayout planted_layout(const PlantedSpec& spec, std::size_t dim) {
  rng::Stream s(rng::derive_seed(spec.seed, rng::Purpose::kSuite, {0}));
  std::vector<std::size_t> order(dim);
  for (std::size_t j = 0; j < dim; ++j) order[j] = j;
  for (std::size_t j = dim; j > 1; --j) std::swap(order[j - 1], order[s.below(j)]);

  const auto block = static_cast<std::size_t>(std::llround(spec.block_fraction * static_cast<double>(dim)));
  PlantedLayout layout{std::vector<int>(dim, -1), std::vector<int>(dim, 1)};
  for (std::size_t i = 0; i < block; ++i) {
    layout.part[order[i]] = static_cast<int>(i * spec.clusters / block);
  }
  for (std::size_t j = 0; j < dim; ++j) layout.base_sign[j] = (s.next_u64() & 1U) ? 1 : -1;
  return layout;
}

inline std::vector<double> planted_optimum(const PlantedSpec& spec, const PlantedLayout& layout,
                                           int cluster, std::uint64_t task_seed) {
  rng::Stream s(rng::derive_seed(spec.seed, rng::Purpose::kSuite, {1, task_seed}));
  const std::size_t dim = layout.part.size();
  rng::Stream tmpl(rng::derive_seed(spec.seed, rng::Purpose::kSuite,
                                    {3, static_cast<std::uint64_t>(cluster)}));
  auto block_magnitude = [&](const Range& r) {
    if (!spec.jitter) return r.draw(s);
    const double base = r.draw(tmpl);
    return base * (1.0 + *spec.jitter * (2.0 * s.uniform() - 1.0));
  };
  std::vector<double> opt(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const int p = layout.part[j];
    if (p < 0) {
      const double sign = (s.next_u64() & 1U) ? 1.0 : -1.0;
      opt[j] = sign * spec.personal.draw(s);
    } else if (p == cluster) {
      opt[j] = layout.base_sign[j] * block_magnitude(spec.dominant);
    } else {
      opt[j] = -layout.base_sign[j] * block_magnitude(spec.shared);
    }
  }
  return opt;
}

inline std::vector<double> curvature_values(const CurvatureSpec& spec, std::size_t dim,
                                            std::uint64_t suite_seed, std::uint64_t task_seed) {
  switch (spec.kind) {
    case CurvatureSpec::Kind::kConstant:
      return std::vector<double>(dim, spec.range.lo);
    case CurvatureSpec::Kind::kList:
      if (spec.values.size() != dim) {
        throw std::invalid_argument("curvature list has " + std::to_string(spec.values.size()) +
                                    " entries, expected " + std::to_string(dim));
      }
      return spec.values;
    case CurvatureSpec::Kind::kUniform:
    default: {
      rng::Stream s(rng::derive_seed(suite_seed, rng::Purpose::kSuite, {2, task_seed}));
      std::vector<double> c(dim);
      for (auto& x : c) x = spec.range.draw(s);
      return c;
    }
  }
}

}  // namespace detail

inline TaskSuite build_suite(const SuiteSpec& spec) {
  if (spec.dim == 0) throw std::invalid_argument("suite: dim must be positive");
  if (spec.tasks.empty()) throw std::invalid_argument("suite: no tasks");
  std::optional<detail::PlantedLayout> layout;
  if (spec.planted) {
    spec.planted->validate();
    layout = detail::planted_layout(*spec.planted, spec.dim);
  }
  const std::uint64_t suite_seed = spec.planted ? spec.planted->seed : 0;

  TaskSuite suite{spec.name, spec.dim, {}};
  for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
    const TaskDecl& decl = spec.tasks[i];
    if (decl.id != i) {
      throw std::invalid_argument("suite: task ids must be 0..T-1 in order (got " +
                                  std::to_string(decl.id) + " at position " + std::to_string(i) + ")");
    }
    std::vector<double> opt;
    if (decl.optimum) {
      if (decl.optimum->size() != spec.dim) {
        throw std::invalid_argument("suite: task " + std::to_string(decl.id) + " optimum has " +
                                    std::to_string(decl.optimum->size()) + " entries");
      }
      opt = *decl.optimum;
    } else {
      if (!layout) {
        throw std::invalid_argument("suite: task " + std::to_string(decl.id) +
                                    " asks for a planted optimum but no planted line is given");
      }
      if (decl.cluster < 0 || static_cast<std::size_t>(decl.cluster) >= spec.planted->clusters) {
        throw std::invalid_argument("suite: task " + std::to_string(decl.id) +
                                    " cluster out of range");
      }
      opt = detail::planted_optimum(*spec.planted, *layout, decl.cluster, decl.seed);
    }
    SyntheticTask task{decl.id, TaskVector(std::move(opt)),
                       detail::curvature_values(decl.curvature, spec.dim, suite_seed, decl.seed),
                       decl.cluster};
    task.validate();
    suite.tasks.push_back(std::move(task));
  }
  return suite;
}

// Planted suite with `num_tasks` tasks spread over contiguous cluster ranges.
inline SuiteSpec planted_suite_spec(std::size_t num_tasks, std::size_t dim, PlantedSpec planted,
                                    CurvatureSpec curvature = {}) {
  SuiteSpec spec;
  spec.name = "planted";
  spec.dim = dim;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    TaskDecl decl;
    decl.id = t;
    decl.cluster = static_cast<int>(t * planted.clusters / num_tasks);
    decl.curvature = curvature;
    decl.seed = 1000 + t;
    spec.tasks.push_back(std::move(decl));
  }
  spec.planted = std::move(planted);
  return spec;
}

// --- suite text format ----------------------------------------------------------
//
//   # comment
//   suite <name>
//   dim <d>
//   planted seed=<s> clusters=<c> block_fraction=<f> dominant=<lo:hi> shared=<lo:hi> personal=<lo:hi> [jitter=<j>]
//   task <id> cluster=<c> curvature=<const:v|uniform:lo:hi|list:v1,v2,..> seed=<s> [optimum=v1,v2,..]

namespace detail {

inline Range parse_range(std::string_view text, const std::string& where) {
  const auto parts = text::split(text, ':');
  if (parts.size() != 2) throw std::invalid_argument(where + ": expected lo:hi, got '" + std::string(text) + "'");
  return Range{text::parse_double(parts[0], where), text::parse_double(parts[1], where)};
}

inline std::vector<double> parse_list(std::string_view text, const std::string& where) {
  std::vector<double> out;
  for (const auto& p : text::split(text, ',')) out.push_back(text::parse_double(p, where));
  return out;
}

inline CurvatureSpec parse_curvature(std::string_view text, const std::string& where) {
  CurvatureSpec c;
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  const std::string_view rest = colon == std::string_view::npos ? "" : text.substr(colon + 1);
  if (kind == "const") {
    c.kind = CurvatureSpec::Kind::kConstant;
    c.range.lo = c.range.hi = text::parse_double(rest, where);
  } else if (kind == "uniform") {
    c.kind = CurvatureSpec::Kind::kUniform;
    c.range = parse_range(rest, where);
  } else if (kind == "list") {
    c.kind = CurvatureSpec::Kind::kList;
    c.values = parse_list(rest, where);
  } else {
    throw std::invalid_argument(where + ": unknown curvature kind '" + std::string(kind) + "'");
  }
  return c;
}

inline std::string format_curvature(const CurvatureSpec& c) {
  switch (c.kind) {
    case CurvatureSpec::Kind::kConstant:
      return "const:" + text::format_double(c.range.lo);
    case CurvatureSpec::Kind::kList:
      return "list:" + text::join_doubles(c.values, ",");
    case CurvatureSpec::Kind::kUniform:
    default:
      return "uniform:" + text::format_double(c.range.lo) + ":" + text::format_double(c.range.hi);
  }
}

inline std::string format_range(const Range& r) {
  return text::format_double(r.lo) + ":" + text::format_double(r.hi);
}

}  // namespace detail

inline SuiteSpec parse_suite(std::string_view source) {
  SuiteSpec spec;
  spec.tasks.clear();
  bool have_dim = false;
  std::size_t line_no = 0;
  for (const auto& raw : text::split_lines(source)) {
    ++line_no;
    const std::string line = text::strip_comment(raw);
    const auto words = text::split_ws(line);
    if (words.empty()) continue;
    const std::string where = "suite line " + std::to_string(line_no);
    const std::string& head = words[0];

    if (head == "suite") {
      if (words.size() != 2) throw std::invalid_argument(where + ": expected 'suite <name>'");
      spec.name = words[1];
    } else if (head == "dim") {
      if (words.size() != 2) throw std::invalid_argument(where + ": expected 'dim <d>'");
      spec.dim = static_cast<std::size_t>(text::parse_uint(words[1], where));
      have_dim = true;
    } else if (head == "planted") {
      PlantedSpec p;
      p.jitter.reset();  // absent key: every task draws its own magnitudes
      for (std::size_t i = 1; i < words.size(); ++i) {
        const auto [key, value] = text::split_kv(words[i], where);
        if (key == "seed") p.seed = text::parse_uint(value, where);
        else if (key == "clusters") p.clusters = static_cast<std::size_t>(text::parse_uint(value, where));
        else if (key == "block_fraction") p.block_fraction = text::parse_double(value, where);
        else if (key == "dominant") p.dominant = detail::parse_range(value, where);
        else if (key == "shared") p.shared = detail::parse_range(value, where);
        else if (key == "personal") p.personal = detail::parse_range(value, where);
        else if (key == "jitter") p.jitter = text::parse_double(value, where);
        else throw std::invalid_argument(where + ": unknown planted key '" + key + "'");
      }
      p.validate();
      spec.planted = p;
    } else if (head == "task") {
      if (words.size() < 2) throw std::invalid_argument(where + ": expected 'task <id> ...'");
      TaskDecl decl;
      decl.id = text::parse_uint(words[1], where);
      for (std::size_t i = 2; i < words.size(); ++i) {
        const auto [key, value] = text::split_kv(words[i], where);
        if (key == "cluster") decl.cluster = static_cast<int>(text::parse_uint(value, where));
        else if (key == "curvature") decl.curvature = detail::parse_curvature(value, where);
        else if (key == "seed") decl.seed = text::parse_uint(value, where);
        else if (key == "optimum") decl.optimum = detail::parse_list(value, where);
        else throw std::invalid_argument(where + ": unknown task key '" + key + "'");
      }
      spec.tasks.push_back(std::move(decl));
    } else {
      throw std::invalid_argument(where + ": unknown directive '" + head + "'");
    }
  }
  if (!have_dim) throw std::invalid_argument("suite: missing 'dim' line");
  if (spec.tasks.empty()) throw std::invalid_argument("suite: no task lines");
  return spec;
}

inline std::string emit_suite(const SuiteSpec& spec) {
  std::ostringstream out;
  out << "suite " << spec.name << "\n";
  out << "dim " << spec.dim << "\n";
  if (spec.planted) {
    const auto& p = *spec.planted;
    out << "planted seed=" << p.seed << " clusters=" << p.clusters
        << " block_fraction=" << text::format_double(p.block_fraction)
        << " dominant=" << detail::format_range(p.dominant)
        << " shared=" << detail::format_range(p.shared)
        << " personal=" << detail::format_range(p.personal);
    if (p.jitter) out << " jitter=" << text::format_double(*p.jitter);
    out << "\n";
  }
  for (const auto& t : spec.tasks) {
    out << "task " << t.id << " cluster=" << t.cluster
        << " curvature=" << detail::format_curvature(t.curvature) << " seed=" << t.seed;
    if (t.optimum) out << " optimum=" << text::join_doubles(*t.optimum, ",");
    out << "\n";
  }
  return out.str();
}

}  // namespace matu

// Copyright 2026 The RCO Authors
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

// File formats: problem JSON, step-trace JSONL and the summary CSV.
// The schemas are documented in docs/formats.md.

#ifndef RCO_IO_HPP_
#define RCO_IO_HPP_

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "rco/core.hpp"
#include "rco/optim.hpp"
#include "rco/scenarios.hpp"

namespace rco {

using Json = nlohmann::json;

inline constexpr const char* kProblemSchema = "rco.problem/1";

namespace detail {

inline Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  }
  return rows;
}

inline Vector vector_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix matrix_from(const Json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) {
      throw Error(ErrorCode::kConfigError, "ragged values matrix");
    }
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return m;
}

}  // namespace detail

inline Json spec_to_json(const ScenarioSpec& s) {
  return {{"family", s.family},
          {"num_groups", s.num_groups},
          {"num_options", s.num_options},
          {"seed", s.seed},
          {"budget_fraction", s.budget_fraction},
          {"noise", s.noise},
          {"tie_width", s.tie_width},
          {"under_budget_ratio", s.under_budget_ratio},
          {"normalize_weights", s.normalize_weights}};
}

/// Overrides fields of `base` with any keys present in `j`.
inline ScenarioSpec spec_from_json(const Json& j, ScenarioSpec base) {
  try {
    if (j.contains("family")) base.family = j.at("family").get<std::string>();
    if (j.contains("num_groups")) base.num_groups = j.at("num_groups").get<int>();
    if (j.contains("num_options")) base.num_options = j.at("num_options").get<int>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("budget_fraction")) base.budget_fraction = j.at("budget_fraction").get<double>();
    if (j.contains("noise")) base.noise = j.at("noise").get<double>();
    if (j.contains("tie_width")) base.tie_width = j.at("tie_width").get<double>();
    if (j.contains("under_budget_ratio")) base.under_budget_ratio = j.at("under_budget_ratio").get<double>();
    if (j.contains("normalize_weights")) base.normalize_weights = j.at("normalize_weights").get<bool>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("malformed scenario spec: ") + e.what());
  }
  return base;
}

inline Json problem_to_json(const BudgetProblem& p) {
  Json j;
  j["schema"] = kProblemSchema;
  j["num_groups"] = p.num_groups();
  j["num_options"] = p.num_options();
  j["option_costs"] = detail::vector_json(p.option_costs);
  j["group_weights"] = detail::vector_json(p.group_weights);
  j["budget"] = p.budget;
  j["dp_scale"] = default_dp_scale(p);
  if (p.values) j["values"] = detail::matrix_json(*p.values);
  return j;
}

inline Json scenario_to_json(const Scenario& sc) {
  Json j = problem_to_json(sc.problem);
  j["family"] = sc.spec.family;
  j["seed"] = sc.spec.seed;
  j["spec"] = spec_to_json(sc.spec);
  j["attempts"] = sc.attempts;
  Json checks = Json::array();
  for (const auto& c : sc.checks) {
    checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"passed", c.passed}});
  }
  j["contract_checks"] = checks;
  return j;
}

inline Json multi_to_json(const MultiScenario& m) {
  Json j = problem_to_json(m.base);
  j["family"] = "multi";
  j["seed"] = m.seed;
  j["gram_condition"] = m.gram_condition;
  Json cs = Json::array();
  for (const auto& c : m.constraints.constraints) {
    cs.push_back({{"option_costs", detail::vector_json(c.option_costs)}, {"budget", c.budget}});
  }
  j["constraints"] = cs;
  return j;
}

inline BudgetProblem problem_from_json(const Json& j) {
  try {
    BudgetProblem p;
    p.option_costs = detail::vector_from(j.at("option_costs"));
    p.group_weights = detail::vector_from(j.at("group_weights"));
    p.budget = j.at("budget").get<double>();
    if (j.contains("dp_scale")) p.dp_scale = j.at("dp_scale").get<double>();
    if (j.contains("values")) p.values = detail::matrix_from(j.at("values"));
    return p;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("malformed problem JSON: ") + e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfigError, "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write to '" + path + "' failed");
}

inline void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

inline Json step_record_to_json(const StepRecord& r) {
  Json j = {{"step", r.step},
            {"loss", r.loss},
            {"expected_cost", r.expected_cost},
            {"violation", r.violation},
            {"retraction_iters", r.retraction_iters},
            {"grad_norm", r.grad_norm},
            {"temperature", r.temperature}};
  if (r.slack) j["slack"] = *r.slack;
  if (r.gap_pct) j["gap_pct"] = *r.gap_pct;
  if (!r.constraint_violations.empty()) j["constraint_violations"] = r.constraint_violations;
  return j;
}

inline std::string trace_to_jsonl(const RunTrace& trace) {
  std::string out;
  for (const auto& r : trace.steps) {
    out += step_record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

/// Shortest round-trip representation; identical doubles print identically.
inline std::string format_double(double x) {
  return Json(x).dump();
}

struct SummaryRow {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double final_gap_pct = 0.0;
  double mean_violation = 0.0;
  std::optional<int> steps_to_1pct;
  int max_retraction_iters = 0;
  double final_value = 0.0;
  double oracle_value = 0.0;
  int steps = 0;
  double lambda = 0.0;      // tuned penalty weight (lagrangian rows), else 0
  double wall_seconds = 0.0;  // written to timing.csv, not summary.csv
};

inline constexpr const char* kSummaryHeader =
    "scenario,method,seed,status,final_gap_pct,mean_violation,steps_to_1pct,"
    "max_retraction_iters,final_value,oracle_value,steps,lambda";

inline std::string summary_csv_line(const SummaryRow& r) {
  std::ostringstream os;
  os << r.scenario << ',' << r.method << ',' << r.seed << ',' << r.status << ','
     << format_double(r.final_gap_pct) << ',' << format_double(r.mean_violation) << ','
     << (r.steps_to_1pct ? std::to_string(*r.steps_to_1pct) : std::string("never")) << ','
     << r.max_retraction_iters << ',' << format_double(r.final_value) << ','
     << format_double(r.oracle_value) << ',' << r.steps << ',' << format_double(r.lambda);
  return os.str();
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& r : rows) out += summary_csv_line(r) + "\n";
  return out;
}

inline std::string timing_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "scenario,method,seed,wall_seconds\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
    out += r.scenario + "," + r.method + "," + std::to_string(r.seed) + "," + buf + "\n";
  }
  return out;
}

}  // namespace rco

#endif  // RCO_IO_HPP_

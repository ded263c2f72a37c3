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

// Benchmark harness: runs constraint-handling methods on generated
// instances, measures gap to the DP optimum, and schedules independent
// (method, seed) jobs across worker threads.

#ifndef RCO_BENCH_HPP_
#define RCO_BENCH_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rco/baselines.hpp"
#include "rco/io.hpp"
#include "rco/optim.hpp"
#include "rco/scenarios.hpp"

namespace rco {

enum class Method { kManifold, kManifoldSlack, kLagrangian, kAugmented };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kManifold: return "manifold";
    case Method::kManifoldSlack: return "manifold-slack";
    case Method::kLagrangian: return "lagrangian";
    case Method::kAugmented: return "augmented";
  }
  return "?";
}

inline std::vector<Method> all_methods() {
  return {Method::kManifold, Method::kManifoldSlack, Method::kLagrangian, Method::kAugmented};
}

/// Parses a method name; "all" expands to the four methods.
inline std::vector<Method> parse_methods(const std::string& name) {
  if (name == "all") return all_methods();
  for (Method m : all_methods()) {
    if (name == method_name(m)) return {m};
  }
  throw Error(ErrorCode::kConfigError, "unknown method '" + name + "'");
}

inline constexpr double kGapThresholdPct = 1.0;

/// Steps needed before the recorded gap first drops to `threshold` percent
/// (0 if the initial point already qualifies).
inline std::optional<int> steps_to_gap(const RunResult& run, double threshold = kGapThresholdPct) {
  if (run.initial_gap_pct && *run.initial_gap_pct <= threshold) return 0;
  for (const auto& r : run.trace.steps) {
    if (r.gap_pct && *r.gap_pct <= threshold) return r.step + 1;
  }
  return std::nullopt;
}

inline int max_retraction_iters(const RunTrace& trace) {
  int m = 0;
  for (const auto& r : trace.steps) m = std::max(m, r.retraction_iters);
  return m;
}

struct Instance {
  Scenario scenario;
  DpSolution oracle;
};

inline Instance make_instance(const std::string& family, std::uint64_t seed) {
  Instance inst;
  inst.scenario = generate(family, seed);
  inst.oracle = solve_oracle(inst.scenario.problem);
  return inst;
}

struct JobOutput {
  SummaryRow row;
  RunResult run;
};

/// Runs one method on one instance from uniform logits and summarizes it.
inline JobOutput run_method(const Instance& inst, Method method, const RcoConfig& config,
                            double lambda, const AugmentedSchedule& schedule = {}) {
  const BudgetProblem& problem = inst.scenario.problem;
  const LinearValueObjective objective(*problem.values);
  const Matrix logits0 = Matrix::Zero(static_cast<Eigen::Index>(problem.num_groups()),
                                      static_cast<Eigen::Index>(problem.num_options()));
  Tracking tracking;
  tracking.oracle_value = inst.oracle.score;

  const auto start = std::chrono::steady_clock::now();
  JobOutput out;
  switch (method) {
    case Method::kManifold: out.run = run_rco(problem, objective, config, logits0, tracking); break;
    case Method::kManifoldSlack: out.run = run_rco_slack(problem, objective, config, logits0, tracking); break;
    case Method::kLagrangian:
    case Method::kAugmented: {
      BaselineConfig b;
      b.method = method == Method::kLagrangian ? PenaltyMethod::kLagrangian : PenaltyMethod::kAugmented;
      b.lambda = lambda;
      b.schedule = schedule;
      out.run = run_baseline(problem, objective, b, config, logits0, tracking);
      break;
    }
  }
  const auto stop = std::chrono::steady_clock::now();

  SummaryRow& row = out.row;
  row.scenario = inst.scenario.spec.family;
  row.method = method_name(method);
  row.seed = inst.scenario.spec.seed;
  row.final_value = assignment_value(out.run.assignment, *problem.values);
  row.oracle_value = inst.oracle.score;
  row.final_gap_pct = gap_percent(row.oracle_value, row.final_value);
  row.mean_violation = mean_violation(out.run.trace);
  row.steps_to_1pct = steps_to_gap(out.run);
  row.max_retraction_iters = max_retraction_iters(out.run.trace);
  row.steps = config.steps;
  row.lambda = method == Method::kLagrangian ? lambda : 0.0;
  row.wall_seconds = std::chrono::duration<double>(stop - start).count();
  return out;
}

/// Runs `count` callables on up to `jobs` threads; exceptions are captured
/// per task.
inline std::vector<std::exception_ptr> run_parallel(std::size_t count, int jobs,
                                                    const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return errors;
}

inline std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

inline constexpr std::uint64_t kHeldOutSeedOffset = 1000;

struct BenchRequest {
  std::string family;
  std::vector<Method> methods = all_methods();
  std::uint64_t base_seed = 1;
  int instances = 3;
  RcoConfig config;
  std::optional<double> lambda;  // fixed penalty weight; tuned when empty
  AugmentedSchedule schedule;
  int jobs = 1;
  /// Called once per finished job (in completion order, serialized).
  std::function<void(const JobOutput&)> on_job;
};

struct BenchResult {
  std::vector<SummaryRow> rows;   // methods-major, then seeds, in request order
  std::vector<RunTrace> traces;   // parallel to rows
  std::optional<LambdaTuning> tuning;
  int failures = 0;
};

/// Lagrangian penalty weight for a family, tuned on the held-out seed
/// base_seed + 1000 over the documented grid.
inline LambdaTuning tune_lambda_for(const std::string& family, std::uint64_t base_seed,
                                    const RcoConfig& config) {
  const Instance held = make_instance(family, base_seed + kHeldOutSeedOffset);
  const BudgetProblem& p = held.scenario.problem;
  const LinearValueObjective objective(*p.values);
  const Matrix logits0 = Matrix::Zero(static_cast<Eigen::Index>(p.num_groups()),
                                      static_cast<Eigen::Index>(p.num_options()));
  return tune_lambda(p, objective, config, held.oracle.score, logits0);
}

inline BenchResult run_bench(const BenchRequest& req) {
  BenchResult out;
  const bool needs_lambda =
      std::find(req.methods.begin(), req.methods.end(), Method::kLagrangian) != req.methods.end();
  double lambda = req.lambda.value_or(1.0);
  if (needs_lambda && !req.lambda) {
    out.tuning = tune_lambda_for(req.family, req.base_seed, req.config);
    lambda = out.tuning->lambda;
  }

  std::vector<std::optional<Instance>> instances(static_cast<std::size_t>(req.instances));
  auto inst_errors = run_parallel(instances.size(), req.jobs, [&](std::size_t i) {
    instances[i] = make_instance(req.family, req.base_seed + i);
  });

  const std::size_t total = req.methods.size() * instances.size();
  out.rows.resize(total);
  out.traces.resize(total);
  std::mutex report;
  auto errors = run_parallel(total, req.jobs, [&](std::size_t idx) {
    const Method method = req.methods[idx / instances.size()];
    const std::size_t seed_idx = idx % instances.size();
    SummaryRow& row = out.rows[idx];
    row.scenario = req.family;
    row.method = method_name(method);
    row.seed = req.base_seed + seed_idx;
    row.steps = req.config.steps;
    if (inst_errors[seed_idx]) std::rethrow_exception(inst_errors[seed_idx]);
    JobOutput job = run_method(*instances[seed_idx], method, req.config, lambda, req.schedule);
    row = job.row;
    if (req.on_job) {
      std::lock_guard<std::mutex> lock(report);
      req.on_job(job);
    }
    out.traces[idx] = std::move(job.run.trace);
  });
  for (std::size_t i = 0; i < total; ++i) {
    if (errors[i]) {
      out.rows[i].status = "error: " + describe(errors[i]);
      for (char& c : out.rows[i].status) {
        if (c == ',' || c == '\n') c = ';';
      }
      ++out.failures;
    }
  }
  return out;
}

inline constexpr double kMultiLambda = 10.0;

struct MultiRun {
  std::string method;
  RunResult run;
  double wall_seconds = 0.0;
};

/// The q-constraint comparison: manifold (Newton retraction) against both
/// penalty baselines from the same uniform start.
inline std::vector<MultiRun> run_multi_comparison(const MultiScenario& inst, const RcoConfig& config,
                                                  double lambda = kMultiLambda,
                                                  const AugmentedSchedule& schedule = {}) {
  const LinearValueObjective objective(*inst.base.values);
  const Matrix logits0 = Matrix::Zero(static_cast<Eigen::Index>(inst.base.num_groups()),
                                      static_cast<Eigen::Index>(inst.base.num_options()));
  std::vector<MultiRun> out;
  auto timed = [&](std::string name, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    MultiRun r{std::move(name), fn(), 0.0};
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  };
  timed(method_name(Method::kManifold),
        [&] { return run_rco_multi(inst.base, inst.constraints, objective, config, logits0); });
  BaselineConfig b;
  b.lambda = lambda;
  b.schedule = schedule;
  b.method = PenaltyMethod::kLagrangian;
  timed(method_name(Method::kLagrangian),
        [&] { return run_baseline_multi(inst.base, inst.constraints, objective, b, config, logits0); });
  b.method = PenaltyMethod::kAugmented;
  timed(method_name(Method::kAugmented),
        [&] { return run_baseline_multi(inst.base, inst.constraints, objective, b, config, logits0); });
  return out;
}

/// Per-step signed violations C_j - b_j, one column per constraint.
inline std::string violations_csv(const RunTrace& trace, std::size_t q) {
  std::string out = "step";
  for (std::size_t j = 0; j < q; ++j) out += ",c" + std::to_string(j);
  out += '\n';
  for (const auto& r : trace.steps) {
    out += std::to_string(r.step);
    for (double v : r.constraint_violations) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

}  // namespace rco

#endif  // RCO_BENCH_HPP_

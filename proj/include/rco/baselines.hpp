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

// Penalty-based constraint handling on the same gradient and Adam substrate
// as the manifold optimizer: quadratic penalty lambda (C - B)^2 and an
// augmented Lagrangian with multiplier and penalty updates. Neither projects
// nor retracts.

#ifndef RCO_BASELINES_HPP_
#define RCO_BASELINES_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rco/core.hpp"
#include "rco/knapsack.hpp"
#include "rco/manifold.hpp"
#include "rco/optim.hpp"

namespace rco {

enum class PenaltyMethod { kLagrangian, kAugmented };

/// Augmented-Lagrangian schedule: every `steps_per_update` steps the
/// multipliers move by rho (C - B); rho grows by `growth` whenever the mean
/// |violation| of the finished epoch is not below `shrink` times that of the
/// previous epoch.
struct AugmentedSchedule {
  int steps_per_update = 50;
  double rho0 = 1.0;
  double growth = 2.0;
  double shrink = 0.5;
  double rho_max = 1e4;
};

struct PenaltyState {
  double lambda = 1.0;          // quadratic mode
  std::vector<double> mu;       // augmented mode, one per constraint
  double rho = 1.0;
  AugmentedSchedule schedule;
  int steps_in_epoch = 0;
  double epoch_violation_sum = 0.0;
  std::optional<double> previous_epoch_violation;
  int updates = 0;
};

inline PenaltyState make_augmented_state(std::size_t q, AugmentedSchedule schedule = {}) {
  PenaltyState s;
  s.mu.assign(q, 0.0);
  s.rho = schedule.rho0;
  s.schedule = schedule;
  return s;
}

/// objective_grad + 2 lambda (C - B) grad C.
inline Matrix lagrangian_gradient(const Matrix& logits, const BudgetProblem& problem,
                                  const Matrix& objective_grad, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "penalty weight must be non-negative");
  const double r = expected_cost(logits, problem) - problem.budget;
  if (lambda == 0.0 || r == 0.0) return objective_grad;
  return objective_grad + 2.0 * lambda * r * constraint_normal(logits, problem).entries;
}

/// Sum of quadratic penalties over every constraint of `set`.
inline Matrix lagrangian_gradient(const Matrix& logits, const ConstraintSet& set,
                                  const Vector& weights, const Matrix& objective_grad,
                                  double lambda) {
  Matrix out = objective_grad;
  for (const auto& c : set.constraints) {
    const double r = expected_cost(logits, c.option_costs, weights) - c.budget;
    out += 2.0 * lambda * r * constraint_normal(logits, c.option_costs, weights).entries;
  }
  return out;
}

namespace detail {

inline void advance_augmented(PenaltyState& state, const Vector& residuals) {
  state.epoch_violation_sum += residuals.cwiseAbs().sum() / static_cast<double>(residuals.size());
  ++state.steps_in_epoch;
  if (state.steps_in_epoch < state.schedule.steps_per_update) return;
  for (Eigen::Index j = 0; j < residuals.size(); ++j) {
    state.mu[static_cast<std::size_t>(j)] += state.rho * residuals[j];
  }
  const double mean = state.epoch_violation_sum / state.steps_in_epoch;
  if (state.previous_epoch_violation && mean > state.schedule.shrink * *state.previous_epoch_violation) {
    state.rho = std::min(state.rho * state.schedule.growth, state.schedule.rho_max);
  }
  state.previous_epoch_violation = mean;
  state.steps_in_epoch = 0;
  state.epoch_violation_sum = 0.0;
  ++state.updates;
}

}  // namespace detail

/// Gradient objective_grad + sum_j [mu_j + rho (C_j - b_j)] grad C_j at the
/// current point, then the multiplier/penalty bookkeeping for this step.
inline std::pair<Matrix, PenaltyState> augmented_lagrangian_step(const Matrix& logits,
                                                                 const ConstraintSet& set,
                                                                 const Vector& weights,
                                                                 const Matrix& objective_grad,
                                                                 PenaltyState state) {
  if (state.mu.size() != set.size()) state.mu.assign(set.size(), 0.0);
  Matrix grad = objective_grad;
  Vector residuals(static_cast<Eigen::Index>(set.size()));
  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto& c = set.constraints[j];
    const double r = expected_cost(logits, c.option_costs, weights) - c.budget;
    residuals[static_cast<Eigen::Index>(j)] = r;
    const double coef = state.mu[j] + state.rho * r;
    if (coef != 0.0) grad += coef * constraint_normal(logits, c.option_costs, weights).entries;
  }
  detail::advance_augmented(state, residuals);
  return {std::move(grad), std::move(state)};
}

inline ConstraintSet single_constraint(const BudgetProblem& problem) {
  ConstraintSet set;
  set.constraints.push_back({problem.option_costs, problem.budget});
  return set;
}

inline std::pair<Matrix, PenaltyState> augmented_lagrangian_step(const Matrix& logits,
                                                                 const BudgetProblem& problem,
                                                                 const Matrix& objective_grad,
                                                                 PenaltyState state) {
  return augmented_lagrangian_step(logits, single_constraint(problem), problem.group_weights,
                                   objective_grad, std::move(state));
}

struct BaselineConfig {
  PenaltyMethod method = PenaltyMethod::kLagrangian;
  double lambda = 1.0;
  AugmentedSchedule schedule;
};

namespace detail {

inline RunResult run_penalty(const BudgetProblem& problem, const ConstraintSet& set,
                             const Objective& objective, const RcoConfig& config,
                             const BaselineConfig& baseline, const Matrix& logits0,
                             const Tracking& tracking, bool multi) {
  validate_config(config);
  const Vector& w = problem.group_weights;
  std::optional<IntegerCostGrid> grid;
  if (config.gradient == GradientMode::kSte) grid = quantize_costs(problem);
  const IntegerCostGrid* grid_ptr = grid ? &*grid : nullptr;

  RcoState state;
  state.logits = logits0;
  state.adam = AdamState::zeros(logits0.rows(), logits0.cols(), config.adam);
  PenaltyState penalty = make_augmented_state(set.size(), baseline.schedule);
  penalty.lambda = baseline.lambda;
  const RngStream rng(config.seed);
  const TemperatureSchedule schedule = schedule_for(config);

  RunResult out;
  if (!multi && wants_gap(problem, tracking)) {
    out.initial_gap_pct = repaired_gap(state.logits, problem, *tracking.oracle_value);
  }
  out.trace.steps.reserve(static_cast<std::size_t>(config.steps));
  for (int t = 0; t < config.steps; ++t) {
    const double tau = temperature_at(schedule, state.step);
    GradientSample g = objective_gradient(state.logits, objective, config, grid_ptr, tau, rng, state.step);
    Matrix full;
    if (baseline.method == PenaltyMethod::kLagrangian) {
      full = lagrangian_gradient(state.logits, set, w, g.grad, baseline.lambda);
    } else {
      auto [grad, next] = augmented_lagrangian_step(state.logits, set, w, g.grad, std::move(penalty));
      full = std::move(grad);
      penalty = std::move(next);
    }
    StepRecord rec;
    rec.step = state.step;
    rec.loss = g.loss;
    rec.temperature = tau;
    rec.grad_norm = full.norm();
    state.logits = adam_step(state.logits, full, state.adam);
    ++state.step;

    const Vector residuals = constraint_residuals(state.logits, set, w);
    rec.expected_cost = residuals[0] + set.constraints.front().budget;
    if (multi) {
      rec.constraint_violations.assign(residuals.data(), residuals.data() + residuals.size());
      rec.violation = residuals.cwiseAbs().maxCoeff();
    } else {
      rec.violation = std::abs(residuals[0]);
      maybe_record_gap(rec, state.logits, problem, tracking, state.step);
    }
    out.trace.steps.push_back(std::move(rec));
    if (tracking.on_step) tracking.on_step({state, out.trace.steps.back()});
  }
  const Matrix p = softmax_rows(state.logits);
  out.assignment = multi ? greedy_repair_multi(p, set, w) : greedy_repair(p, problem);
  out.logits = std::move(state.logits);
  return out;
}

}  // namespace detail

/// Same Adam loop and trace schema as run_rco with the budget handled by a
/// penalty instead of projection, retraction and transport.
inline RunResult run_baseline(const BudgetProblem& problem, const Objective& objective,
                              const BaselineConfig& baseline, const RcoConfig& config,
                              const Matrix& logits0, const Tracking& tracking = {}) {
  validate_problem(problem);
  return detail::run_penalty(problem, single_constraint(problem), objective, config, baseline,
                             logits0, tracking, false);
}

inline RunResult run_baseline_multi(const BudgetProblem& problem, const ConstraintSet& set,
                                    const Objective& objective, const BaselineConfig& baseline,
                                    const RcoConfig& config, const Matrix& logits0,
                                    const Tracking& tracking = {}) {
  validate_constraints(set, problem.group_weights);
  return detail::run_penalty(problem, set, objective, config, baseline, logits0, tracking, true);
}

inline const std::vector<double>& lambda_grid() {
  static const std::vector<double> grid = {0.1, 1.0, 10.0, 100.0, 1000.0};
  return grid;
}

struct LambdaCandidate {
  double lambda = 0.0;
  double final_gap_pct = 0.0;
  double mean_violation = 0.0;
};

struct LambdaTuning {
  double lambda = 1.0;
  std::vector<LambdaCandidate> candidates;
};

inline double mean_violation(const RunTrace& trace) {
  if (trace.steps.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : trace.steps) s += r.violation;
  return s / static_cast<double>(trace.steps.size());
}

inline constexpr double kTuningMaxViolation = 0.5;

/// Picks lambda from the grid on a held-out instance: lowest final repaired
/// gap among candidates whose mean |violation| is at most 0.5, or the
/// smallest mean violation if none qualifies.
inline LambdaTuning tune_lambda(const BudgetProblem& heldout, const Objective& objective,
                                const RcoConfig& config, double oracle_value,
                                const Matrix& logits0,
                                const std::vector<double>& grid = lambda_grid()) {
  LambdaTuning out;
  for (double lambda : grid) {
    BaselineConfig b;
    b.method = PenaltyMethod::kLagrangian;
    b.lambda = lambda;
    RunResult r = run_baseline(heldout, objective, b, config, logits0);
    LambdaCandidate c;
    c.lambda = lambda;
    c.final_gap_pct = gap_percent(oracle_value, assignment_value(r.assignment, *heldout.values));
    c.mean_violation = mean_violation(r.trace);
    out.candidates.push_back(c);
  }
  const LambdaCandidate* best = nullptr;
  for (const auto& c : out.candidates) {
    if (c.mean_violation <= kTuningMaxViolation && (!best || c.final_gap_pct < best->final_gap_pct)) best = &c;
  }
  if (!best) {
    for (const auto& c : out.candidates) {
      if (!best || c.mean_violation < best->mean_violation) best = &c;
    }
  }
  out.lambda = best->lambda;
  return out;
}

}  // namespace rco

#endif  // RCO_BASELINES_HPP_

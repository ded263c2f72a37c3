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

// The optimization loop: Adam on budget-preserving directions, followed by a
// retraction back onto the budget manifold and transport of the first moment.

#ifndef RCO_OPTIM_HPP_
#define RCO_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rco/core.hpp"
#include "rco/knapsack.hpp"
#include "rco/manifold.hpp"
#include "rco/rng.hpp"
#include "rco/stochastic.hpp"

namespace rco {

struct AdamHyper {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix m;
  Matrix v;
  double m_slack = 0.0;  // moments of the slack coordinate (slack mode only)
  double v_slack = 0.0;
  int t = 0;
  AdamHyper hyper;

  static AdamState zeros(Eigen::Index rows, Eigen::Index cols, AdamHyper hyper = {}) {
    AdamState s;
    s.m = Matrix::Zero(rows, cols);
    s.v = Matrix::Zero(rows, cols);
    s.hyper = hyper;
    return s;
  }
};

/// Bias-corrected Adam update; mutates the moments and returns the new point.
inline Matrix adam_step(const Matrix& x, const Matrix& grad, AdamState& state) {
  const AdamHyper& h = state.hyper;
  ++state.t;
  state.m = h.beta1 * state.m + (1.0 - h.beta1) * grad;
  state.v = h.beta2 * state.v + (1.0 - h.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(h.beta1, state.t);
  const double c2 = 1.0 - std::pow(h.beta2, state.t);
  const auto m_hat = state.m.array() / c1;
  const auto v_hat = state.v.array() / c2;
  return (x.array() - h.lr * m_hat / (v_hat.sqrt() + h.eps)).matrix();
}

/// Adam on the scalar slack coordinate, sharing the step counter of `state`
/// (call after adam_step for the same iteration).
inline double adam_step_slack(double s, double grad, AdamState& state) {
  const AdamHyper& h = state.hyper;
  state.m_slack = h.beta1 * state.m_slack + (1.0 - h.beta1) * grad;
  state.v_slack = h.beta2 * state.v_slack + (1.0 - h.beta2) * grad * grad;
  const double m_hat = state.m_slack / (1.0 - std::pow(h.beta1, state.t));
  const double v_hat = state.v_slack / (1.0 - std::pow(h.beta2, state.t));
  return s - h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
}

enum class GradientMode { kRelaxed, kSte };
enum class ConstraintMode { kEquality, kSlack, kMulti };
enum class Extraction { kGreedyRepair, kDp };

struct RcoConfig {
  int steps = 5000;
  int gumbel_samples = 1;
  TemperatureSchedule schedule;  // total_steps is overwritten with `steps`
  RetractionOptions retraction;
  ConstraintMode mode = ConstraintMode::kEquality;
  GradientMode gradient = GradientMode::kRelaxed;
  Extraction extraction = Extraction::kGreedyRepair;
  AdamHyper adam;
  std::uint64_t seed = 0;
  bool parallel_samples = false;
  double newton_tol = 1e-11;
  int newton_max_iters = 20;
};

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  double expected_cost = 0.0;
  double violation = 0.0;
  int retraction_iters = 0;
  double grad_norm = 0.0;
  double temperature = 1.0;
  std::optional<double> slack;
  std::optional<double> gap_pct;
  std::vector<double> constraint_violations;  // multi mode; signed C_j - b_j
};

struct RunTrace {
  std::vector<StepRecord> steps;
};

struct RunResult {
  Assignment assignment;
  RunTrace trace;
  Matrix logits;
  std::optional<double> initial_gap_pct;
};

/// Mutable optimizer state for one run.
struct RcoState {
  Matrix logits;
  AdamState adam;
  double slack = 0.0;
  int step = 0;  // completed steps
};

/// Read-only view handed to an observer after every step.
struct StepObservation {
  const RcoState& state;
  const StepRecord& record;
};

/// Optional bookkeeping attached to a run.
struct Tracking {
  std::optional<double> oracle_value;  // enables gap_pct when values exist
  int gap_every = 1;
  std::function<void(const StepObservation&)> on_step;
};

/// Percentage shortfall of `value` below `oracle`.
inline double gap_percent(double oracle, double value) {
  return 100.0 * (oracle - value) / oracle;
}

/// Gap of the greedy-repaired argmax of softmax(logits).
inline double repaired_gap(const Matrix& logits, const BudgetProblem& problem, double oracle) {
  const Assignment z = greedy_repair(softmax_rows(logits), problem);
  return gap_percent(oracle, assignment_value(z, *problem.values));
}

/// Gradient of the objective with respect to the logits, as consumed by
/// every constraint-handling method: either the relaxed softmax gradient or
/// the Gumbel-STE average drawn from `rng.fork(step)`.
inline GradientSample objective_gradient(const Matrix& logits, const Objective& objective,
                                         const RcoConfig& config, const IntegerCostGrid* grid,
                                         double tau, const RngStream& rng, int step) {
  if (config.gradient == GradientMode::kRelaxed) return relaxed_gradient(logits, objective);
  if (grid == nullptr) throw Error(ErrorCode::kInvalidArgument, "STE gradients need a cost grid");
  SteGradient ste = ste_gradient(logits, objective, *grid, tau, config.gumbel_samples,
                                 rng.fork(static_cast<std::uint64_t>(step)),
                                 config.parallel_samples);
  return {std::move(ste.entries), ste.mean_loss};
}

inline TemperatureSchedule schedule_for(const RcoConfig& config) {
  TemperatureSchedule s = config.schedule;
  s.total_steps = config.steps;
  return s;
}

inline void validate_config(const RcoConfig& config) {
  if (config.steps < 0) throw Error(ErrorCode::kInvalidArgument, "steps must be non-negative");
  if (config.gumbel_samples < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one Gumbel sample");
  }
  if (!(config.adam.lr > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
}

/// One retraction from arbitrary finite logits onto C = B.
inline Matrix initialize_on_manifold(const Matrix& logits0, const BudgetProblem& problem,
                                     const RetractionOptions& opts = {}) {
  if (!logits0.allFinite()) throw Error(ErrorCode::kInvalidArgument, "non-finite initial logits");
  return retract_binary(logits0, problem, opts).logits;
}

/// One iteration on the budget manifold (equality or slack mode): gradient,
/// tangent projection, Adam, retraction, first-moment transport.
inline StepRecord rco_step(RcoState& state, const BudgetProblem& problem, const Objective& objective,
                           const RcoConfig& config, const IntegerCostGrid* grid,
                           const RngStream& rng) {
  const double tau = temperature_at(schedule_for(config), state.step);
  GradientSample grad = objective_gradient(state.logits, objective, config, grid, tau, rng, state.step);
  const Normal normal = constraint_normal(state.logits, problem);

  StepRecord rec;
  rec.step = state.step;
  rec.loss = grad.loss;
  rec.temperature = tau;

  if (config.mode == ConstraintMode::kSlack) {
    auto [g_tan, g_slack] = slack_project(grad.grad, normal, state.slack);
    rec.grad_norm = std::sqrt(g_tan.squaredNorm() + g_slack * g_slack);
    Matrix moved = adam_step(state.logits, g_tan, state.adam);
    adam_step_slack(state.slack, g_slack, state.adam);  // overwritten by the retraction below
    SlackRetractionResult r = slack_retract(moved, problem, config.retraction);
    state.logits = std::move(r.logits);
    state.slack = r.slack.s;
    rec.retraction_iters = r.report.iterations;
    const Normal next = constraint_normal(state.logits, problem);
    auto [m_tan, m_slack] = slack_project(state.adam.m, next, state.slack, state.adam.m_slack);
    state.adam.m = std::move(m_tan);
    state.adam.m_slack = m_slack;
    rec.expected_cost = expected_cost(state.logits, problem);
    rec.violation = std::abs(rec.expected_cost + state.slack * state.slack - problem.budget);
    rec.slack = state.slack;
  } else {
    const Matrix g_tan = tangent_project(grad.grad, normal);
    rec.grad_norm = g_tan.norm();
    Matrix moved = adam_step(state.logits, g_tan, state.adam);
    RetractionResult r = retract_binary(moved, problem, config.retraction);
    state.logits = std::move(r.logits);
    rec.retraction_iters = r.report.iterations;
    const Normal next = constraint_normal(state.logits, problem);
    state.adam.m = transport(state.adam.m, next);
    rec.expected_cost = expected_cost(state.logits, problem);
    rec.violation = std::abs(rec.expected_cost - problem.budget);
  }
  ++state.step;
  return rec;
}

namespace detail {

inline Assignment extract(const Matrix& logits, const BudgetProblem& problem, Extraction how,
                          const IntegerCostGrid* grid) {
  const Matrix p = softmax_rows(logits);
  if (how == Extraction::kDp) return extract_final(p, *grid).assignment;
  return greedy_repair(p, problem);
}

inline bool wants_gap(const BudgetProblem& problem, const Tracking& tracking) {
  return problem.values.has_value() && tracking.oracle_value.has_value();
}

inline void maybe_record_gap(StepRecord& rec, const Matrix& logits, const BudgetProblem& problem,
                             const Tracking& tracking, int completed) {
  if (!wants_gap(problem, tracking)) return;
  const int every = std::max(1, tracking.gap_every);
  if (completed % every == 0) rec.gap_pct = repaired_gap(logits, problem, *tracking.oracle_value);
}

}  // namespace detail

/// Full loop in equality or slack mode (config.mode).
inline RunResult run_rco(const BudgetProblem& problem, const Objective& objective,
                         const RcoConfig& config, const Matrix& logits0,
                         const Tracking& tracking = {}) {
  validate_problem(problem);
  validate_config(config);
  if (config.mode == ConstraintMode::kMulti) {
    throw Error(ErrorCode::kInvalidArgument, "use run_rco_multi for multi-constraint runs");
  }
  std::optional<IntegerCostGrid> grid;
  if (config.gradient == GradientMode::kSte || config.extraction == Extraction::kDp) {
    grid = quantize_costs(problem);
  }
  const IntegerCostGrid* grid_ptr = grid ? &*grid : nullptr;

  RcoState state;
  if (config.mode == ConstraintMode::kSlack) {
    SlackRetractionResult r = slack_retract(logits0, problem, config.retraction);
    state.logits = std::move(r.logits);
    state.slack = r.slack.s;
  } else {
    state.logits = initialize_on_manifold(logits0, problem, config.retraction);
  }
  state.adam = AdamState::zeros(state.logits.rows(), state.logits.cols(), config.adam);
  const RngStream rng(config.seed);

  RunResult out;
  if (detail::wants_gap(problem, tracking)) {
    out.initial_gap_pct = repaired_gap(state.logits, problem, *tracking.oracle_value);
  }
  out.trace.steps.reserve(static_cast<std::size_t>(config.steps));
  for (int t = 0; t < config.steps; ++t) {
    StepRecord rec = rco_step(state, problem, objective, config, grid_ptr, rng);
    detail::maybe_record_gap(rec, state.logits, problem, tracking, state.step);
    out.trace.steps.push_back(std::move(rec));
    if (tracking.on_step) tracking.on_step({state, out.trace.steps.back()});
  }
  out.assignment = detail::extract(state.logits, problem, config.extraction, grid_ptr);
  out.logits = std::move(state.logits);
  return out;
}

/// Inequality variant C(alpha) <= B through the slack coordinate.
inline RunResult run_rco_slack(const BudgetProblem& problem, const Objective& objective,
                               RcoConfig config, const Matrix& logits0,
                               const Tracking& tracking = {}) {
  config.mode = ConstraintMode::kSlack;
  return run_rco(problem, objective, config, logits0, tracking);
}

/// One iteration with q equality constraints. q = 1 uses the bisection
/// retraction, so it reproduces rco_step.
inline StepRecord rco_step_multi(RcoState& state, const BudgetProblem& problem,
                                 const ConstraintSet& set, const Objective& objective,
                                 const RcoConfig& config, const IntegerCostGrid* grid,
                                 const RngStream& rng) {
  const Vector& w = problem.group_weights;
  const double tau = temperature_at(schedule_for(config), state.step);
  GradientSample grad = objective_gradient(state.logits, objective, config, grid, tau, rng, state.step);
  const Matrix g_tan = multi_project(grad.grad, constraint_normals(state.logits, set, w));

  StepRecord rec;
  rec.step = state.step;
  rec.loss = grad.loss;
  rec.temperature = tau;
  rec.grad_norm = g_tan.norm();

  Matrix moved = adam_step(state.logits, g_tan, state.adam);
  if (set.size() == 1) {
    const auto& c = set.constraints.front();
    RetractionResult r = retract_binary(moved, c.option_costs, w, c.budget, config.retraction);
    state.logits = std::move(r.logits);
    rec.retraction_iters = r.report.iterations;
  } else {
    NewtonResult r = multi_retract_newton(moved, set, w, config.newton_tol, config.newton_max_iters);
    state.logits = std::move(r.logits);
    rec.retraction_iters = r.iterations;
  }
  state.adam.m = multi_project(state.adam.m, constraint_normals(state.logits, set, w));

  const Vector residuals = constraint_residuals(state.logits, set, w);
  rec.constraint_violations.assign(residuals.data(), residuals.data() + residuals.size());
  rec.violation = residuals.cwiseAbs().maxCoeff();
  rec.expected_cost = expected_cost(state.logits, set.constraints.front().option_costs, w);
  ++state.step;
  return rec;
}

/// Initial point for q constraints: bisection for q = 1, Newton otherwise.
inline Matrix initialize_on_constraints(const Matrix& logits0, const ConstraintSet& set,
                                        const Vector& weights, const RcoConfig& config) {
  if (set.size() == 1) {
    const auto& c = set.constraints.front();
    return retract_binary(logits0, c.option_costs, weights, c.budget, config.retraction).logits;
  }
  return multi_retract_newton(logits0, set, weights, config.newton_tol, config.newton_max_iters)
      .logits;
}

/// Loop with q simultaneous equality constraints. `problem` supplies the
/// groups, weights and values; its own costs and budget are not used.
/// The final assignment is the argmax of softmax(logits) repaired against
/// every constraint as an upper bound.
inline RunResult run_rco_multi(const BudgetProblem& problem, const ConstraintSet& set,
                               const Objective& objective, const RcoConfig& config,
                               const Matrix& logits0, const Tracking& tracking = {}) {
  validate_constraints(set, problem.group_weights);
  validate_config(config);
  if (set.slack_enabled) throw Error(ErrorCode::kInvalidArgument, "multi mode is equality-only");
  if (config.gradient == GradientMode::kSte) {
    throw Error(ErrorCode::kInvalidArgument, "multi-constraint runs support relaxed gradients only");
  }
  RcoState state;
  state.logits = initialize_on_constraints(logits0, set, problem.group_weights, config);
  state.adam = AdamState::zeros(state.logits.rows(), state.logits.cols(), config.adam);
  const RngStream rng(config.seed);

  RunResult out;
  out.trace.steps.reserve(static_cast<std::size_t>(config.steps));
  for (int t = 0; t < config.steps; ++t) {
    StepRecord rec = rco_step_multi(state, problem, set, objective, config, nullptr, rng);
    out.trace.steps.push_back(std::move(rec));
    if (tracking.on_step) tracking.on_step({state, out.trace.steps.back()});
  }
  out.assignment = greedy_repair_multi(softmax_rows(state.logits), set, problem.group_weights);
  out.logits = std::move(state.logits);
  return out;
}

}  // namespace rco

#endif  // RCO_OPTIM_HPP_

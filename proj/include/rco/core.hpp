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

// Problem definitions, matrix types, validation and the error type shared by
// the rest of the library.

#ifndef RCO_CORE_HPP_
#define RCO_CORE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rco {

/// Row-major N x K matrix; row i holds group i's K options.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  kInvalidArgument,
  kInfeasibleBudget,
  kDegenerateCosts,
  kNonPositiveWeight,
  kZeroNormal,
  kBracketExhausted,
  kDependentNormals,
  kNewtonDiverged,
  kGridTooLarge,
  kInfeasible,
  kTooLarge,
  kGenerationFailed,
  kIoError,
  kConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInfeasibleBudget: return "InfeasibleBudget";
    case ErrorCode::kDegenerateCosts: return "DegenerateCosts";
    case ErrorCode::kNonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::kZeroNormal: return "ZeroNormal";
    case ErrorCode::kBracketExhausted: return "BracketExhausted";
    case ErrorCode::kDependentNormals: return "DependentNormals";
    case ErrorCode::kNewtonDiverged: return "NewtonDiverged";
    case ErrorCode::kGridTooLarge: return "GridTooLarge";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kGenerationFailed: return "GenerationFailed";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// N groups, K options with shared per-option costs, positive group weights
/// and a total budget. `values` is only populated for knapsack benchmarks.
struct BudgetProblem {
  Vector option_costs;   // K
  Vector group_weights;  // N
  double budget = 0.0;
  std::optional<Matrix> values;  // N x K
  double dp_scale = 0.0;         // integer-unit scale for the knapsack DP; 0 = automatic

  std::size_t num_groups() const { return static_cast<std::size_t>(group_weights.size()); }
  std::size_t num_options() const { return static_cast<std::size_t>(option_costs.size()); }
  double total_weight() const { return group_weights.sum(); }
  double min_total_cost() const { return total_weight() * option_costs.minCoeff(); }
  double max_total_cost() const { return total_weight() * option_costs.maxCoeff(); }
};

struct LinearConstraint {
  Vector option_costs;  // K
  double budget = 0.0;
};

/// q simultaneous budget constraints over the same groups and weights.
struct ConstraintSet {
  std::vector<LinearConstraint> constraints;
  bool slack_enabled = false;

  std::size_t size() const { return constraints.size(); }
};

/// One option index per group.
struct Assignment {
  std::vector<int> choices;

  std::size_t size() const { return choices.size(); }
  bool operator==(const Assignment&) const = default;
};

namespace detail {

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void check_window(const Vector& costs, const Vector& weights, double budget,
                         const std::string& what) {
  const double per_weight = budget / weights.sum();
  if (!(costs.minCoeff() < per_weight && per_weight < costs.maxCoeff())) {
    throw Error(ErrorCode::kInfeasibleBudget,
                what + ": budget " + std::to_string(budget) + " outside the open window (" +
                    std::to_string(weights.sum() * costs.minCoeff()) + ", " +
                    std::to_string(weights.sum() * costs.maxCoeff()) + ")");
  }
}

inline void check_costs(const Vector& costs, const std::string& what) {
  if (costs.size() < 2) throw Error(ErrorCode::kInvalidArgument, what + ": need K >= 2 options");
  if (!all_finite(costs)) throw Error(ErrorCode::kInvalidArgument, what + ": non-finite cost");
  if ((costs.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, what + ": costs must be strictly positive");
  }
  if (costs.minCoeff() == costs.maxCoeff()) {
    throw Error(ErrorCode::kDegenerateCosts, what + ": all option costs are equal");
  }
}

}  // namespace detail

/// Throws rco::Error unless every BudgetProblem invariant holds.
inline void validate_problem(const BudgetProblem& problem) {
  if (problem.group_weights.size() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "problem needs at least one group");
  }
  detail::check_costs(problem.option_costs, "problem");
  if (!detail::all_finite(problem.group_weights) || !std::isfinite(problem.budget)) {
    throw Error(ErrorCode::kInvalidArgument, "problem: non-finite weight or budget");
  }
  if ((problem.group_weights.array() <= 0.0).any()) {
    throw Error(ErrorCode::kNonPositiveWeight, "problem: group weights must be strictly positive");
  }
  detail::check_window(problem.option_costs, problem.group_weights, problem.budget, "problem");
  if (problem.values) {
    const Matrix& v = *problem.values;
    if (static_cast<std::size_t>(v.rows()) != problem.num_groups() ||
        static_cast<std::size_t>(v.cols()) != problem.num_options()) {
      throw Error(ErrorCode::kInvalidArgument, "problem: values matrix has wrong shape");
    }
    if (!v.allFinite()) throw Error(ErrorCode::kInvalidArgument, "problem: non-finite value");
  }
}

/// Validates every constraint of `set` against the shared group weights.
inline void validate_constraints(const ConstraintSet& set, const Vector& group_weights) {
  if (set.constraints.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "constraint set is empty");
  }
  if (set.slack_enabled && set.constraints.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "slack mode requires exactly one constraint");
  }
  const auto k = set.constraints.front().option_costs.size();
  for (std::size_t j = 0; j < set.constraints.size(); ++j) {
    const auto& c = set.constraints[j];
    const std::string name = "constraint " + std::to_string(j);
    if (c.option_costs.size() != k) {
      throw Error(ErrorCode::kInvalidArgument, name + ": inconsistent option count");
    }
    detail::check_costs(c.option_costs, name);
    detail::check_window(c.option_costs, group_weights, c.budget, name);
  }
}

/// Row-wise softmax; the row maximum is subtracted before exponentiation.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline void validate_assignment(const Assignment& z, const BudgetProblem& problem) {
  if (z.size() != problem.num_groups()) {
    throw Error(ErrorCode::kInvalidArgument, "assignment length does not match group count");
  }
  for (int k : z.choices) {
    if (k < 0 || static_cast<std::size_t>(k) >= problem.num_options()) {
      throw Error(ErrorCode::kInvalidArgument, "assignment index out of range");
    }
  }
}

/// Sum over groups of w_i * c_{z_i}.
inline double discrete_cost(const Assignment& z, const Vector& costs, const Vector& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    total += weights[static_cast<Eigen::Index>(i)] * costs[z.choices[i]];
  }
  return total;
}

inline double discrete_cost(const Assignment& z, const BudgetProblem& problem) {
  return discrete_cost(z, problem.option_costs, problem.group_weights);
}

/// Sum over groups of values(i, z_i).
inline double assignment_value(const Assignment& z, const Matrix& values) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    total += values(static_cast<Eigen::Index>(i), z.choices[i]);
  }
  return total;
}

/// Discrete feasibility with a relative tolerance that absorbs summation
/// round-off on real-valued costs.
inline bool within_budget(double cost, double budget) {
  return cost <= budget + 1e-12 * std::max(1.0, std::abs(budget));
}

/// Per-group argmax; ties go to the lowest option index.
inline Assignment row_argmax(const Matrix& scores) {
  Assignment z;
  z.choices.resize(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k) {
      if (scores(i, k) > scores(i, best)) best = k;
    }
    z.choices[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return z;
}

}  // namespace rco

#endif  // RCO_CORE_HPP_

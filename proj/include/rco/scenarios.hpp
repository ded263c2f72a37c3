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

// Seeded generators for the knapsack benchmark families and the
// sixteen-constraint instance. Every family asserts its own contract at
// generation time and resamples (up to 100 attempts) until it holds.

#ifndef RCO_SCENARIOS_HPP_
#define RCO_SCENARIOS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rco/core.hpp"
#include "rco/knapsack.hpp"
#include "rco/manifold.hpp"
#include "rco/rng.hpp"

namespace rco {

struct ScenarioSpec {
  std::string family;
  int num_groups = 0;
  int num_options = 0;
  std::uint64_t seed = 0;
  double budget_fraction = 0.5;   // position of B inside [sum w min c, sum w max c]
  double noise = 10.0;            // additive value noise (correlated, boundary)
  double tie_width = 1.0;         // half-width of nearly tied values (adversarial)
  double under_budget_ratio = 0.8;  // DP optimum cost must be <= ratio * B
  bool normalize_weights = true;  // scale weights to sum to one
};

struct ContractCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct Scenario {
  ScenarioSpec spec;
  BudgetProblem problem;
  std::vector<ContractCheck> checks;
  int attempts = 1;
};

inline const std::vector<std::string>& scenario_families() {
  static const std::vector<std::string> names = {
      "small-easy",  "medium",      "large",         "huge",        "float-costs",
      "tight-budget", "correlated", "correlated-tight", "adversarial", "boundary",
      "cheap-optimal", "mixed-slack", "nonuniform"};
  return names;
}

inline bool is_scenario_family(const std::string& name) {
  const auto& f = scenario_families();
  return std::find(f.begin(), f.end(), name) != f.end();
}

/// Family defaults for sizes and parameters.
inline ScenarioSpec default_spec(const std::string& family, std::uint64_t seed) {
  if (!is_scenario_family(family)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown scenario family '" + family + "'");
  }
  ScenarioSpec s;
  s.family = family;
  s.seed = seed;
  s.num_groups = 50;
  s.num_options = 8;
  if (family == "small-easy") {
    s.num_groups = 20;
    s.num_options = 4;
  } else if (family == "large" || family == "float-costs") {
    s.num_groups = 200;
    s.num_options = 16;
  } else if (family == "huge") {
    s.num_groups = 1000;
    s.num_options = 32;
  }
  if (family == "tight-budget") s.budget_fraction = 0.10;
  if (family == "correlated-tight") s.budget_fraction = 0.15;
  if (family == "mixed-slack") {
    s.budget_fraction = 0.6;
    s.under_budget_ratio = 0.9;
  }
  return s;
}

/// DP optimum of the value objective under the problem's integer grid.
inline DpSolution solve_oracle(const BudgetProblem& problem) {
  if (!problem.values) throw Error(ErrorCode::kInvalidArgument, "oracle needs a values matrix");
  return dp_solve(*problem.values, quantize_costs(problem));
}

namespace detail {

inline Vector integer_costs(int k) {
  Vector c(k);
  for (int j = 0; j < k; ++j) c[j] = j + 1;
  return c;
}

inline Matrix uniform_matrix(int n, int k, double lo, double hi, RngStream& rng) {
  Matrix m(n, k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

inline double budget_at(const Vector& costs, const Vector& weights, double fraction, double grid) {
  const double lo = weights.sum() * costs.minCoeff();
  const double hi = weights.sum() * costs.maxCoeff();
  return std::floor((lo + fraction * (hi - lo)) * grid) / grid;
}

inline double pearson(const Matrix& values, const Vector& costs) {
  const auto n = static_cast<double>(values.size());
  double sv = 0, sc = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      sv += values(i, k);
      sc += costs[k];
    }
  }
  const double mv = sv / n, mc = sc / n;
  double cov = 0, vv = 0, vc = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      const double a = values(i, k) - mv, b = costs[k] - mc;
      cov += a * b;
      vv += a * a;
      vc += b * b;
    }
  }
  return cov / std::sqrt(vv * vc);
}

inline ContractCheck at_least(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, value >= threshold};
}

inline ContractCheck at_most(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, value <= threshold};
}

inline BudgetProblem draw_family(const ScenarioSpec& s, RngStream& rng) {
  const int n = s.num_groups, k = s.num_options;
  BudgetProblem p;
  p.group_weights = Vector::Ones(n);
  p.option_costs = integer_costs(k);
  const std::string& f = s.family;

  if (f == "float-costs") {
    // Real costs on a 0.01 grid so the DP at scale 100 is exact.
    p.option_costs.resize(k);
    for (int j = 0; j < k; ++j) p.option_costs[j] = std::round(rng.uniform(0.5, 16.5) * 100.0) / 100.0;
    p.dp_scale = 100.0;
    p.values = uniform_matrix(n, k, 0.0, 100.0, rng);
    p.budget = budget_at(p.option_costs, p.group_weights, s.budget_fraction, 100.0);
  } else if (f == "correlated" || f == "correlated-tight" || f == "boundary") {
    Matrix v(n, k);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const double x = (p.option_costs[j] - 1.0) / (k - 1.0);
        const double signal = f == "boundary" ? std::sqrt(x) : x;
        v(i, j) = (100.0 - s.noise) * signal + rng.uniform(0.0, s.noise);
      }
    }
    p.values = std::move(v);
    p.budget = budget_at(p.option_costs, p.group_weights, s.budget_fraction, 1.0);
  } else if (f == "adversarial") {
    // Costs clustered around the per-group budget, values nearly tied.
    for (int j = 0; j < k; ++j) p.option_costs[j] = 100 - k / 2 + j;
    p.values = uniform_matrix(n, k, 50.0 - s.tie_width, 50.0 + s.tie_width, rng);
    p.budget = budget_at(p.option_costs, p.group_weights, s.budget_fraction, 1.0);
  } else if (f == "cheap-optimal" || f == "mixed-slack") {
    const double cheap_share = f == "cheap-optimal" ? 1.0 : 0.6;
    Matrix v(n, k);
    for (int i = 0; i < n; ++i) {
      const bool cheap = rng.uniform() < cheap_share;
      for (int j = 0; j < k; ++j) {
        const double x = (p.option_costs[j] - 1.0) / (k - 1.0);
        const double shape = cheap ? std::exp(-3.5 * x) : x;
        v(i, j) = 100.0 * shape * rng.uniform(0.5, 1.0);
      }
    }
    p.values = std::move(v);
    p.budget = budget_at(p.option_costs, p.group_weights, s.budget_fraction, 1.0);
  } else if (f == "nonuniform") {
    for (int i = 0; i < n; ++i) p.group_weights[i] = std::round(std::pow(10.0, rng.uniform(0.0, 2.0)));
    p.values = uniform_matrix(n, k, 0.0, 100.0, rng);
    p.budget = budget_at(p.option_costs, p.group_weights, s.budget_fraction, 1.0);
  } else {
    p.values = uniform_matrix(n, k, 0.0, 100.0, rng);
    p.budget = budget_at(p.option_costs, p.group_weights, s.budget_fraction, 1.0);
  }
  if (s.normalize_weights) {
    // Rescale to unit total weight so C reads as an average cost per group.
    // The integer DP grid absorbs the factor, keeping the oracle exact.
    const double mass = p.group_weights.sum();
    const double grid = p.dp_scale > 0.0 ? p.dp_scale : 1.0;
    p.group_weights /= mass;
    p.budget /= mass;
    p.dp_scale = grid * mass;
  }
  return p;
}

inline std::vector<ContractCheck> check_family(const ScenarioSpec& s, const BudgetProblem& p) {
  std::vector<ContractCheck> checks;
  const double lo = p.min_total_cost(), hi = p.max_total_cost();
  checks.push_back(at_most("budget_fraction_error",
                           std::abs((p.budget - lo) / (hi - lo) - s.budget_fraction), 0.02));
  const IntegerCostGrid grid = quantize_costs(p);
  checks.push_back(at_most("quantization_error", grid.max_relative_error, 1e-12));
  const std::string& f = s.family;
  if (f == "correlated" || f == "correlated-tight") {
    checks.push_back(at_least("value_cost_correlation", pearson(*p.values, p.option_costs), 0.9));
  }
  if (f == "cheap-optimal" || f == "mixed-slack" || f == "boundary") {
    const DpSolution opt = dp_solve(*p.values, grid);
    const double cost = discrete_cost(opt.assignment, p);
    if (f == "boundary") {
      checks.push_back(at_least("optimum_cost_over_budget", cost / p.budget, 1.0 - 1e-12));
    } else {
      checks.push_back(at_most("optimum_cost_over_budget", cost / p.budget, s.under_budget_ratio));
    }
  }
  if (f == "nonuniform") {
    checks.push_back(at_least("weight_spread", p.group_weights.maxCoeff() / p.group_weights.minCoeff(), 20.0));
  }
  if (f == "adversarial") {
    checks.push_back(at_most("value_spread", p.values->maxCoeff() - p.values->minCoeff(), 2.0 * s.tie_width));
  }
  return checks;
}

}  // namespace detail

inline constexpr int kMaxGenerationAttempts = 100;

/// Deterministic in `spec`: the same spec always yields the same problem.
inline Scenario generate(const ScenarioSpec& spec) {
  if (!is_scenario_family(spec.family)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown scenario family '" + spec.family + "'");
  }
  if (spec.num_groups < 1 || spec.num_options < 2) {
    throw Error(ErrorCode::kInvalidArgument, "scenario needs N >= 1 and K >= 2");
  }
  const RngStream root(spec.seed);
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    RngStream rng = root.fork(static_cast<std::uint64_t>(attempt));
    Scenario sc;
    sc.spec = spec;
    sc.problem = detail::draw_family(spec, rng);
    sc.attempts = attempt + 1;
    try {
      validate_problem(sc.problem);
      sc.checks = detail::check_family(spec, sc.problem);
    } catch (const Error&) {
      continue;
    }
    if (std::all_of(sc.checks.begin(), sc.checks.end(), [](const ContractCheck& c) { return c.passed; })) {
      return sc;
    }
  }
  throw Error(ErrorCode::kGenerationFailed,
              "family '" + spec.family + "' contract not met in " +
                  std::to_string(kMaxGenerationAttempts) + " attempts");
}

inline Scenario generate(const std::string& family, std::uint64_t seed) {
  return generate(default_spec(family, seed));
}

struct MultiScenario {
  BudgetProblem base;  // groups, weights, values; costs/budget mirror constraint 0
  ConstraintSet constraints;
  double gram_condition = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr int kMultiGroups = 500;
inline constexpr int kMultiOptions = 32;
inline constexpr int kMultiConstraints = 16;

/// q = 16 cost vectors drawn uniformly from [1, 10]; each budget is the
/// constraint's value at a random interior logit point, so all sixteen are
/// satisfiable simultaneously.
inline MultiScenario generate_multi(std::uint64_t seed, int num_groups = kMultiGroups,
                                    int num_options = kMultiOptions,
                                    int num_constraints = kMultiConstraints) {
  const RngStream root(seed);
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    RngStream rng = root.fork(static_cast<std::uint64_t>(attempt));
    MultiScenario out;
    out.seed = seed;
    out.base.group_weights = Vector::Constant(num_groups, 1.0 / num_groups);
    out.base.values = detail::uniform_matrix(num_groups, num_options, 0.0, 100.0, rng);
    const Matrix anchor = detail::uniform_matrix(num_groups, num_options, -1.0, 1.0, rng);
    for (int j = 0; j < num_constraints; ++j) {
      LinearConstraint c;
      c.option_costs.resize(num_options);
      for (int k = 0; k < num_options; ++k) c.option_costs[k] = rng.uniform(1.0, 10.0);
      c.budget = expected_cost(anchor, c.option_costs, out.base.group_weights);
      out.constraints.constraints.push_back(std::move(c));
    }
    out.base.option_costs = out.constraints.constraints.front().option_costs;
    out.base.budget = out.constraints.constraints.front().budget;
    try {
      validate_constraints(out.constraints, out.base.group_weights);
    } catch (const Error&) {
      continue;
    }
    const Matrix uniform = Matrix::Zero(num_groups, num_options);
    out.gram_condition =
        condition_number(normal_gram(constraint_normals(uniform, out.constraints, out.base.group_weights)));
    if (out.gram_condition < 1e6) return out;
  }
  throw Error(ErrorCode::kGenerationFailed, "multi-constraint instance not generated");
}

}  // namespace rco

#endif  // RCO_SCENARIOS_HPP_

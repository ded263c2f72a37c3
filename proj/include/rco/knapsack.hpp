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

// Multiple-choice knapsack: exact dynamic programming over integer cost
// units, an exhaustive reference solver, and greedy repair of a probability
// matrix into a budget-feasible assignment.

#ifndef RCO_KNAPSACK_HPP_
#define RCO_KNAPSACK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <tuple>
#include <vector>

#include "rco/core.hpp"

namespace rco {

inline constexpr std::int64_t kDefaultGridCap = 2'000'000;
inline constexpr double kDefaultFloatScale = 1000.0;

/// Integer cost units u_ik = round(scale * w_i * c_k) and budget
/// B' = floor(scale * B).
struct IntegerCostGrid {
  std::size_t num_groups = 0;
  std::size_t num_options = 0;
  std::vector<std::int64_t> units;  // row-major N x K
  std::int64_t budget = 0;
  double scale = 1.0;
  double max_relative_error = 0.0;

  std::int64_t unit(std::size_t i, std::size_t k) const { return units[i * num_options + k]; }
};

struct DpSolution {
  Assignment assignment;
  double score = 0.0;
  std::int64_t integer_cost = 0;
};

namespace detail {

inline bool near_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x)); }

}  // namespace detail

/// problem.dp_scale when set; else 1 when every w_i c_k and the budget are
/// integral, otherwise 1000.
inline double default_dp_scale(const BudgetProblem& problem) {
  if (problem.dp_scale > 0.0) return problem.dp_scale;
  if (!detail::near_integer(problem.budget)) return kDefaultFloatScale;
  for (Eigen::Index i = 0; i < problem.group_weights.size(); ++i) {
    for (Eigen::Index k = 0; k < problem.option_costs.size(); ++k) {
      if (!detail::near_integer(problem.group_weights[i] * problem.option_costs[k])) {
        return kDefaultFloatScale;
      }
    }
  }
  return 1.0;
}

inline IntegerCostGrid quantize_costs(const Vector& costs, const Vector& weights, double budget,
                                      double scale, std::int64_t cap = kDefaultGridCap) {
  if (!(scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "quantization scale must be positive");
  IntegerCostGrid grid;
  grid.num_groups = static_cast<std::size_t>(weights.size());
  grid.num_options = static_cast<std::size_t>(costs.size());
  grid.scale = scale;
  const double scaled_budget = scale * budget;
  // The relative nudge keeps budgets like 1700.01 * 100 from flooring one unit low.
  const double floored = std::floor(scaled_budget * (1.0 + 1e-12));
  if (floored > static_cast<double>(cap)) {
    throw Error(ErrorCode::kGridTooLarge, "integer budget " + std::to_string(floored) +
                                              " exceeds cap " + std::to_string(cap));
  }
  grid.budget = static_cast<std::int64_t>(floored);
  grid.units.resize(grid.num_groups * grid.num_options);
  for (std::size_t i = 0; i < grid.num_groups; ++i) {
    for (std::size_t k = 0; k < grid.num_options; ++k) {
      const double exact = scale * weights[static_cast<Eigen::Index>(i)] * costs[static_cast<Eigen::Index>(k)];
      const double rounded = std::round(exact);
      grid.units[i * grid.num_options + k] = static_cast<std::int64_t>(rounded);
      if (exact > 0.0) {
        grid.max_relative_error = std::max(grid.max_relative_error, std::abs(rounded - exact) / exact);
      }
    }
  }
  return grid;
}

inline IntegerCostGrid quantize_costs(const BudgetProblem& problem, double scale,
                                      std::int64_t cap = kDefaultGridCap) {
  return quantize_costs(problem.option_costs, problem.group_weights, problem.budget, scale, cap);
}

inline IntegerCostGrid quantize_costs(const BudgetProblem& problem) {
  return quantize_costs(problem, default_dp_scale(problem));
}

/// Maximizes sum_i scores(i, z_i) subject to sum_i u_{i,z_i} <= B'.
///
/// O(N K B') time; two rolling rows of B'+1 scores plus an N x (B'+1) table
/// of choices for backtracking. Ties go to the lowest option index.
inline DpSolution dp_solve(const Matrix& scores, const IntegerCostGrid& grid) {
  const std::size_t n = grid.num_groups;
  const std::size_t k = grid.num_options;
  if (static_cast<std::size_t>(scores.rows()) != n || static_cast<std::size_t>(scores.cols()) != k) {
    throw Error(ErrorCode::kInvalidArgument, "score matrix shape does not match the cost grid");
  }
  if (k > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "too many options for the choice table");
  }
  if (scores.hasNaN()) throw Error(ErrorCode::kInvalidArgument, "NaN score");

  std::int64_t min_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t m = grid.unit(i, 0);
    for (std::size_t j = 1; j < k; ++j) m = std::min(m, grid.unit(i, j));
    min_total += m;
  }
  if (min_total > grid.budget) {
    throw Error(ErrorCode::kInfeasible, "minimum-cost assignment exceeds the integer budget");
  }

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const std::size_t width = static_cast<std::size_t>(grid.budget) + 1;
  std::vector<double> prev(width, 0.0), cur(width);
  std::vector<std::uint16_t> choice(n * width);

  for (std::size_t i = 0; i < n; ++i) {
    std::fill(cur.begin(), cur.end(), kNegInf);
    std::uint16_t* ch = choice.data() + i * width;
    for (std::size_t j = 0; j < k; ++j) {
      const auto u = static_cast<std::size_t>(grid.unit(i, j));
      if (u >= width) continue;
      const double s = scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      for (std::size_t b = u; b < width; ++b) {
        const double cand = prev[b - u] + s;
        if (cand > cur[b]) {
          cur[b] = cand;
          ch[b] = static_cast<std::uint16_t>(j);
        }
      }
    }
    std::swap(prev, cur);
  }

  DpSolution sol;
  sol.assignment.choices.resize(n);
  std::size_t b = width - 1;
  for (std::size_t i = n; i-- > 0;) {
    const std::uint16_t j = choice[i * width + b];
    sol.assignment.choices[i] = j;
    b -= static_cast<std::size_t>(grid.unit(i, j));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int j = sol.assignment.choices[i];
    sol.score += scores(static_cast<Eigen::Index>(i), j);
    sol.integer_cost += grid.unit(i, static_cast<std::size_t>(j));
  }
  return sol;
}

inline constexpr double kBruteForceLimit = 1e7;

/// Exhaustive maximization under the real-valued budget; testing oracle.
inline DpSolution brute_force_solve(const Matrix& scores, const BudgetProblem& problem) {
  const std::size_t n = problem.num_groups();
  const std::size_t k = problem.num_options();
  if (std::pow(static_cast<double>(k), static_cast<double>(n)) > kBruteForceLimit) {
    throw Error(ErrorCode::kTooLarge, "K^N exceeds the enumeration limit");
  }
  std::vector<int> z(n, 0);
  DpSolution best;
  bool found = false;
  while (true) {
    double cost = 0.0;
    double score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cost += problem.group_weights[static_cast<Eigen::Index>(i)] * problem.option_costs[z[i]];
      score += scores(static_cast<Eigen::Index>(i), z[i]);
    }
    if (within_budget(cost, problem.budget) && (!found || score > best.score)) {
      found = true;
      best.assignment.choices = z;
      best.score = score;
    }
    bool done = true;
    for (std::size_t pos = n; pos-- > 0;) {
      if (++z[pos] < static_cast<int>(k)) {
        done = false;
        break;
      }
      z[pos] = 0;
    }
    if (done) break;
  }
  if (!found) throw Error(ErrorCode::kInfeasible, "no assignment fits the budget");
  best.integer_cost = -1;
  return best;
}

namespace detail {

struct RepairMove {
  double ratio;
  std::size_t group;
  int option;
  std::uint64_t version;
};

struct RepairMoveWorse {
  bool operator()(const RepairMove& a, const RepairMove& b) const {
    return std::tie(a.ratio, a.group, a.option) > std::tie(b.ratio, b.group, b.option);
  }
};

inline bool best_downgrade(const Matrix& p, const BudgetProblem& problem, std::size_t i, int cur,
                           RepairMove& move) {
  const auto ii = static_cast<Eigen::Index>(i);
  const double w = problem.group_weights[ii];
  const Vector& c = problem.option_costs;
  bool any = false;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (!(c[j] < c[cur])) continue;
    const double ratio = (p(ii, cur) - p(ii, j)) / (w * (c[cur] - c[j]));
    if (!any || ratio < move.ratio) {
      move.ratio = ratio;
      move.option = static_cast<int>(j);
      any = true;
    }
  }
  move.group = i;
  return any;
}

}  // namespace detail

/// Starts from the per-group argmax of p and, while over budget, applies the
/// single-group downgrade with the least probability lost per unit of cost
/// saved.
inline Assignment greedy_repair(const Matrix& p, const BudgetProblem& problem) {
  if (!within_budget(problem.min_total_cost(), problem.budget)) {
    throw Error(ErrorCode::kInfeasible, "minimum-cost assignment exceeds the budget");
  }
  Assignment z = row_argmax(p);
  double cost = discrete_cost(z, problem);
  if (within_budget(cost, problem.budget)) return z;

  const std::size_t n = problem.num_groups();
  std::vector<std::uint64_t> version(n, 0);
  std::priority_queue<detail::RepairMove, std::vector<detail::RepairMove>, detail::RepairMoveWorse> heap;
  for (std::size_t i = 0; i < n; ++i) {
    detail::RepairMove m{};
    if (detail::best_downgrade(p, problem, i, z.choices[i], m)) heap.push(m);
  }
  while (!within_budget(cost, problem.budget)) {
    if (heap.empty()) throw Error(ErrorCode::kInfeasible, "greedy repair ran out of moves");
    const detail::RepairMove m = heap.top();
    heap.pop();
    if (m.version != version[m.group]) continue;
    const auto gi = static_cast<Eigen::Index>(m.group);
    cost -= problem.group_weights[gi] *
            (problem.option_costs[z.choices[m.group]] - problem.option_costs[m.option]);
    z.choices[m.group] = m.option;
    ++version[m.group];
    detail::RepairMove next{};
    next.version = version[m.group];
    if (detail::best_downgrade(p, problem, m.group, m.option, next)) heap.push(next);
    // Re-sum to drop drift from the running subtraction.
    if (within_budget(cost, problem.budget)) cost = discrete_cost(z, problem);
  }
  return z;
}

/// Greedy repair against several `<=` budgets at once: each move is the
/// single-group switch that removes the most normalized excess per unit of
/// probability lost.
inline Assignment greedy_repair_multi(const Matrix& p, const ConstraintSet& set,
                                      const Vector& weights) {
  Assignment z = row_argmax(p);
  const auto q = set.size();
  const auto n = static_cast<Eigen::Index>(weights.size());
  const auto k = p.cols();
  Vector totals(static_cast<Eigen::Index>(q));
  for (std::size_t j = 0; j < q; ++j) {
    totals[static_cast<Eigen::Index>(j)] = discrete_cost(z, set.constraints[j].option_costs, weights);
  }
  auto excess = [&](const Vector& t) {
    double e = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      const double b = set.constraints[j].budget;
      e += std::max(0.0, t[static_cast<Eigen::Index>(j)] - b) / b;
    }
    return e;
  };
  auto feasible = [&](const Vector& t) {
    for (std::size_t j = 0; j < q; ++j) {
      if (!within_budget(t[static_cast<Eigen::Index>(j)], set.constraints[j].budget)) return false;
    }
    return true;
  };
  while (!feasible(totals)) {
    const double base = excess(totals);
    double best_ratio = std::numeric_limits<double>::infinity();
    Eigen::Index best_i = -1, best_k = -1;
    Vector trial(totals.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const int cur = z.choices[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < k; ++j) {
        if (j == cur) continue;
        for (std::size_t c = 0; c < q; ++c) {
          const Vector& cc = set.constraints[c].option_costs;
          trial[static_cast<Eigen::Index>(c)] =
              totals[static_cast<Eigen::Index>(c)] + weights[i] * (cc[j] - cc[cur]);
        }
        const double gain = base - excess(trial);
        if (gain <= 1e-15) continue;
        // Probability loss lies in [-1, 1]; shifted so ratios stay positive.
        const double ratio = (p(i, cur) - p(i, j) + 1.0) / gain;
        if (ratio < best_ratio) {
          best_ratio = ratio;
          best_i = i;
          best_k = j;
        }
      }
    }
    if (best_i < 0) throw Error(ErrorCode::kInfeasible, "multi-constraint repair is stuck");
    const int cur = z.choices[static_cast<std::size_t>(best_i)];
    for (std::size_t c = 0; c < q; ++c) {
      const Vector& cc = set.constraints[c].option_costs;
      totals[static_cast<Eigen::Index>(c)] += weights[best_i] * (cc[best_k] - cc[cur]);
    }
    z.choices[static_cast<std::size_t>(best_i)] = static_cast<int>(best_k);
    if (feasible(totals)) {
      for (std::size_t j = 0; j < q; ++j) {
        totals[static_cast<Eigen::Index>(j)] = discrete_cost(z, set.constraints[j].option_costs, weights);
      }
    }
  }
  return z;
}

inline constexpr double kLogProbFloor = 1e-300;

/// DP on scores log p (no noise, no temperature), with p clamped below.
inline DpSolution extract_final(const Matrix& p, const IntegerCostGrid& grid) {
  const Matrix scores = p.cwiseMax(kLogProbFloor).array().log().matrix();
  return dp_solve(scores, grid);
}

}  // namespace rco

#endif  // RCO_KNAPSACK_HPP_

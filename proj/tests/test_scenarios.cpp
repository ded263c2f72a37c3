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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <string>

#include "rco/scenarios.hpp"

namespace rco {
namespace {

// Plain two-pass Pearson coefficient between value entries and their column cost.
double correlation(const Matrix& v, const Vector& c) {
  Matrix cm(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) cm.row(i) = c.transpose();
  const Eigen::ArrayXXd a = v.array() - v.mean(), b = cm.array() - cm.mean();
  return (a * b).sum() / std::sqrt((a * a).sum() * (b * b).sum());
}

class EveryFamily : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryFamily, GeneratesValidProblemPassingItsContracts) {
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    const Scenario sc = generate(GetParam(), seed);
    EXPECT_NO_THROW(validate_problem(sc.problem));
    ASSERT_TRUE(sc.problem.values.has_value());
    EXPECT_EQ(sc.problem.values->rows(), sc.spec.num_groups);
    EXPECT_EQ(sc.problem.values->cols(), sc.spec.num_options);
    EXPECT_NEAR(sc.problem.group_weights.sum(), 1.0, 1e-12);
    for (const auto& c : sc.checks) EXPECT_TRUE(c.passed) << c.name << " = " << c.value;
    EXPECT_NO_THROW(solve_oracle(sc.problem));
  }
}

TEST_P(EveryFamily, DeterministicInSeed) {
  const Scenario a = generate(GetParam(), 17), b = generate(GetParam(), 17);
  EXPECT_EQ(a.problem.option_costs, b.problem.option_costs);
  EXPECT_EQ(a.problem.group_weights, b.problem.group_weights);
  EXPECT_EQ(a.problem.budget, b.problem.budget);
  EXPECT_EQ(*a.problem.values, *b.problem.values);
  const Scenario c = generate(GetParam(), 18);
  EXPECT_NE(*a.problem.values, *c.problem.values);
}

TEST_P(EveryFamily, OracleUnchangedByWeightNormalization) {
  ScenarioSpec spec = default_spec(GetParam(), 5);
  const Scenario normalized = generate(spec);
  spec.normalize_weights = false;
  const Scenario raw = generate(spec);
  const Vector ratio = raw.problem.group_weights.array() / normalized.problem.group_weights.array();
  EXPECT_LE((ratio.array() - ratio[0]).abs().maxCoeff(), 1e-9 * ratio[0]);
  EXPECT_NEAR(raw.problem.budget / normalized.problem.budget, ratio[0], 1e-9 * ratio[0]);
  const DpSolution a = solve_oracle(normalized.problem), b = solve_oracle(raw.problem);
  EXPECT_EQ(a.score, b.score);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, EveryFamily, ::testing::ValuesIn(scenario_families()),
                         [](const ::testing::TestParamInfo<std::string>& info) {
                           std::string s = info.param;
                           for (char& ch : s) {
                             if (ch == '-') ch = '_';
                           }
                           return s;
                         });

TEST(Families, ThirteenNames) { EXPECT_EQ(scenario_families().size(), 13U); }

TEST(Families, Dimensions) {
  const std::map<std::string, std::pair<int, int>> expected = {
      {"small-easy", {20, 4}}, {"medium", {50, 8}}, {"large", {200, 16}}, {"huge", {1000, 32}},
      {"float-costs", {200, 16}}};
  for (const auto& [name, dims] : expected) {
    const Scenario sc = generate(name, 0);
    EXPECT_EQ(sc.problem.group_weights.size(), dims.first) << name;
    EXPECT_EQ(sc.problem.option_costs.size(), dims.second) << name;
  }
}

TEST(Families, BudgetPositionInFeasibleWindow) {
  const std::map<std::string, double> fraction = {
      {"medium", 0.5}, {"huge", 0.5}, {"tight-budget", 0.10}, {"correlated-tight", 0.15}};
  for (const auto& [name, f] : fraction) {
    const BudgetProblem p = generate(name, 1).problem;
    const double lo = p.group_weights.sum() * p.option_costs.minCoeff();
    const double hi = p.group_weights.sum() * p.option_costs.maxCoeff();
    EXPECT_NEAR((p.budget - lo) / (hi - lo), f, 0.02) << name;
  }
}

TEST(Families, IntegerCostsOneToK) {
  const BudgetProblem p = generate("large", 2).problem;
  for (int k = 0; k < 16; ++k) EXPECT_EQ(p.option_costs[k], k + 1.0);
}

TEST(Families, FloatCostsRealValuedInRange) {
  const BudgetProblem p = generate("float-costs", 3).problem;
  int non_integer = 0;
  for (Eigen::Index k = 0; k < p.option_costs.size(); ++k) {
    EXPECT_GE(p.option_costs[k], 0.5);
    EXPECT_LE(p.option_costs[k], 16.5);
    non_integer += std::abs(p.option_costs[k] - std::round(p.option_costs[k])) > 1e-9;
  }
  EXPECT_GT(non_integer, 0);
  EXPECT_LE(quantize_costs(p).max_relative_error, 1e-12);
}

TEST(Families, CorrelatedValuesTrackCosts) {
  for (const char* name : {"correlated", "correlated-tight"}) {
    const BudgetProblem p = generate(name, 4).problem;
    EXPECT_GE(correlation(*p.values, p.option_costs), 0.9) << name;
  }
}

TEST(Families, CheapOptimalOptimumWellUnderBudget) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const BudgetProblem p = generate("cheap-optimal", seed).problem;
    const DpSolution opt = solve_oracle(p);
    EXPECT_LE(discrete_cost(opt.assignment, p), 0.8 * p.budget);
  }
}

TEST(Families, MixedSlackOptimumUnderBudget) {
  const BudgetProblem p = generate("mixed-slack", 0).problem;
  EXPECT_LT(discrete_cost(solve_oracle(p).assignment, p), p.budget);
}

TEST(Families, BoundaryOptimumSpendsTheBudget) {
  const BudgetProblem p = generate("boundary", 0).problem;
  const double cost = discrete_cost(solve_oracle(p).assignment, p);
  EXPECT_GE(cost, p.budget * (1.0 - 1e-12));
  EXPECT_TRUE(within_budget(cost, p.budget));
}

TEST(Families, AdversarialCostsClusteredValuesTied) {
  const BudgetProblem p = generate("adversarial", 0).problem;
  const double per_group = p.budget / p.group_weights.sum();
  EXPECT_LE((p.option_costs.array() - per_group).abs().maxCoeff() / per_group, 0.1);
  EXPECT_LE(p.values->maxCoeff() - p.values->minCoeff(), 2.0);
}

TEST(Families, NonuniformWeightsSpanTwoOrders) {
  const BudgetProblem p = generate("nonuniform", 0).problem;
  EXPECT_GE(p.group_weights.maxCoeff() / p.group_weights.minCoeff(), 20.0);
}

TEST(Families, UnknownFamilyRejected) {
  EXPECT_THROW(generate("no-such-family", 0), Error);
  ScenarioSpec s = default_spec("medium", 0);
  s.num_options = 1;
  EXPECT_THROW(generate(s), Error);
}

TEST(Families, ImpossibleContractReportsGenerationFailure) {
  ScenarioSpec s = default_spec("cheap-optimal", 0);
  s.under_budget_ratio = 0.01;
  try {
    generate(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGenerationFailed);
  }
}

TEST(Multi, DefaultDimensions) {
  const MultiScenario ms = generate_multi(0);
  EXPECT_EQ(ms.base.group_weights.size(), 500);
  EXPECT_EQ(ms.base.values->cols(), 32);
  EXPECT_EQ(ms.constraints.size(), 16U);
  for (const auto& c : ms.constraints.constraints) EXPECT_EQ(c.option_costs.size(), 32);
}

TEST(Multi, ConstraintsIndividuallyFeasibleAndWellConditioned) {
  const MultiScenario ms = generate_multi(1);
  const Vector& w = ms.base.group_weights;
  for (const auto& c : ms.constraints.constraints) {
    EXPECT_GT(c.budget, w.sum() * c.option_costs.minCoeff());
    EXPECT_LT(c.budget, w.sum() * c.option_costs.maxCoeff());
  }
  EXPECT_LT(ms.gram_condition, 1e6);
  // Recomputed at the uniform point from scratch.
  const auto normals = constraint_normals(Matrix::Zero(500, 32), ms.constraints, w);
  Matrix gram(16, 16);
  for (int a = 0; a < 16; ++a) {
    for (int b = 0; b < 16; ++b) gram(a, b) = normals[a].entries.cwiseProduct(normals[b].entries).sum();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  EXPECT_LT(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff(), 1e6);
}

TEST(Multi, Deterministic) {
  const MultiScenario a = generate_multi(2, 50, 8, 4), b = generate_multi(2, 50, 8, 4);
  EXPECT_EQ(*a.base.values, *b.base.values);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(a.constraints.constraints[j].option_costs, b.constraints.constraints[j].option_costs);
    EXPECT_EQ(a.constraints.constraints[j].budget, b.constraints.constraints[j].budget);
  }
}

}  // namespace
}  // namespace rco

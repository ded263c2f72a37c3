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
#include <vector>

#include "rco/manifold.hpp"
#include "rco/scenarios.hpp"
#include "test_util.hpp"

namespace rco {
namespace {

using testing::fd_gradient;
using testing::random_logits;
using testing::random_problem;
using testing::relative_error;

double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

// --- expected cost ---------------------------------------------------------

TEST(ExpectedCost, UniformTwoOptions) {
  EXPECT_DOUBLE_EQ(expected_cost(Matrix::Zero(1, 2), Vector{{0.0, 1.0}}, Vector{{1.0}}), 0.5);
}

TEST(ExpectedCost, SaturatedRows) {
  Matrix a(2, 2);
  a << 40, -40, -40, 40;
  EXPECT_NEAR(expected_cost(a, Vector{{1.0, 3.0}}, Vector{{2.0, 1.0}}), 5.0, 1e-12);
}

TEST(ExpectedCost, MatchesDirectSummation) {
  RngStream rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const BudgetProblem p = random_problem(rng, 15, 6);
    const Matrix a = random_logits(rng, 15, 6, 3.0);
    const double ref = testing::reference_expected_cost(a, p.option_costs, p.group_weights);
    EXPECT_NEAR(expected_cost(a, p), ref, 1e-12 * ref);
    EXPECT_GE(expected_cost(a, p), p.min_total_cost());
    EXPECT_LE(expected_cost(a, p), p.max_total_cost());
  }
}

// --- normal ----------------------------------------------------------------

TEST(ConstraintNormal, UniformTwoOptions) {
  const Normal n = constraint_normal(Matrix::Zero(1, 2), Vector{{0.0, 1.0}}, Vector{{1.0}});
  EXPECT_DOUBLE_EQ(n.entries(0, 0), -0.25);
  EXPECT_DOUBLE_EQ(n.entries(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(n.squared_norm, 0.125);
}

TEST(ConstraintNormal, EqualCostsGiveZero) {
  RngStream rng(22);
  const Normal n = constraint_normal(random_logits(rng, 4, 3), Vector::Constant(3, 2.0), Vector::Ones(4));
  EXPECT_EQ(n.entries.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(tangent_project(Matrix::Ones(4, 3), n), Error);
}

TEST(ConstraintNormal, RowsSumToZeroAndNormCached) {
  RngStream rng(23);
  const BudgetProblem p = random_problem(rng, 10, 7);
  const Normal n = constraint_normal(random_logits(rng, 10, 7, 4.0), p);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_NEAR(n.entries.row(i).sum(), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(n.squared_norm, n.entries.squaredNorm());
}

TEST(ConstraintNormal, MatchesFiniteDifferencesOn100Instances) {
  RngStream rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 9));
    const int k = 2 + static_cast<int>(rng.uniform_int(0, 6));
    const BudgetProblem p = random_problem(rng, n, k);
    const Matrix a = random_logits(rng, n, k, 2.0);
    const Matrix fd = fd_gradient([&](const Matrix& x) { return expected_cost(x, p); }, a, 1e-6);
    EXPECT_LE(relative_error(constraint_normal(a, p).entries, fd), 1e-5) << "trial " << trial;
  }
}

// --- tangent projection ----------------------------------------------------

class ProjectionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    RngStream rng(25);
    problem_ = random_problem(rng, 12, 6);
    normal_ = constraint_normal(random_logits(rng, 12, 6, 2.0), problem_);
    g_ = random_logits(rng, 12, 6);
  }
  BudgetProblem problem_;
  Normal normal_;
  Matrix g_;
};

TEST_F(ProjectionTest, PureNormalProjectsToZero) {
  EXPECT_LE(tangent_project(normal_.entries, normal_).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(ProjectionTest, TangentVectorUnchanged) {
  const Matrix t = tangent_project(g_, normal_);
  EXPECT_LE((tangent_project(t, normal_) - t).cwiseAbs().maxCoeff(), 1e-14);
}

TEST_F(ProjectionTest, OrthogonalToNormal) {
  const Matrix t = tangent_project(g_, normal_);
  EXPECT_LE(std::abs(inner(t, normal_.entries)), 1e-12 * g_.norm() * normal_.entries.norm());
}

TEST_F(ProjectionTest, NormalBiasEliminated) {
  const Matrix base = tangent_project(g_, normal_);
  for (double beta : {-1e3, -10.0, 1.0, 1e3}) {
    const Matrix biased = tangent_project(g_ + beta * normal_.entries, normal_);
    EXPECT_LE((biased - base).cwiseAbs().maxCoeff(), 1e-10) << "beta " << beta;
  }
}

TEST(TangentProject, RandomOrthogonalityAndIdempotence) {
  RngStream rng(26);
  for (int trial = 0; trial < 100; ++trial) {
    const BudgetProblem p = random_problem(rng, 8, 5);
    const Normal n = constraint_normal(random_logits(rng, 8, 5, 3.0), p);
    const Matrix g = random_logits(rng, 8, 5);
    const Matrix t = tangent_project(g, n);
    EXPECT_LE(std::abs(inner(t, n.entries)), 1e-12 * g.norm() * n.entries.norm());
    EXPECT_LE((tangent_project(t, n) - t).cwiseAbs().maxCoeff(), 1e-14);
  }
}

// --- transport -------------------------------------------------------------

TEST_F(ProjectionTest, TransportIdempotentAndKillsNormal) {
  const Matrix once = transport(g_, normal_);
  EXPECT_LE((transport(once, normal_) - once).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(transport(normal_.entries, normal_).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((transport(once, normal_) - once).norm(), 1e-14 * once.norm());
}

// --- retraction derivative --------------------------------------------------

TEST(RetractionDerivative, BernoulliVariance) {
  EXPECT_DOUBLE_EQ(retraction_derivative(Matrix::Zero(1, 2), Vector{{0.0, 1.0}}, Vector{{1.0}}, 0.0), 0.25);
}

TEST(RetractionDerivative, SaturatedRowsCollapse) {
  Matrix a(2, 3);
  a << 60, 0, -60, -60, 0, 60;
  EXPECT_LT(retraction_derivative(a, Vector{{1.0, 2.0, 3.0}}, Vector{{1.0, 1.0}}, 0.0), 1e-10);
}

TEST(RetractionDerivative, MatchesFiniteDifferencesOn100Instances) {
  RngStream rng(27);
  for (int trial = 0; trial < 100; ++trial) {
    const BudgetProblem p = random_problem(rng, 6, 5);
    const Matrix a = random_logits(rng, 6, 5, 2.0);
    const double t = rng.uniform(-0.3, 0.3);
    const double fd = testing::fd_derivative(
        [&](double s) { return shifted_expected_cost(a, p.option_costs, p.group_weights, s); }, t, 1e-6);
    const double exact = retraction_derivative(a, p, t);
    EXPECT_GT(exact, 0.0);
    EXPECT_LE(std::abs(exact - fd) / exact, 1e-5) << "trial " << trial;
  }
}

// --- binary retraction ------------------------------------------------------

TEST(RetractBinary, LogisticInverse) {
  for (double delta : {-3.0, -0.5, 0.7, 4.0}) {
    Matrix a(1, 2);
    a << 0.0, delta;
    RetractionOptions opts;
    opts.tol = 1e-14;
    const RetractionResult r = retract_binary(a, Vector{{0.0, 1.0}}, Vector{{1.0}}, 0.5, opts);
    EXPECT_NEAR(r.report.shift, -delta, 1e-12);
    EXPECT_LE(r.report.residual, 1e-14);
  }
}

TEST(RetractBinary, CenteringIsExact) {
  const Matrix a = Matrix::Zero(3, 2);  // C = 1.5 * 3 = 4.5 exactly
  const RetractionResult r = retract_binary(a, Vector{{1.0, 2.0}}, Vector::Ones(3), 4.5);
  EXPECT_EQ(r.report.shift, 0.0);
  EXPECT_EQ(r.report.iterations, 0);
  EXPECT_TRUE(r.logits == a);
}

TEST(RetractBinary, ResidualWithinToleranceAndShiftAlongCosts) {
  RngStream rng(28);
  for (int trial = 0; trial < 100; ++trial) {
    const BudgetProblem p = random_problem(rng, 20, 6);
    const Matrix a = random_logits(rng, 20, 6, 3.0);
    const RetractionResult r = retract_binary(a, p);
    EXPECT_LE(std::abs(expected_cost(r.logits, p) - p.budget), 1e-8);
    EXPECT_LE(r.report.residual, 1e-8);
    EXPECT_LE(r.report.iterations, 100);
    Matrix expected = a;
    expected.rowwise() += r.report.shift * p.option_costs.transpose();
    EXPECT_LE((r.logits - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RetractBinary, ShiftSpaceStopUsesCeilLog2Iterations) {
  // R = 100, eps = 1e-8: ceil(log2(R / eps)) = 34.
  RngStream rng(29);
  RetractionOptions opts;
  opts.stop = RetractionStop::kShiftWidth;
  opts.tol = 1e-8;
  opts.half_bracket = 50.0;
  const int bound = static_cast<int>(std::ceil(std::log2(100.0 / 1e-8)));
  ASSERT_EQ(bound, 34);
  for (int trial = 0; trial < 50; ++trial) {
    const BudgetProblem p = random_problem(rng, 30, 8);
    const RetractionResult r = retract_binary(random_logits(rng, 30, 8, 2.0), p, opts);
    EXPECT_LE(r.report.iterations, bound);
  }
}

TEST(RetractBinary, BracketAutoDoublesThenExhausts) {
  Matrix a(1, 2);
  a << 0.0, -200.0;  // needs t near 200: outside +-50, inside +-1600
  const RetractionResult r = retract_binary(a, Vector{{1.0, 2.0}}, Vector{{1.0}}, 1.5);
  EXPECT_NEAR(r.report.shift, 200.0, 1e-6);
  a(0, 1) = -1e6;
  try {
    retract_binary(a, Vector{{1.0, 2.0}}, Vector{{1.0}}, 1.5);
    FAIL() << "expected BracketExhausted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBracketExhausted);
  }
}

TEST(RetractBinary, MonotoneAlongCosts) {
  RngStream rng(30);
  for (int trial = 0; trial < 100; ++trial) {
    const BudgetProblem p = random_problem(rng, 10, 5);
    const Matrix a = random_logits(rng, 10, 5, 2.0);
    double t1 = rng.uniform(-10.0, 10.0), t2 = rng.uniform(-10.0, 10.0);
    if (t1 > t2) std::swap(t1, t2);
    if (t2 - t1 < 1e-3) t2 = t1 + 1e-3;
    EXPECT_LT(shifted_expected_cost(a, p.option_costs, p.group_weights, t1),
              shifted_expected_cost(a, p.option_costs, p.group_weights, t2));
  }
}

TEST(RetractBinary, LocalRigidityScalesQuadratically) {
  RngStream rng(31);
  const BudgetProblem p = random_problem(rng, 10, 6);
  RetractionOptions tight;
  tight.stop = RetractionStop::kShiftWidth;
  tight.tol = 1e-18;
  tight.max_iters = 200;
  const Matrix alpha = retract_binary(random_logits(rng, 10, 6, 1.5), p, tight).logits;
  const Matrix xi = tangent_project(random_logits(rng, 10, 6), constraint_normal(alpha, p));
  std::vector<double> kappas;
  for (double t : {1e-2, 1e-3, 1e-4}) {
    const Matrix moved = retract_binary(alpha + t * xi, p, tight).logits;
    kappas.push_back((moved - alpha - t * xi).norm() / (t * t));
  }
  const double lo = *std::min_element(kappas.begin(), kappas.end());
  const double hi = *std::max_element(kappas.begin(), kappas.end());
  EXPECT_GT(lo, 0.0);
  EXPECT_LE(hi / lo, 1.5) << kappas[0] << " " << kappas[1] << " " << kappas[2];
}

TEST(SecondOrderViolation, ProjectedStepsQuadraticRawStepsLinear) {
  RngStream rng(32);
  const BudgetProblem p = random_problem(rng, 10, 6);
  const Matrix alpha = random_logits(rng, 10, 6, 1.5);
  const Matrix g = random_logits(rng, 10, 6);
  const Matrix d_tan = tangent_project(g, constraint_normal(alpha, p));
  const double base = expected_cost(alpha, p);
  std::vector<double> etas = {1e-1, 1e-2, 1e-3, 1e-4}, tan_v, raw_v;
  for (double eta : etas) {
    tan_v.push_back(std::abs(expected_cost(alpha - eta * d_tan, p) - base));
    raw_v.push_back(std::abs(expected_cost(alpha - eta * g, p) - base));
  }
  EXPECT_NEAR(loglog_slope(etas, tan_v), 2.0, 0.3);
  EXPECT_NEAR(loglog_slope(etas, raw_v), 1.0, 0.3);
}

// --- slack -----------------------------------------------------------------

TEST_F(ProjectionTest, SlackProjectAtZeroSlackIsTangentProject) {
  const auto [ga, gs] = slack_project(g_, normal_, 0.0);
  EXPECT_TRUE(ga == tangent_project(g_, normal_));
  EXPECT_EQ(gs, 0.0);
}

TEST_F(ProjectionTest, SlackProjectKeepsOrthogonalInput) {
  const Matrix t = tangent_project(g_, normal_);
  const auto [ga, gs] = slack_project(t, normal_, 0.7);
  EXPECT_LE((ga - t).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(std::abs(gs), 1e-14);
}

TEST(SlackProject, AugmentedInnerProductVanishes) {
  RngStream rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const BudgetProblem p = random_problem(rng, 8, 5);
    const Normal n = constraint_normal(random_logits(rng, 8, 5, 2.0), p);
    const Matrix g = random_logits(rng, 8, 5);
    const double s = rng.uniform(0.0, 3.0);
    const double gs_in = rng.uniform(-1.0, 1.0);
    const auto [ga, gs] = slack_project(g, n, s, gs_in);
    const double scale = std::sqrt(g.squaredNorm() + gs_in * gs_in) *
                         std::sqrt(n.squared_norm + 4.0 * s * s);
    EXPECT_LE(std::abs(inner(ga, n.entries) + gs * 2.0 * s), 1e-12 * scale);
  }
}

TEST(SlackRetract, UnderBudgetKeepsLogits) {
  BudgetProblem p{Vector{{1.0, 2.0}}, Vector{{1.0}}, 1.8, std::nullopt, 0.0};
  const Matrix a = Matrix::Zero(1, 2);  // C = 1.5
  const SlackRetractionResult r = slack_retract(a, p);
  EXPECT_TRUE(r.logits == a);
  EXPECT_DOUBLE_EQ(r.slack.s, std::sqrt(1.8 - 1.5));
  EXPECT_NEAR(expected_cost(r.logits, p) + r.slack.s * r.slack.s, p.budget, 1e-12);
}

TEST(SlackRetract, OverBudgetRetractsWithZeroSlack) {
  BudgetProblem p{Vector{{1.0, 2.0}}, Vector{{1.0}}, 1.2, std::nullopt, 0.0};
  const SlackRetractionResult r = slack_retract(Matrix::Zero(1, 2), p);
  EXPECT_EQ(r.slack.s, 0.0);
  EXPECT_LE(std::abs(expected_cost(r.logits, p) - p.budget), 1e-8);
}

TEST(SlackRetract, ExactlyOnBudgetIsContinuous) {
  BudgetProblem p{Vector{{1.0, 2.0}}, Vector{{1.0}}, 1.5, std::nullopt, 0.0};
  const Matrix a = Matrix::Zero(1, 2);
  const SlackRetractionResult r = slack_retract(a, p);
  EXPECT_EQ(r.slack.s, 0.0);
  EXPECT_TRUE(r.logits == a);
}

TEST(SlackRetract, ConsistencyOnRandomPoints) {
  RngStream rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const BudgetProblem p = random_problem(rng, 10, 5);
    const SlackRetractionResult r = slack_retract(random_logits(rng, 10, 5, 3.0), p);
    const double c = expected_cost(r.logits, p);
    EXPECT_GE(r.slack.s, 0.0);
    EXPECT_LE(std::abs(c + r.slack.s * r.slack.s - p.budget), 1e-8);
    EXPECT_LE(c, p.budget + 1e-8);
  }
}

// --- multiple constraints ---------------------------------------------------

ConstraintSet random_set(RngStream& rng, int q, int k) {
  ConstraintSet set;
  for (int j = 0; j < q; ++j) {
    LinearConstraint c;
    c.option_costs.resize(k);
    for (int m = 0; m < k; ++m) c.option_costs[m] = rng.uniform(1.0, 10.0);
    set.constraints.push_back(c);
  }
  return set;
}

TEST(MultiProject, SingleConstraintMatchesTangentProject) {
  RngStream rng(35);
  const BudgetProblem p = random_problem(rng, 10, 6);
  const Matrix a = random_logits(rng, 10, 6, 2.0);
  const Normal n = constraint_normal(a, p);
  const Matrix g = random_logits(rng, 10, 6);
  EXPECT_LE((multi_project(g, {n}) - tangent_project(g, n)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MultiProject, OrthogonalNormalsEqualSequentialProjections) {
  // Disjoint supports make the normals mutually orthogonal.
  Normal a, b;
  a.entries = Matrix::Zero(2, 3);
  b.entries = Matrix::Zero(2, 3);
  a.entries.row(0) << 1.0, -2.0, 1.0;
  b.entries.row(1) << -0.5, 0.0, 0.5;
  a.squared_norm = a.entries.squaredNorm();
  b.squared_norm = b.entries.squaredNorm();
  RngStream rng(36);
  const Matrix g = random_logits(rng, 2, 3);
  const Matrix seq = tangent_project(tangent_project(g, a), b);
  EXPECT_LE((multi_project(g, {a, b}) - seq).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MultiProject, SixteenConstraintsAllInnerProductsVanish) {
  RngStream rng(37);
  const int n = 60, k = 32;
  const ConstraintSet set = random_set(rng, 16, k);
  const Vector w = Vector::Ones(n);
  const Matrix a = random_logits(rng, n, k, 1.0);
  const std::vector<Normal> normals = constraint_normals(a, set, w);
  const Matrix g = random_logits(rng, n, k);
  const Matrix t = multi_project(g, normals);
  for (const Normal& nj : normals) {
    EXPECT_LE(std::abs(inner(t, nj.entries)), 1e-10 * g.norm() * nj.entries.norm());
  }
}

TEST(MultiProject, DependentNormalsRejected) {
  RngStream rng(38);
  ConstraintSet set = random_set(rng, 2, 5);
  set.constraints[1].option_costs = 2.0 * set.constraints[0].option_costs;
  const Matrix a = random_logits(rng, 4, 5);
  try {
    multi_project(random_logits(rng, 4, 5), constraint_normals(a, set, Vector::Ones(4)));
    FAIL() << "expected DependentNormals";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDependentNormals);
  }
}

TEST(ShiftJacobian, SingleConstraintIsVarianceSum) {
  RngStream rng(39);
  const BudgetProblem p = random_problem(rng, 12, 6);
  const Matrix a = random_logits(rng, 12, 6, 2.0);
  ConstraintSet set;
  set.constraints.push_back({p.option_costs, p.budget});
  const Matrix j = shift_jacobian(a, set, p.group_weights);
  ASSERT_EQ(j.rows(), 1);
  EXPECT_NEAR(j(0, 0), retraction_derivative(a, p, 0.0), 1e-12 * j(0, 0));
}

TEST(ShiftJacobian, MatchesFiniteDifferencesOfShiftedCosts) {
  RngStream rng(40);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 8, k = 6, q = 3;
    const ConstraintSet set = random_set(rng, q, k);
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = rng.uniform(0.5, 2.0);
    const Matrix a = random_logits(rng, n, k, 1.5);
    const Matrix jac = shift_jacobian(a, set, w);
    for (int l = 0; l < q; ++l) {
      const auto& cl = set.constraints[static_cast<std::size_t>(l)].option_costs;
      for (int j = 0; j < q; ++j) {
        const auto& cj = set.constraints[static_cast<std::size_t>(j)].option_costs;
        const double fd = testing::fd_derivative(
            [&](double t) {
              Matrix s = a;
              s.rowwise() += t * cl.transpose();
              return expected_cost(s, cj, w);
            },
            0.0, 1e-6);
        EXPECT_LE(std::abs(jac(j, l) - fd), 1e-5 * std::abs(jac(j, l)) + 1e-9);
      }
    }
  }
}

TEST(MultiRetractNewton, FeasibleInputNeedsNoIterations) {
  RngStream rng(41);
  ConstraintSet set = random_set(rng, 3, 6);
  const Matrix a = random_logits(rng, 10, 6);
  const Vector w = Vector::Ones(10);
  for (auto& c : set.constraints) c.budget = expected_cost(a, c.option_costs, w);
  const NewtonResult r = multi_retract_newton(a, set, w, 1e-10, 20);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_TRUE(r.logits == a);
}

TEST(MultiRetractNewton, SixteenConstraintsConvergeQuickly) {
  const MultiScenario inst = generate_multi(3);
  const Vector& w = inst.base.group_weights;
  RngStream rng(42);
  const Matrix start = random_logits(rng, kMultiGroups, kMultiOptions, 0.5);
  const NewtonResult r = multi_retract_newton(start, inst.constraints, w, 1e-11, 20);
  EXPECT_LE(r.iterations, 10);
  EXPECT_LE(constraint_residuals(r.logits, inst.constraints, w).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LE(r.max_residual, 1e-11);
}

}  // namespace
}  // namespace rco

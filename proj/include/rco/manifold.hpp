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

// Geometry of the budget manifold {alpha : C(alpha) = B} in logit space:
// expected cost, its closed-form normal, tangent projection, retraction along
// the broadcast cost vector, momentum transport, the slack-augmented variant
// for C(alpha) <= B and the q-constraint generalization.

#ifndef RCO_MANIFOLD_HPP_
#define RCO_MANIFOLD_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "rco/core.hpp"

namespace rco {

/// Gradient of the expected cost with its cached squared Frobenius norm.
struct Normal {
  Matrix entries;
  double squared_norm = 0.0;
};

struct RetractionReport {
  double shift = 0.0;  // t*
  int iterations = 0;  // bisection midpoints evaluated
  double residual = 0.0;  // |C(result) - B|
};

struct RetractionResult {
  Matrix logits;
  RetractionReport report;
};

enum class RetractionStop {
  kCostResidual,  // stop once |C - B| <= tol
  kShiftWidth,    // stop once the bracket on t is no wider than tol
};

struct RetractionOptions {
  double tol = 1e-8;
  double half_bracket = 50.0;     // initial bracket is [-half, +half]
  double max_half_bracket = 1600.0;
  int max_iters = 100;
  RetractionStop stop = RetractionStop::kCostResidual;
};

struct SlackState {
  double s = 0.0;
};

inline constexpr double kZeroNormalThreshold = 1e-300;

namespace detail {

/// Expected cost of one row shifted by t along the costs.
inline double shifted_row_cost(const double* row, const double* costs, Eigen::Index k,
                               double t) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < k; ++j) m = std::max(m, row[j] + t * costs[j]);
  double z = 0.0;
  double zc = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double e = std::exp(row[j] + t * costs[j] - m);
    z += e;
    zc += e * costs[j];
  }
  return zc / z;
}

}  // namespace detail

/// C(alpha + t * c~) = sum_i w_i <softmax(alpha_i + t c), c>.
inline double shifted_expected_cost(const Matrix& logits, const Vector& costs,
                                    const Vector& weights, double t) {
  const Eigen::Index k = logits.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    total += weights[i] * detail::shifted_row_cost(logits.row(i).data(), costs.data(), k, t);
  }
  return total;
}

inline double expected_cost(const Matrix& logits, const Vector& costs, const Vector& weights) {
  return shifted_expected_cost(logits, costs, weights, 0.0);
}

inline double expected_cost(const Matrix& logits, const BudgetProblem& problem) {
  return expected_cost(logits, problem.option_costs, problem.group_weights);
}

/// Entry (i,k) is w_i p_ik (c_k - E_{p_i}[c]).
inline Normal constraint_normal(const Matrix& logits, const Vector& costs,
                                const Vector& weights) {
  Normal n;
  n.entries = softmax_rows(logits);
  // Centering on c_0 keeps equal costs exactly zero after rounding.
  const Eigen::RowVectorXd centered = (costs.array() - costs[0]).matrix().transpose();
  for (Eigen::Index i = 0; i < n.entries.rows(); ++i) {
    auto row = n.entries.row(i);
    const double mean = row.dot(centered);
    row = weights[i] * (row.array() * (centered.array() - mean)).matrix();
  }
  n.squared_norm = n.entries.squaredNorm();
  return n;
}

inline Normal constraint_normal(const Matrix& logits, const BudgetProblem& problem) {
  return constraint_normal(logits, problem.option_costs, problem.group_weights);
}

/// g - (<g,n> / |n|^2) n.
inline Matrix tangent_project(const Matrix& g, const Normal& n) {
  if (!(n.squared_norm >= kZeroNormalThreshold)) {
    throw Error(ErrorCode::kZeroNormal, "normal vector has vanishing norm");
  }
  const double coef = g.cwiseProduct(n.entries).sum() / n.squared_norm;
  return g - coef * n.entries;
}

/// Vector transport by projection onto the tangent space at the new point.
inline Matrix transport(const Matrix& m, const Normal& n_new) { return tangent_project(m, n_new); }

/// d/dt C(alpha + t c~) = sum_i w_i Var_{p_i(t)}[c].
inline double retraction_derivative(const Matrix& logits, const Vector& costs,
                                    const Vector& weights, double t) {
  const Eigen::Index k = logits.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double* row = logits.row(i).data();
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) m = std::max(m, row[j] + t * costs[j]);
    double z = 0.0, z1 = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double e = std::exp(row[j] + t * costs[j] - m);
      z += e;
      z1 += e * costs[j];
    }
    const double mean = z1 / z;
    // Centered form avoids cancellation in E[c^2] - E[c]^2.
    double var = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double d = costs[j] - mean;
      var += std::exp(row[j] + t * costs[j] - m) / z * d * d;
    }
    total += weights[i] * var;
  }
  return total;
}

inline double retraction_derivative(const Matrix& logits, const BudgetProblem& problem,
                                    double t) {
  return retraction_derivative(logits, problem.option_costs, problem.group_weights, t);
}

/// Finds t* with C(alpha + t* c~) = budget by bisection on the strictly
/// increasing map t -> C(alpha + t c~) and applies the shift.
inline RetractionResult retract_binary(const Matrix& logits, const Vector& costs,
                                       const Vector& weights, double budget,
                                       const RetractionOptions& opts = {}) {
  auto f = [&](double t) { return shifted_expected_cost(logits, costs, weights, t) - budget; };

  RetractionResult out;
  const double f0 = f(0.0);
  if (opts.stop == RetractionStop::kCostResidual && std::abs(f0) <= opts.tol) {
    out.logits = logits;
    out.report = {0.0, 0, std::abs(f0)};
    return out;
  }

  double half = opts.half_bracket;
  double lo = -half, hi = half;
  double f_lo = f(lo), f_hi = f(hi);
  while (f_lo > 0.0 || f_hi < 0.0) {
    half *= 2.0;
    if (half > opts.max_half_bracket) {
      throw Error(ErrorCode::kBracketExhausted,
                  "no sign change of C(alpha + t c) - B within |t| <= " +
                      std::to_string(opts.max_half_bracket));
    }
    lo = -half;
    hi = half;
    f_lo = f(lo);
    f_hi = f(hi);
  }

  double best_t = std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
  double best_f = std::min(std::abs(f_lo), std::abs(f_hi));
  int iters = 0;
  while (iters < opts.max_iters) {
    if (opts.stop == RetractionStop::kShiftWidth && hi - lo <= opts.tol) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket collapsed to adjacent doubles
    const double fm = f(mid);
    ++iters;
    if (std::abs(fm) < best_f || opts.stop == RetractionStop::kShiftWidth) {
      best_f = std::abs(fm);
      best_t = mid;
    }
    if (opts.stop == RetractionStop::kCostResidual && std::abs(fm) <= opts.tol) break;
    if (fm < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  out.logits = logits;
  out.logits.rowwise() += best_t * costs.transpose();
  out.report = {best_t, iters, std::abs(f(best_t))};
  return out;
}

inline RetractionResult retract_binary(const Matrix& logits, const BudgetProblem& problem,
                                       const RetractionOptions& opts = {}) {
  return retract_binary(logits, problem.option_costs, problem.group_weights, problem.budget,
                        opts);
}

/// Tangent projection in the (alpha, s) space for C(alpha) + s^2 = B, applied
/// to (g, g_s). Returns the alpha-component and the s-component.
inline std::pair<Matrix, double> slack_project(const Matrix& g, const Normal& n, double s,
                                               double g_s = 0.0) {
  const double denom = n.squared_norm + 4.0 * s * s;
  if (!(denom >= kZeroNormalThreshold)) {
    throw Error(ErrorCode::kZeroNormal, "augmented normal has vanishing norm");
  }
  const double coef = (g.cwiseProduct(n.entries).sum() + g_s * 2.0 * s) / denom;
  return {g - coef * n.entries, g_s - coef * 2.0 * s};
}

struct SlackRetractionResult {
  Matrix logits;
  SlackState slack;
  RetractionReport report;
};

/// Restores C(alpha) + s^2 = B: over budget retracts alpha onto C = B with
/// s = 0, otherwise keeps alpha and sets s = sqrt(B - C).
inline SlackRetractionResult slack_retract(const Matrix& logits, const BudgetProblem& problem,
                                           const RetractionOptions& opts = {}) {
  const double cost = expected_cost(logits, problem);
  SlackRetractionResult out;
  if (cost > problem.budget) {
    auto r = retract_binary(logits, problem, opts);
    out.logits = std::move(r.logits);
    out.report = r.report;
    out.slack.s = 0.0;
  } else {
    out.logits = logits;
    out.slack.s = std::sqrt(problem.budget - cost);
    out.report = {0.0, 0, 0.0};
  }
  return out;
}

// ---------------------------------------------------------------------------
// q simultaneous equality constraints.

/// K x q matrix whose column j is constraint j's cost vector.
inline Matrix cost_columns(const ConstraintSet& set) {
  const auto q = static_cast<Eigen::Index>(set.size());
  const auto k = set.constraints.front().option_costs.size();
  Matrix c(k, q);
  for (Eigen::Index j = 0; j < q; ++j) c.col(j) = set.constraints[j].option_costs;
  return c;
}

inline Vector constraint_costs(const Matrix& logits, const ConstraintSet& set,
                               const Vector& weights) {
  Vector out(static_cast<Eigen::Index>(set.size()));
  for (std::size_t j = 0; j < set.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] =
        expected_cost(logits, set.constraints[j].option_costs, weights);
  }
  return out;
}

inline Vector constraint_residuals(const Matrix& logits, const ConstraintSet& set,
                                   const Vector& weights) {
  Vector r = constraint_costs(logits, set, weights);
  for (std::size_t j = 0; j < set.size(); ++j) {
    r[static_cast<Eigen::Index>(j)] -= set.constraints[j].budget;
  }
  return r;
}

inline std::vector<Normal> constraint_normals(const Matrix& logits, const ConstraintSet& set,
                                              const Vector& weights) {
  std::vector<Normal> out;
  out.reserve(set.size());
  for (const auto& c : set.constraints) out.push_back(constraint_normal(logits, c.option_costs, weights));
  return out;
}

inline Matrix normal_gram(const std::vector<Normal>& normals) {
  const auto q = static_cast<Eigen::Index>(normals.size());
  Matrix gram(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    gram(a, a) = normals[a].squared_norm;
    for (Eigen::Index b = a + 1; b < q; ++b) {
      gram(a, b) = gram(b, a) = normals[a].entries.cwiseProduct(normals[b].entries).sum();
    }
  }
  return gram;
}

/// Ratio of extreme eigenvalues of a symmetric positive semi-definite matrix.
inline double condition_number(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sym), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

inline constexpr double kMaxGramCondition = 1e12;

/// g - N (N^T N)^{-1} N^T g with the normals stacked as columns of N.
inline Matrix multi_project(const Matrix& g, const std::vector<Normal>& normals) {
  if (normals.empty()) return g;
  const Matrix gram = normal_gram(normals);
  if (condition_number(gram) > kMaxGramCondition) {
    throw Error(ErrorCode::kDependentNormals, "constraint normals are nearly linearly dependent");
  }
  const auto q = static_cast<Eigen::Index>(normals.size());
  Vector rhs(q);
  for (Eigen::Index j = 0; j < q; ++j) rhs[j] = g.cwiseProduct(normals[j].entries).sum();
  const Vector coef = Eigen::LDLT<Eigen::MatrixXd>(Eigen::MatrixXd(gram)).solve(rhs);
  Matrix out = g;
  for (Eigen::Index j = 0; j < q; ++j) out -= coef[j] * normals[j].entries;
  return out;
}

/// J_jl = sum_i w_i Cov_{p_i}[c^(j), c^(l)], the Jacobian of the constraint
/// values with respect to shifts along each constraint's cost vector.
inline Matrix shift_jacobian(const Matrix& logits, const ConstraintSet& set,
                             const Vector& weights) {
  const Matrix p = softmax_rows(logits);
  const Matrix c = cost_columns(set);           // K x q
  const Matrix e = p * c;                        // N x q, E_{p_i}[c^(j)]
  const Vector pbar = p.transpose() * weights;   // K
  Matrix second = c.transpose() * pbar.asDiagonal() * c;
  Matrix first = e.transpose() * weights.asDiagonal() * e;
  return second - first;
}

struct NewtonResult {
  Matrix logits;
  int iterations = 0;
  double max_residual = 0.0;
};

inline constexpr int kNewtonHalvings = 8;

/// Solves C_j(alpha + sum_l t_l c~^(l)) = b_j for all j by Newton's method on
/// the shift vector t, halving steps that fail to reduce the residual norm.
inline NewtonResult multi_retract_newton(const Matrix& logits, const ConstraintSet& set,
                                         const Vector& weights, double tol, int max_iters) {
  const Matrix c = cost_columns(set);  // K x q
  NewtonResult out;
  out.logits = logits;
  Vector r = constraint_residuals(out.logits, set, weights);
  int iters = 0;
  while (r.cwiseAbs().maxCoeff() > tol) {
    if (iters >= max_iters) {
      throw Error(ErrorCode::kNewtonDiverged,
                  "residual " + std::to_string(r.cwiseAbs().maxCoeff()) + " above tolerance after " +
                      std::to_string(max_iters) + " Newton iterations");
    }
    const Matrix jac = shift_jacobian(out.logits, set, weights);
    const Vector step = Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd(jac)).solve(-r);
    if (!step.allFinite()) {
      throw Error(ErrorCode::kNewtonDiverged, "singular shift Jacobian");
    }
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= kNewtonHalvings; ++h, scale *= 0.5) {
      Matrix trial = out.logits;
      trial.rowwise() += (scale * (c * step)).transpose();
      Vector r_trial = constraint_residuals(trial, set, weights);
      if (r_trial.norm() < r.norm()) {
        out.logits = std::move(trial);
        r = std::move(r_trial);
        accepted = true;
        break;
      }
    }
    ++iters;
    if (!accepted) {
      throw Error(ErrorCode::kNewtonDiverged,
                  "residual norm not reduced after " + std::to_string(kNewtonHalvings) +
                      " step halvings");
    }
  }
  out.iterations = iters;
  out.max_residual = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  return out;
}

}  // namespace rco

#endif  // RCO_MANIFOLD_HPP_

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

// Gumbel perturbation, temperature annealing and straight-through gradient
// assembly against a user-supplied objective.

#ifndef RCO_STOCHASTIC_HPP_
#define RCO_STOCHASTIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

#include "rco/core.hpp"
#include "rco/knapsack.hpp"
#include "rco/rng.hpp"

namespace rco {

struct TemperatureSchedule {
  double tau0 = 1.0;
  double tau_min = 0.01;
  int total_steps = 1;
};

/// max(tau_min, tau0 * (tau_min / tau0)^(t / T)).
inline double temperature_at(const TemperatureSchedule& schedule, int t) {
  if (!(schedule.tau_min > 0.0 && schedule.tau_min <= schedule.tau0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature schedule needs 0 < tau_min <= tau0");
  }
  if (schedule.total_steps <= 0) return schedule.tau0;
  const double frac = static_cast<double>(t) / static_cast<double>(schedule.total_steps);
  return std::max(schedule.tau_min, schedule.tau0 * std::pow(schedule.tau_min / schedule.tau0, frac));
}

/// Loss value and its gradient with respect to the soft probabilities.
struct Evaluation {
  double loss = 0.0;
  Matrix grad;  // dL/dp, N x K
};

/// Extension point for attaching a loss to the optimizer.
///
/// `evaluate_hard` is the straight-through contract: the forward value is
/// taken at the discrete assignment `hard`, while the returned gradient is
/// with respect to the soft matrix `soft` (the softmax of the same perturbed
/// logits that produced `hard`). `evaluate_relaxed` is the fully soft loss
/// L(p) used when gradients are computed without sampling. Both must be
/// deterministic and return finite gradients.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual Evaluation evaluate_hard(const Assignment& hard, const Matrix& soft) const = 0;
  virtual Evaluation evaluate_relaxed(const Matrix& soft) const = 0;
};

/// L = -sum_ik p_ik v_ik: maximizes the (expected) total value.
class LinearValueObjective final : public Objective {
 public:
  explicit LinearValueObjective(Matrix values) : values_(std::move(values)), neg_(-values_) {}

  Evaluation evaluate_hard(const Assignment& hard, const Matrix& /*soft*/) const override {
    return {-assignment_value(hard, values_), neg_};
  }

  Evaluation evaluate_relaxed(const Matrix& soft) const override {
    return {-soft.cwiseProduct(values_).sum(), neg_};
  }

  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
  Matrix neg_;
};

inline constexpr double kGumbelUniformClamp = 1e-12;

/// -log(-log(u)) with u clamped to [1e-12, 1 - 1e-12].
inline double gumbel_from_uniform(double u) {
  u = std::clamp(u, kGumbelUniformClamp, 1.0 - kGumbelUniformClamp);
  return -std::log(-std::log(u));
}

inline Matrix sample_gumbel(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  Matrix g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) g(i, k) = gumbel_from_uniform(rng.uniform());
  }
  return g;
}

inline Matrix perturb(const Matrix& logits, const Matrix& gumbel, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  return (logits + gumbel) / tau;
}

/// Pulls dL/dp back through the row-wise softmax:
/// (dL/dalpha)_ik = p_ik (dL/dp_ik - sum_j dL/dp_ij p_ij).
inline Matrix softmax_backward(const Matrix& p, const Matrix& grad_p) {
  Matrix out(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double inner = p.row(i).dot(grad_p.row(i));
    out.row(i) = (p.row(i).array() * (grad_p.row(i).array() - inner)).matrix();
  }
  return out;
}

struct GradientSample {
  Matrix grad;  // w.r.t. the unperturbed logits
  double loss = 0.0;
};

/// Gradient of the relaxed objective at softmax(logits).
inline GradientSample relaxed_gradient(const Matrix& logits, const Objective& objective) {
  const Matrix p = softmax_rows(logits);
  Evaluation ev = objective.evaluate_relaxed(p);
  return {softmax_backward(p, ev.grad), ev.loss};
}

/// One Gumbel-STE sample: perturb, solve the knapsack on the perturbed logits,
/// evaluate at the hard solution and pull the soft gradient back through the
/// softmax at the perturbed logits and the 1/tau scaling.
inline GradientSample ste_sample(const Matrix& logits, const Objective& objective,
                                 const IntegerCostGrid& grid, double tau, RngStream stream) {
  const Matrix gumbel = sample_gumbel(logits.rows(), logits.cols(), stream);
  const Matrix perturbed = perturb(logits, gumbel, tau);
  const DpSolution z = dp_solve(perturbed, grid);
  const Matrix p_hat = softmax_rows(perturbed);
  Evaluation ev = objective.evaluate_hard(z.assignment, p_hat);
  return {softmax_backward(p_hat, ev.grad) / tau, ev.loss};
}

struct SteGradient {
  Matrix entries;
  int samples = 0;
  double mean_loss = 0.0;
};

/// Average of `samples` STE samples; sample j draws from `base.fork(j)`.
///
/// Accumulation always runs in sample order. With `parallel` the samples are
/// computed on worker threads first, so the result is bitwise identical to
/// the sequential path.
inline SteGradient ste_gradient(const Matrix& logits, const Objective& objective,
                                const IntegerCostGrid& grid, double tau, int samples,
                                const RngStream& base, bool parallel = false) {
  if (samples < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one Gumbel sample");
  std::vector<GradientSample> draws(static_cast<std::size_t>(samples));
  auto work = [&](std::size_t j) {
    draws[j] = ste_sample(logits, objective, grid, tau, base.fork(j));
  };
  if (parallel && samples > 1) {
    const unsigned hw = std::max(2u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, draws.size());
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t j = w; j < draws.size(); j += workers) work(j);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t j = 0; j < draws.size(); ++j) work(j);
  }

  SteGradient out;
  out.samples = samples;
  out.entries = Matrix::Zero(logits.rows(), logits.cols());
  double loss = 0.0;
  for (const auto& d : draws) {
    out.entries += d.grad;
    loss += d.loss;
  }
  out.entries /= static_cast<double>(samples);
  out.mean_loss = loss / static_cast<double>(samples);
  return out;
}

}  // namespace rco

#endif  // RCO_STOCHASTIC_HPP_

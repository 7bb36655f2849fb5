#pragma once

// Stochastic quadratic-approximation (online Newton) steps: constant-step
// LMS on the second-order expansion of the loss around a support point,
// with the rank-one per-example curvature applied through inner products.

#include "avgsgd/baselines.hpp"
#include "avgsgd/core.hpp"
#include "avgsgd/lms.hpp"
#include "avgsgd/losses.hpp"

#include <bit>
#include <cmath>
#include <string_view>

namespace avgsgd {

enum class SupportPolicy { two_step, two_step_doubling, doubling_approx, current_average };

inline std::string_view policy_name(SupportPolicy p) {
  switch (p) {
    case SupportPolicy::two_step: return "2step";
    case SupportPolicy::two_step_doubling: return "2step-dbl";
    case SupportPolicy::doubling_approx: return "dbl-approx";
    case SupportPolicy::current_average: return "online";
  }
  return "?";
}

inline SupportPolicy parse_policy(std::string_view s) {
  if (s == "2step" || s == "two_step") return SupportPolicy::two_step;
  if (s == "2step-dbl" || s == "two_step_doubling") return SupportPolicy::two_step_doubling;
  if (s == "dbl-approx" || s == "doubling_approx") return SupportPolicy::doubling_approx;
  if (s == "online" || s == "current_average") return SupportPolicy::current_average;
  throw ContractViolation("unknown support policy '" + std::string(s) + "'");
}

struct NewtonBoundParams {
  double kappa = 1.0;
  double rho = 4.0;
  std::size_t d = 1;
  double R = 0.0;
  double dist0 = 0.0;
};

struct Theorem3Bound {
  double bound = 0.0;
  bool valid = false;  ///< n >= (19 + 9 R dist0)^4
};

inline Theorem3Bound theorem3_bound(const NewtonBoundParams& p, std::size_t n) {
  require(n >= 1, "theorem3_bound: n must be >= 1");
  require(p.kappa >= 1.0 && p.rho >= 4.0, "theorem3_bound: requires kappa >= 1 and rho >= 4");
  require(p.R >= 0.0 && p.dist0 >= 0.0, "theorem3_bound: negative parameter");
  const double nn = static_cast<double>(n);
  const double base = 16.0 * p.R * p.dist0 + 19.0;
  const double bound = std::pow(p.kappa, 1.5) * std::pow(p.rho, 3) * static_cast<double>(p.d) / nn * std::pow(base, 4);
  return {bound, nn >= std::pow(19.0 + 9.0 * p.R * p.dist0, 4)};
}

/// theta_n = theta_{n-1} - gamma [l'(y, <x, s>) + l''(y, <x, s>) <x, theta_{n-1} - s>] x
/// for support point s. `support` may alias state.theta_bar().
inline void surrogate_step(IterateState& state, const DenseVector& support, const Observation& obs, double gamma,
                           LossModel model) {
  detail::check_dims(obs.dim(), state.dim(), "surrogate_step");
  detail::check_dims(dimension(support), state.dim(), "surrogate_step");
  detail::reject_explicit_target(obs, "surrogate_step");
  DenseVector& theta = state.mutable_theta();
  const double at_support = dot(obs.x, support);
  const double at_theta = dot(obs.x, theta);
  const auto [d1, d2] = loss_d1_d2(model, obs.y, at_support);
  axpy(-gamma * (d1 + d2 * (at_theta - at_support)), obs.x, theta);
  state.commit();
}

namespace detail {

// Phase 1: m1 averaged-SGD steps at gamma1 from theta0. Phase 2: m2
// surrogate steps at gamma2 around the phase-1 average, started there.
// report(k, state) is called after every step with k in 1..m1+m2.
template <ObservationStream S, class Report>
IterateState two_step_block(S& stream, std::size_t m1, std::size_t m2, double gamma1, double gamma2, LossModel model,
                            const DenseVector& theta0, std::size_t offset, Report&& report,
                            DenseVector* support_out = nullptr) {
  IterateState phase1(theta0);
  const StepSchedule sched1 = StepSchedule::constant(gamma1);
  for (std::size_t k = 1; k <= m1; ++k) {
    sgd_step(phase1, next_or_throw(stream, offset + k, "two-step procedure"), sched1, model);
    report(k, phase1);
  }
  const DenseVector support = phase1.theta_bar();
  if (support_out != nullptr) *support_out = support;
  if (m2 == 0) return IterateState(support);
  IterateState phase2(support);
  for (std::size_t k = 1; k <= m2; ++k) {
    surrogate_step(phase2, support, next_or_throw(stream, offset + m1 + k, "two-step procedure"), gamma2, model);
    report(m1 + k, phase2);
  }
  return phase2;
}

}  // namespace detail

struct TwoStepResult {
  DenseVector support;  ///< phase-1 average
  IterateState newton;  ///< phase-2 state; its average is the output

  const DenseVector& zeta() const { return newton.theta_bar(); }
};

/// n averaged-SGD steps at 1/(2 R^2 sqrt(n)) give a support point; n
/// surrogate steps at 1/R^2 around it, started at it, give the output.
/// Consumes 2n observations; the observer sees the phase-1 state for steps
/// 1..n and the phase-2 state for steps n+1..2n.
template <ObservationStream S, class Observer = NoObserver>
TwoStepResult run_two_step(S& stream, std::size_t n, LossModel model, double R2, const DenseVector& theta0,
                           const Checkpoints& checkpoints = {}, Observer&& observer = {}) {
  require(n >= 1, "run_two_step: n must be >= 1");
  require(R2 > 0.0, "run_two_step: R2 must be positive");
  CheckpointCursor cursor(checkpoints, observer);
  cursor.at(0, IterateState(theta0));
  const double gamma1 = 1.0 / (2.0 * R2 * std::sqrt(static_cast<double>(n)));
  const double gamma2 = 1.0 / R2;
  TwoStepResult out;
  out.newton = detail::two_step_block(
      stream, n, n, gamma1, gamma2, model, theta0, 0,
      [&](std::size_t k, const IterateState& s) { cursor.at(k, s); }, &out.support);
  return out;
}

/// Online Newton over n observations with the given support policy.
///   current_average   support = theta_bar_{k-1} at every step.
///   doubling_approx   support frozen, reset to theta_bar_{k-1} when k is a power of two.
///   two_step          ceil(n/2) SGD steps at gamma/(2 sqrt(ceil(n/2))), then floor(n/2)
///                     surrogate steps at gamma around the SGD average.
///   two_step_doubling two_step restarted on every dyadic block [2^j, 2^{j+1}) with the
///                     block's budget, warm-started from the previous block's output;
///                     the reported estimate is the last completed block's output.
/// The observer receives (step, state); the state's average is the estimate.
template <ObservationStream S, class Observer = NoObserver>
IterateState run_online_newton(S& stream, double gamma, std::size_t n, SupportPolicy policy, LossModel model,
                               IterateState state, const Checkpoints& checkpoints = {}, Observer&& observer = {}) {
  require(gamma >= 0.0, "run_online_newton: gamma must be nonnegative");
  CheckpointCursor cursor(checkpoints, observer);
  cursor.at(0, state);

  switch (policy) {
    case SupportPolicy::current_average: {
      for (std::size_t k = 1; k <= n; ++k) {
        surrogate_step(state, state.theta_bar(), next_or_throw(stream, k, "run_online_newton"), gamma, model);
        cursor.at(k, state);
      }
      return state;
    }
    case SupportPolicy::doubling_approx: {
      DenseVector support = state.theta_bar();
      for (std::size_t k = 1; k <= n; ++k) {
        if (std::has_single_bit(k)) support = state.theta_bar();
        surrogate_step(state, support, next_or_throw(stream, k, "run_online_newton"), gamma, model);
        cursor.at(k, state);
      }
      return state;
    }
    case SupportPolicy::two_step: {
      if (n == 0) return state;
      const std::size_t m1 = (n + 1) / 2;
      const std::size_t m2 = n / 2;
      const double gamma1 = gamma / (2.0 * std::sqrt(static_cast<double>(m1)));
      return detail::two_step_block(stream, m1, m2, gamma1, gamma, model, state.theta(), 0,
                                    [&](std::size_t k, const IterateState& s) { cursor.at(k, s); });
    }
    case SupportPolicy::two_step_doubling: {
      IterateState reported(state.theta_bar());
      for (std::size_t start = 1; start <= n; start *= 2) {
        const std::size_t budget = std::min(start, n - start + 1);
        const std::size_t m1 = (budget + 1) / 2;
        const std::size_t m2 = budget / 2;
        const double gamma1 = gamma / (2.0 * std::sqrt(static_cast<double>(m1)));
        const std::size_t offset = start - 1;
        std::size_t done = 0;
        IterateState block = detail::two_step_block(
            stream, m1, m2, gamma1, gamma, model, reported.theta_bar(), offset, [&](std::size_t k, const IterateState&) {
              done = k;
              if (k < budget) cursor.at(offset + k, reported);
            });
        reported = IterateState(block.theta_bar());
        cursor.at(offset + done, reported);
        if (start > n / 2) break;
      }
      return reported;
    }
  }
  throw ContractViolation("run_online_newton: unknown support policy");
}

}  // namespace avgsgd

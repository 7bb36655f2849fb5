#pragma once

// Constant-step-size least-mean-squares with Polyak-Ruppert averaging, the
// non-asymptotic bound calculators for it, and the H-expectation
// ("semi-stochastic") recursion used as a test oracle.

#include "avgsgd/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace avgsgd {

struct BoundParams {
  double R = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
  double kappa = 1.0;
  std::size_t d = 1;
  double dist0 = 0.0;  ///< ||theta_0 - theta_*||

  void validate() const {
    require(R >= 0.0 && sigma >= 0.0 && tau >= 0.0 && dist0 >= 0.0, "BoundParams: negative parameter");
    require(tau >= sigma, "BoundParams: tau must be >= sigma");
    require(kappa >= 1.0, "BoundParams: kappa must be >= 1");
  }
};

class StepSchedule {
 public:
  enum class Kind { constant, decaying };

  static StepSchedule constant(double gamma) {
    require(gamma >= 0.0, "StepSchedule: gamma must be nonnegative");
    return StepSchedule(Kind::constant, gamma, 1.0);
  }

  /// gamma_n = c / (R2 sqrt(n)), n >= 1.
  static StepSchedule decaying(double c, double R2) {
    require(c > 0.0 && R2 > 0.0, "StepSchedule: decaying schedule needs c > 0 and R2 > 0");
    return StepSchedule(Kind::decaying, c, R2);
  }

  Kind kind() const { return kind_; }

  /// Step size used at step index `step` (1-based).
  double at(std::size_t step) const {
    if (kind_ == Kind::constant) return scale_;
    require(step >= 1, "StepSchedule: step index is 1-based");
    return scale_ / (R2_ * std::sqrt(static_cast<double>(step)));
  }

  /// Value of gamma (constant) or c / R2 (decaying); used in reports.
  double nominal() const { return kind_ == Kind::constant ? scale_ : scale_ / R2_; }

 private:
  StepSchedule(Kind k, double scale, double R2) : kind_(k), scale_(scale), R2_(R2) {}
  Kind kind_;
  double scale_;
  double R2_;
};

/// theta_n = theta_{n-1} - gamma (<theta_{n-1}, x> x - z), then the average is
/// updated.
inline void lms_step(IterateState& state, const Observation& obs, double gamma) {
  detail::check_dims(obs.dim(), state.dim(), "lms_step");
  DenseVector& theta = state.mutable_theta();
  const double pred = dot(obs.x, theta);
  if (obs.z) {
    axpy(-gamma * pred, obs.x, theta);
    theta.noalias() += gamma * *obs.z;
  } else {
    axpy(-gamma * (pred - obs.y), obs.x, theta);
  }
  state.commit();
}

/// Runs n LMS steps from `state`, reporting (step, state) at every checkpoint
/// (step 0 is the initial state).
template <ObservationStream S, class Observer = NoObserver>
IterateState run_averaged_lms(S& stream, double gamma, std::size_t n, IterateState state,
                              const Checkpoints& checkpoints = {}, Observer&& observer = {}) {
  require(gamma >= 0.0, "run_averaged_lms: gamma must be nonnegative");
  CheckpointCursor cursor(checkpoints, observer);
  cursor.at(0, state);
  for (std::size_t k = 1; k <= n; ++k) {
    lms_step(state, next_or_throw(stream, k, "run_averaged_lms"), gamma);
    cursor.at(k, state);
  }
  return state;
}

/// Expected excess-risk bound at the average of the first n iterates
/// (theta_bar_{n-1}) for constant gamma with gamma R^2 < 1.
inline double theorem1_bound(const BoundParams& p, double gamma, std::size_t n) {
  p.validate();
  require(n >= 1, "theorem1_bound: n must be >= 1");
  const double g = gamma * p.R * p.R;
  require(gamma > 0.0 && g < 1.0, "theorem1_bound: requires 0 < gamma R^2 < 1");
  const double sqrt_g = std::sqrt(g);
  const double noise = p.sigma * std::sqrt(static_cast<double>(p.d)) / (1.0 - sqrt_g);
  const double init = p.R * p.dist0 / sqrt_g;
  const double s = noise + init;
  return s * s / (2.0 * static_cast<double>(n));
}

/// Bound on (E|f(theta_bar_{n-1}) - f(theta*)|^p)^{1/p} for
/// gamma <= 1/(12 p kappa R^2).
inline double theorem2_pmoment_bound(const BoundParams& params, double p, double gamma, std::size_t n) {
  params.validate();
  require(p >= 1.0, "theorem2_pmoment_bound: p must be >= 1");
  require(n >= 1, "theorem2_pmoment_bound: n must be >= 1");
  const double R2 = params.R * params.R;
  const double limit = 1.0 / (12.0 * p * params.kappa * R2);
  require(gamma > 0.0 && gamma <= limit * (1.0 + 1e-12), "theorem2_pmoment_bound: requires gamma <= 1/(12 p kappa R^2)");
  const double s = 7.0 * params.tau * std::sqrt(static_cast<double>(params.d)) +
                   params.R * params.dist0 * std::sqrt(3.0 + 2.0 / (gamma * p * R2));
  return p / (2.0 * static_cast<double>(n)) * s * s;
}

/// Threshold t with P(f(theta_bar_{n-1}) - f(theta*) >= t) <= delta, for
/// gamma <= 1/(12 kappa R^2).
inline double corollary_tail_threshold(const BoundParams& params, double gamma, double delta, std::size_t n) {
  params.validate();
  require(n >= 1, "corollary_tail_threshold: n must be >= 1");
  require(delta > 0.0 && delta <= 1.0, "corollary_tail_threshold: delta must be in (0, 1]");
  const double R2 = params.R * params.R;
  const double kr = params.kappa * R2;
  require(gamma > 0.0 && gamma <= (1.0 + 1e-12) / (12.0 * kr), "corollary_tail_threshold: requires gamma <= 1/(12 kappa R^2)");
  const double s = 7.0 * params.tau * std::sqrt(static_cast<double>(params.d)) +
                   params.R * params.dist0 * (std::sqrt(3.0) + std::sqrt(24.0 * params.kappa));
  return s * s / (24.0 * gamma * kr * static_cast<double>(n) * std::pow(delta, 12.0 * gamma * kr));
}

/// alpha_k = (I - gamma H) alpha_{k-1} + gamma xi_k for k = 1..n-1, returning
/// the average of alpha_0..alpha_{n-1}. `noise()` yields xi_k.
template <class NoiseSource>
DenseVector run_semistochastic(const DenseMatrix& H, NoiseSource&& noise, double gamma, std::size_t n,
                               const DenseVector& alpha0) {
  require(H.rows() == H.cols(), "run_semistochastic: H must be square");
  detail::check_dims(static_cast<std::size_t>(H.rows()), dimension(alpha0), "run_semistochastic");
  require(n >= 1, "run_semistochastic: n must be >= 1");
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(H, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  require(eig.eigenvalues().minCoeff() > 0.0, "run_semistochastic: H must be positive definite");
  require(gamma >= 0.0 && gamma * lmax <= 1.0 + 1e-12, "run_semistochastic: requires gamma lambda_max(H) <= 1");

  const DenseMatrix A = DenseMatrix::Identity(H.rows(), H.cols()) - gamma * H;
  DenseVector alpha = alpha0;
  DenseVector sum = alpha0;
  for (std::size_t k = 1; k < n; ++k) {
    const DenseVector xi = noise();
    alpha = A * alpha + gamma * xi;
    sum += alpha;
  }
  return sum / static_cast<double>(n);
}

}  // namespace avgsgd

#pragma once

// Comparison optimizers: plain (averaged or not) SGD, SAG over a finite
// training set, and diagonal Adagrad.

#include "avgsgd/core.hpp"
#include "avgsgd/data.hpp"
#include "avgsgd/lms.hpp"
#include "avgsgd/losses.hpp"

#include <cmath>
#include <random>

namespace avgsgd {

namespace detail {
inline void reject_explicit_target(const Observation& obs, const char* who) {
  if (obs.has_explicit_target()) {
    throw ContractViolation(std::string(who) + ": explicit least-squares targets are only accepted by lms_step");
  }
}
}  // namespace detail

/// theta_n = theta_{n-1} - gamma_n l'(y, <x, theta_{n-1}>) x, with gamma_n
/// taken at n = state.n() + 1.
inline void sgd_step(IterateState& state, const Observation& obs, const StepSchedule& schedule, LossModel model) {
  detail::check_dims(obs.dim(), state.dim(), "sgd_step");
  detail::reject_explicit_target(obs, "sgd_step");
  DenseVector& theta = state.mutable_theta();
  const double gamma = schedule.at(state.n() + 1);
  const double g = loss_d1(model, obs.y, dot(obs.x, theta));
  axpy(-gamma * g, obs.x, theta);
  state.commit();
}

template <ObservationStream S, class Observer = NoObserver>
IterateState run_sgd(S& stream, const StepSchedule& schedule, std::size_t n, LossModel model, IterateState state,
                     const Checkpoints& checkpoints = {}, Observer&& observer = {}) {
  CheckpointCursor cursor(checkpoints, observer);
  cursor.at(0, state);
  for (std::size_t k = 1; k <= n; ++k) {
    sgd_step(state, next_or_throw(stream, k, "run_sgd"), schedule, model);
    cursor.at(k, state);
  }
  return state;
}

// ---------------------------------------------------------------------------

/// Stochastic averaged gradient for linear models: one stored scalar l'_i per
/// example, gradient sum kept as sum_i l'_i x_i. Stored scalars start at 0 and
/// the sum is always divided by the full training-set size.
class SagState {
 public:
  SagState(const Dataset& ds, DenseVector theta0)
      : ds_(&ds), scalars_(ds.size(), 0.0), seen_(ds.size(), false),
        sum_(DenseVector::Zero(theta0.size())), theta_(std::move(theta0)) {
    require(!ds.empty(), "SagState: empty dataset");
    detail::check_dims(ds.dim, dimension(theta_), "SagState");
  }

  void update(std::size_t i, double gamma, LossModel model) {
    const Observation& obs = ds_->observations[i];
    detail::reject_explicit_target(obs, "run_sag");
    const double g = loss_d1(model, obs.y, dot(obs.x, theta_));
    axpy(g - scalars_[i], obs.x, sum_);
    scalars_[i] = g;
    if (!seen_[i]) {
      seen_[i] = true;
      ++seen_count_;
    }
    theta_.noalias() -= (gamma / static_cast<double>(ds_->size())) * sum_;
  }

  /// sum_i l'_i x_i recomputed from the stored scalars.
  DenseVector recompute_sum() const {
    DenseVector s = DenseVector::Zero(sum_.size());
    for (std::size_t i = 0; i < scalars_.size(); ++i) {
      if (scalars_[i] != 0.0) axpy(scalars_[i], ds_->observations[i].x, s);
    }
    return s;
  }

  const DenseVector& theta() const { return theta_; }
  const DenseVector& gradient_sum() const { return sum_; }
  const std::vector<double>& stored_scalars() const { return scalars_; }
  std::size_t seen_count() const { return seen_count_; }

 private:
  const Dataset* ds_;
  std::vector<double> scalars_;
  std::vector<bool> seen_;
  std::size_t seen_count_ = 0;
  DenseVector sum_;
  DenseVector theta_;
};

inline double sag_default_step(double R2) {
  require(R2 > 0.0, "sag_default_step: R2 must be positive");
  return 1.0 / (16.0 * R2);
}

/// SAG driven by an external index sampler, running until it is exhausted.
template <class Observer = NoObserver>
SagState run_sag_sampled(const Dataset& ds, double gamma, PassSampler sampler, LossModel model, DenseVector theta0,
                         const Checkpoints& checkpoints = {}, Observer&& observer = {}) {
  require(!ds.empty(), "run_sag: empty dataset");
  require(gamma > 0.0, "run_sag: gamma must be positive");
  SagState state(ds, std::move(theta0));
  CheckpointCursor cursor(checkpoints, observer);
  cursor.at(0, state.theta());
  for (std::size_t k = 1;; ++k) {
    const auto i = sampler.next();
    if (!i) break;
    state.update(*i, gamma, model);
    cursor.at(k, state.theta());
  }
  return state;
}

/// `passes * |ds|` SAG updates at uniformly sampled examples. The observer
/// receives (step, iterate).
template <class Observer = NoObserver>
SagState run_sag(const Dataset& ds, double gamma, std::size_t passes, LossModel model, Rng rng, DenseVector theta0,
                 const Checkpoints& checkpoints = {}, Observer&& observer = {}) {
  require(!ds.empty(), "run_sag: empty dataset");
  return run_sag_sampled(ds, gamma, PassSampler(ds.size(), passes * ds.size(), std::move(rng)), model,
                         std::move(theta0), checkpoints, observer);
}

// ---------------------------------------------------------------------------

/// Diagonal Adagrad: per-coordinate accumulated squared gradients, last
/// iterate reported (no averaging).
class AdagradState {
 public:
  static constexpr double kEpsilon = 1e-10;

  explicit AdagradState(DenseVector theta0)
      : theta_(std::move(theta0)), accum_(DenseVector::Zero(theta_.size())) {}

  void update(const Observation& obs, double base_step, LossModel model) {
    detail::check_dims(obs.dim(), dimension(theta_), "run_adagrad");
    detail::reject_explicit_target(obs, "run_adagrad");
    const double g = loss_d1(model, obs.y, dot(obs.x, theta_));
    if (g == 0.0) return;
    auto apply = [&](std::size_t j, double xj) {
      const double gj = g * xj;
      accum_[j] += gj * gj;
      theta_[j] -= base_step * gj / std::sqrt(accum_[j] + kEpsilon);
    };
    if (const auto* s = std::get_if<SparseVector>(&obs.x)) {
      for (std::size_t k = 0; k < s->nnz(); ++k) apply(s->indices()[k], s->values()[k]);
    } else {
      const auto& x = std::get<DenseVector>(obs.x);
      for (Eigen::Index j = 0; j < x.size(); ++j)
        if (x[j] != 0.0) apply(static_cast<std::size_t>(j), x[j]);
    }
  }

  const DenseVector& theta() const { return theta_; }
  const DenseVector& accumulators() const { return accum_; }

 private:
  DenseVector theta_;
  DenseVector accum_;
};

/// 1 / max_i ||x_i||_inf over a dataset.
inline double adagrad_default_step(const Dataset& ds) {
  require(!ds.empty(), "adagrad_default_step: empty dataset");
  double m = 0.0;
  for (const auto& o : ds.observations) m = std::max(m, max_abs(o.x));
  require(m > 0.0, "adagrad_default_step: all covariates are zero");
  return 1.0 / m;
}

template <ObservationStream S, class Observer = NoObserver>
AdagradState run_adagrad(S& stream, double base_step, std::size_t n, LossModel model, DenseVector theta0,
                         const Checkpoints& checkpoints = {}, Observer&& observer = {}) {
  require(base_step > 0.0, "run_adagrad: base_step must be positive");
  AdagradState state(std::move(theta0));
  CheckpointCursor cursor(checkpoints, observer);
  cursor.at(0, state.theta());
  for (std::size_t k = 1; k <= n; ++k) {
    state.update(next_or_throw(stream, k, "run_adagrad"), base_step, model);
    cursor.at(k, state.theta());
  }
  return state;
}

}  // namespace avgsgd

#pragma once

// Estimators for the problem constants (average radius R^2, kurtosis kappa,
// curvature ratio rho) and the full-batch reference optimum used to turn
// empirical risks into excess risks.

#include "avgsgd/core.hpp"
#include "avgsgd/data.hpp"
#include "avgsgd/losses.hpp"
#include "avgsgd/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace avgsgd {

/// Batch optimization stopped at its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double grad_norm)
      : std::runtime_error(what + " (gradient norm " + std::to_string(grad_norm) + ")"), grad_norm_(grad_norm) {}
  double grad_norm() const { return grad_norm_; }

 private:
  double grad_norm_;
};

namespace detail {

// M += w x x^T (full symmetric update).
inline void accumulate_outer(DenseMatrix& m, const Features& x, double w) {
  if (const auto* s = std::get_if<SparseVector>(&x)) {
    const auto& idx = s->indices();
    const auto& val = s->values();
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b) m(idx[a], idx[b]) += w * val[a] * val[b];
  } else {
    const auto& v = std::get<DenseVector>(x);
    m.noalias() += w * v * v.transpose();
  }
}

inline DenseMatrix second_moment(const Dataset& ds) {
  const auto d = static_cast<Eigen::Index>(ds.dim);
  DenseMatrix m = DenseMatrix::Zero(d, d);
  for (const auto& o : ds.observations) accumulate_outer(m, o.x, 1.0);
  return m / static_cast<double>(ds.size());
}

inline bool all_dense(const Dataset& ds) {
  for (const auto& o : ds.observations)
    if (!std::holds_alternative<DenseVector>(o.x)) return false;
  return true;
}

inline DenseMatrix design_matrix(const Dataset& ds) {
  DenseMatrix x(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(ds.dim));
  for (std::size_t i = 0; i < ds.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = to_dense(ds.observations[i].x).transpose();
  return x;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Empirical risk

inline double empirical_risk(const Dataset& ds, LossModel model, const DenseVector& theta) {
  require(!ds.empty(), "empirical_risk: empty dataset");
  double acc = 0.0;
  for (const auto& o : ds.observations) acc += loss_value(model, o.y, dot(o.x, theta));
  return acc / static_cast<double>(ds.size());
}

inline DenseVector empirical_gradient(const Dataset& ds, LossModel model, const DenseVector& theta) {
  require(!ds.empty(), "empirical_gradient: empty dataset");
  DenseVector g = DenseVector::Zero(theta.size());
  for (const auto& o : ds.observations) axpy(loss_d1(model, o.y, dot(o.x, theta)), o.x, g);
  return g / static_cast<double>(ds.size());
}

inline DenseMatrix empirical_hessian(const Dataset& ds, LossModel model, const DenseVector& theta) {
  require(!ds.empty(), "empirical_hessian: empty dataset");
  const auto d = static_cast<Eigen::Index>(ds.dim);
  DenseMatrix h = DenseMatrix::Zero(d, d);
  for (const auto& o : ds.observations) detail::accumulate_outer(h, o.x, loss_d1_d2(model, o.y, dot(o.x, theta)).second);
  return h / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------

/// R^2 = (1/n) sum_i ||x_i||^2.
inline double estimate_radius(const Dataset& ds) {
  require(!ds.empty(), "estimate_radius: empty dataset");
  double acc = 0.0;
  for (const auto& o : ds.observations) acc += squared_norm(o.x);
  return acc / static_cast<double>(ds.size());
}

enum class KappaMode { fastica, axes };

struct KappaOptions {
  std::size_t restarts = 20;
  std::size_t max_iterations = 200;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
  /// Also start the fixed point from every coordinate axis, so the result is
  /// never below the axes-mode estimate.
  bool seed_axes = true;
};

/// Axes mode: max_j E[x_j^4] / E[x_j^2]^2 over coordinates with nonzero
/// second moment.
inline double estimate_kappa_axes(const Dataset& ds) {
  require(!ds.empty(), "estimate_kappa: empty dataset");
  std::vector<double> m2(ds.dim, 0.0), m4(ds.dim, 0.0);
  for (const auto& o : ds.observations) {
    auto add = [&](std::size_t j, double v) {
      const double v2 = v * v;
      m2[j] += v2;
      m4[j] += v2 * v2;
    };
    if (const auto* s = std::get_if<SparseVector>(&o.x)) {
      for (std::size_t k = 0; k < s->nnz(); ++k) add(s->indices()[k], s->values()[k]);
    } else {
      const auto& v = std::get<DenseVector>(o.x);
      for (Eigen::Index j = 0; j < v.size(); ++j) add(static_cast<std::size_t>(j), v[j]);
    }
  }
  const double n = static_cast<double>(ds.size());
  double best = 1.0;
  for (std::size_t j = 0; j < ds.dim; ++j) {
    if (m2[j] == 0.0) continue;
    const double a = m2[j] / n;
    best = std::max(best, (m4[j] / n) / (a * a));
  }
  return best;
}

/// FastICA mode: maximizes E<z,x>^4 / <z,H z>^2 over directions with the
/// fixed point z <- H^{-1} E[<z,x>^3 x], run in whitened coordinates from
/// several starts at once.
inline double estimate_kappa_fastica(const Dataset& ds, const KappaOptions& opts = {}) {
  require(!ds.empty(), "estimate_kappa: empty dataset");
  const DenseMatrix x = detail::design_matrix(ds);
  const double n = static_cast<double>(x.rows());
  const DenseMatrix h = (x.transpose() * x) / n;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(h);
  const DenseVector& lam = eig.eigenvalues();
  if (lam.size() == 0 || lam.minCoeff() <= 1e-12 * std::max(lam.maxCoeff(), 0.0)) {
    throw ContractViolation("estimate_kappa: degenerate covariance in fastica mode; use axes mode");
  }
  const DenseMatrix whiten = eig.eigenvectors() * lam.cwiseInverse().cwiseSqrt().asDiagonal();
  const DenseMatrix u = x * whiten;
  const auto d = u.cols();

  const Eigen::Index axis_starts = opts.seed_axes ? d : 0;
  const Eigen::Index k = static_cast<Eigen::Index>(opts.restarts) + axis_starts;
  require(k >= 1, "estimate_kappa: need at least one start");
  DenseMatrix w(d, k);
  Rng rng = make_rng(opts.seed, 0, StreamRole::restarts);
  std::normal_distribution<double> normal;
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(opts.restarts); ++c)
    for (Eigen::Index j = 0; j < d; ++j) w(j, c) = normal(rng);
  if (opts.seed_axes) {
    // z = e_j in whitened coordinates is w = Lambda^{1/2} V^T e_j.
    const DenseMatrix unwhiten = lam.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    w.rightCols(axis_starts) = unwhiten;
  }
  w.colwise().normalize();

  double best = 1.0;
  std::vector<bool> active(static_cast<std::size_t>(k), true);
  for (std::size_t it = 0; it <= opts.max_iterations; ++it) {
    const DenseMatrix s = u * w;
    const DenseMatrix s2 = s.array().square().matrix();
    const Eigen::RowVectorXd objective = s2.array().square().colwise().sum().matrix() / n;
    best = std::max(best, objective.maxCoeff());
    if (it == opts.max_iterations) break;
    DenseMatrix g = (u.transpose() * (s2.array() * s.array()).matrix()) / n;
    g.colwise().normalize();
    bool any = false;
    for (Eigen::Index c = 0; c < k; ++c) {
      if (!active[static_cast<std::size_t>(c)]) continue;
      if (1.0 - std::abs(g.col(c).dot(w.col(c))) < opts.tolerance) active[static_cast<std::size_t>(c)] = false;
      w.col(c) = g.col(c);
      any = any || active[static_cast<std::size_t>(c)];
    }
    if (!any) {
      const DenseMatrix s_final = u * w;
      best = std::max(best, (s_final.array().pow(4).colwise().sum() / n).maxCoeff());
      break;
    }
  }
  return best;
}

inline double estimate_kappa(const Dataset& ds, KappaMode mode, const KappaOptions& opts = {}) {
  return mode == KappaMode::axes ? estimate_kappa_axes(ds) : estimate_kappa_fastica(ds, opts);
}

struct RhoOptions {
  /// Above this dimension only the loose bound 1 / min_i l''_i is reported.
  std::size_t dense_limit = 2000;
  double span_tolerance = 1e-10;
};

struct RhoEstimate {
  double rho = 0.0;
  bool loose = false;
  double inverse_min_curvature = 0.0;  ///< 1 / min_i l''(y_i, <theta*, x_i>)
};

/// Largest generalized eigenvalue of (Sigma, H) on the span of the data,
/// Sigma = E[x x^T] and H = E[l''(y, <theta*, x>) x x^T].
inline RhoEstimate estimate_rho(const Dataset& ds, const DenseVector& theta_star,
                                LossModel model = LossModel::logistic(), const RhoOptions& opts = {}) {
  require(!ds.empty(), "estimate_rho: empty dataset");
  detail::check_dims(ds.dim, dimension(theta_star), "estimate_rho");
  RhoEstimate out;
  double min_curv = std::numeric_limits<double>::infinity();
  for (const auto& o : ds.observations) min_curv = std::min(min_curv, loss_d1_d2(model, o.y, dot(o.x, theta_star)).second);
  out.inverse_min_curvature = 1.0 / min_curv;
  if (ds.dim > opts.dense_limit) {
    out.rho = out.inverse_min_curvature;
    out.loose = true;
    return out;
  }

  const DenseMatrix sigma = detail::second_moment(ds);
  const DenseMatrix h = empirical_hessian(ds, model, theta_star);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(sigma);
  const DenseVector& lam = eig.eigenvalues();
  const double top = lam.size() > 0 ? lam.maxCoeff() : 0.0;
  require(top > 0.0, "estimate_rho: all covariates are zero");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < lam.size(); ++j)
    if (lam[j] > opts.span_tolerance * top) keep.push_back(j);
  DenseMatrix basis(sigma.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) basis.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(keep[c]);

  const DenseMatrix sigma_r = basis.transpose() * sigma * basis;
  DenseMatrix h_r = basis.transpose() * h * basis;
  h_r = (0.5 * (h_r + h_r.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> heig(h_r, Eigen::EigenvaluesOnly);
  if (heig.eigenvalues().minCoeff() <= 1e-14 * std::max(1.0, heig.eigenvalues().maxCoeff())) {
    throw ContractViolation("estimate_rho: curvature matrix is singular on the data span");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> geig(0.5 * (sigma_r + sigma_r.transpose()), h_r,
                                                             Eigen::EigenvaluesOnly);
  out.rho = geig.eigenvalues().maxCoeff();
  return out;
}

// ---------------------------------------------------------------------------

struct BatchOptions {
  /// Stop when the norm of the mean gradient is at most this.
  double tolerance = 1e-10;
  std::size_t max_iterations = 200;
  /// Cap on ||theta*||; defaults to 1e3 / R when unset.
  std::optional<double> norm_cap;
  std::size_t dense_limit = 2000;
};

struct BatchReference {
  DenseVector theta_star;
  double f_star = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  bool near_separable = false;
};

namespace detail {

// Conjugate gradient for A v = b with A symmetric PSD, from v = 0.
template <class Apply>
DenseVector conjugate_gradient(Apply&& apply, const DenseVector& b, double tol, std::size_t max_iter) {
  DenseVector v = DenseVector::Zero(b.size());
  DenseVector r = b;
  DenseVector p = r;
  double rr = r.squaredNorm();
  const double stop = tol * tol;
  for (std::size_t it = 0; it < max_iter && rr > stop; ++it) {
    const DenseVector ap = apply(p);
    const double pap = p.dot(ap);
    if (pap <= 0.0) break;
    const double alpha = rr / pap;
    v += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return v;
}

inline DenseVector hessian_apply(const Dataset& ds, LossModel model, const DenseVector& theta, const DenseVector& v) {
  DenseVector out = DenseVector::Zero(v.size());
  for (const auto& o : ds.observations) {
    const double w = loss_d1_d2(model, o.y, dot(o.x, theta)).second;
    axpy(w * dot(o.x, v), o.x, out);
  }
  return out / static_cast<double>(ds.size());
}

}  // namespace detail

/// Minimizes the empirical risk by damped Newton iterations (one solve for
/// the square loss), using minimum-norm solves so the iterate stays on the
/// data span. Dimensions above `dense_limit` use matrix-free conjugate
/// gradient for the Newton systems.
inline BatchReference batch_reference(const Dataset& ds, LossModel model, const BatchOptions& opts = {}) {
  require(!ds.empty(), "batch_reference: empty dataset");
  const double R = std::sqrt(estimate_radius(ds));
  const double cap = opts.norm_cap.value_or(R > 0.0 ? 1e3 / R : std::numeric_limits<double>::infinity());
  const bool dense = ds.dim <= opts.dense_limit;

  BatchReference out;
  DenseVector theta = DenseVector::Zero(static_cast<Eigen::Index>(ds.dim));
  auto newton_direction = [&](const DenseVector& g) -> DenseVector {
    if (dense) {
      DenseMatrix h = empirical_hessian(ds, model, theta);
      h = (0.5 * (h + h.transpose())).eval();
      Eigen::CompleteOrthogonalDecomposition<DenseMatrix> cod(h);
      cod.setThreshold(1e-13);
      DenseVector step = cod.solve(-g);
      // One round of refinement against the same factorization.
      step += cod.solve(-g - h * step);
      return step;
    }
    return detail::conjugate_gradient([&](const DenseVector& v) { return detail::hessian_apply(ds, model, theta, v); },
                                      -g, 1e-3 * std::min(1.0, g.norm()) * g.norm(), 10 * ds.dim + 100);
  };

  double f = empirical_risk(ds, model, theta);
  for (std::size_t it = 0;; ++it) {
    const DenseVector g = empirical_gradient(ds, model, theta);
    out.grad_norm = g.norm();
    out.iterations = it;
    if (out.grad_norm <= opts.tolerance) break;
    if (it >= opts.max_iterations) {
      throw ConvergenceError("batch_reference: no convergence after " + std::to_string(it) + " iterations",
                             out.grad_norm);
    }
    const DenseVector step = newton_direction(g);
    const double slope = g.dot(step);
    double t = 1.0;
    DenseVector trial = theta + step;
    double f_trial = empirical_risk(ds, model, trial);
    // Once the predicted decrease is below the rounding level of f, the
    // line search can no longer see progress; take the full Newton step.
    const bool below_resolution = -slope <= 1e-13 * (1.0 + std::abs(f));
    if (!below_resolution) {
      while (slope < 0.0 && f_trial > f + 1e-4 * t * slope && t > 1e-12) {
        t *= 0.5;
        trial = theta + t * step;
        f_trial = empirical_risk(ds, model, trial);
      }
      if (!(f_trial <= f)) break;  // no decrease possible at working precision
    }
    theta = std::move(trial);
    f = f_trial;
    if (theta.norm() > cap) {
      theta *= cap / theta.norm();
      f = empirical_risk(ds, model, theta);
      out.grad_norm = empirical_gradient(ds, model, theta).norm();
      out.near_separable = true;
      break;
    }
  }
  out.theta_star = std::move(theta);
  out.f_star = f;
  return out;
}

/// Constants reported by the estimate-constants command.
struct ProblemConstants {
  double R2 = 0.0;
  double kappa = 1.0;
  KappaMode kappa_mode = KappaMode::axes;
  std::optional<RhoEstimate> rho;
  BatchReference reference;
};

inline ProblemConstants estimate_constants(const Dataset& ds, LossModel model, std::optional<KappaMode> mode = {},
                                           const KappaOptions& kopts = {}) {
  ProblemConstants pc;
  pc.R2 = estimate_radius(ds);
  pc.kappa_mode = mode.value_or(detail::all_dense(ds) && ds.dim <= 1000 ? KappaMode::fastica : KappaMode::axes);
  pc.kappa = estimate_kappa(ds, pc.kappa_mode, kopts);
  pc.reference = batch_reference(ds, model);
  if (model.is_logistic()) pc.rho = estimate_rho(ds, pc.reference.theta_star, model);
  return pc;
}

}  // namespace avgsgd

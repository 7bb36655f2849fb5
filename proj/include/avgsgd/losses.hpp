#pragma once

// Loss models in the prediction yhat = <theta, x>, with the first three
// derivatives, and runtime checks of the self-concordance bounds.

#include "avgsgd/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

namespace avgsgd {

enum class LossKind { square, logistic };

struct DerivTriple {
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

class LossModel {
 public:
  constexpr explicit LossModel(LossKind kind = LossKind::square) : kind_(kind) {}

  static constexpr LossModel square() { return LossModel(LossKind::square); }
  static constexpr LossModel logistic() { return LossModel(LossKind::logistic); }

  constexpr LossKind kind() const { return kind_; }
  constexpr bool is_logistic() const { return kind_ == LossKind::logistic; }

  std::string_view name() const { return is_logistic() ? "logistic" : "square"; }

  friend constexpr bool operator==(LossModel, LossModel) = default;

 private:
  LossKind kind_;
};

inline LossModel parse_loss(std::string_view s) {
  if (s == "square" || s == "lsq" || s == "least-squares") return LossModel::square();
  if (s == "logistic") return LossModel::logistic();
  throw ContractViolation("unknown loss '" + std::string(s) + "'");
}

namespace detail {
inline void check_logistic_label(double y) {
  if (y != 1.0 && y != -1.0) {
    throw ContractViolation("logistic loss: label must be -1 or +1, got " + std::to_string(y));
  }
}

// sigmoid(-m) = 1 / (1 + exp(m)), without overflow.
inline double sigmoid_neg(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}
}  // namespace detail

inline double loss_value(LossModel model, double y, double yhat) {
  if (!model.is_logistic()) {
    const double r = yhat - y;
    return 0.5 * r * r;
  }
  detail::check_logistic_label(y);
  const double m = y * yhat;
  if (m >= 0.0) return std::log1p(std::exp(-m));
  return -m + std::log1p(std::exp(m));
}

inline DerivTriple loss_derivatives(LossModel model, double y, double yhat) {
  if (!model.is_logistic()) return {yhat - y, 1.0, 0.0};
  detail::check_logistic_label(y);
  const double s = detail::sigmoid_neg(y * yhat);
  const double c = s * (1.0 - s);
  return {-y * s, c, -y * c * (1.0 - 2.0 * s)};
}

/// l' and l'' only; the optimizers never need l'''.
inline std::pair<double, double> loss_d1_d2(LossModel model, double y, double yhat) {
  if (!model.is_logistic()) return {yhat - y, 1.0};
  detail::check_logistic_label(y);
  const double s = detail::sigmoid_neg(y * yhat);
  return {-y * s, s * (1.0 - s)};
}

inline double loss_d1(LossModel model, double y, double yhat) { return loss_d1_d2(model, y, yhat).first; }

struct SelfConcordanceReport {
  double max_abs_d1 = -std::numeric_limits<double>::infinity();
  double max_d2 = -std::numeric_limits<double>::infinity();
  /// max over the grid of |l'''| - l''; nonpositive when |l'''| <= l'' holds.
  double max_d3_excess = -std::numeric_limits<double>::infinity();
  double argmax_d2_yhat = 0.0;
};

inline SelfConcordanceReport check_self_concordance(LossModel model,
                                                    std::span<const std::pair<double, double>> grid) {
  require(!grid.empty(), "check_self_concordance: empty grid");
  SelfConcordanceReport r;
  for (const auto& [y, yhat] : grid) {
    const DerivTriple t = loss_derivatives(model, y, yhat);
    r.max_abs_d1 = std::max(r.max_abs_d1, std::abs(t.d1));
    if (t.d2 > r.max_d2) {
      r.max_d2 = t.d2;
      r.argmax_d2_yhat = yhat;
    }
    r.max_d3_excess = std::max(r.max_d3_excess, std::abs(t.d3) - t.d2);
  }
  return r;
}

/// Largest value over the probes of
///   <theta - theta*, H (theta - theta*)> - 3 D - kappa rho D^2,  D = f(theta) - f(theta*).
/// Nonpositive whenever the weighted-distance inequality holds at every probe.
inline double check_distance_inequality(const std::function<double(const DenseVector&)>& f,
                                        const DenseMatrix& H, const DenseVector& theta_star,
                                        std::span<const DenseVector> probes, double kappa, double rho) {
  require(H.rows() == H.cols(), "check_distance_inequality: H must be square");
  detail::check_dims(static_cast<std::size_t>(H.rows()), dimension(theta_star), "check_distance_inequality");
  require((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + H.cwiseAbs().maxCoeff()),
          "check_distance_inequality: H is not symmetric");
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(H, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  require(eig.eigenvalues().minCoeff() >= -1e-12 * scale, "check_distance_inequality: H is not PSD");

  const double f_star = f(theta_star);
  double worst = -std::numeric_limits<double>::infinity();
  for (const DenseVector& theta : probes) {
    detail::check_dims(dimension(theta), dimension(theta_star), "check_distance_inequality");
    const DenseVector delta = theta - theta_star;
    const double gap = f(theta) - f_star;
    const double lhs = delta.dot(H * delta);
    worst = std::max(worst, lhs - 3.0 * gap - kappa * rho * gap * gap);
  }
  return worst;
}

}  // namespace avgsgd

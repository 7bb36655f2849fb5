#pragma once

// Experiment orchestration: optimizer x dataset x step-size grids with
// replications, excess-risk curves at logarithmic checkpoints, log-log slope
// fits, bound verification, and CSV / plot-data export.

#include "avgsgd/baselines.hpp"
#include "avgsgd/constants.hpp"
#include "avgsgd/core.hpp"
#include "avgsgd/data.hpp"
#include "avgsgd/lms.hpp"
#include "avgsgd/losses.hpp"
#include "avgsgd/newton.hpp"
#include "avgsgd/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace avgsgd {

enum class OptimizerId {
  avg_const_sgd,
  avg_decay_sgd,
  sgd_nonavg_const,
  sgd_nonavg_decay,
  lms_avg_const,
  newton_2step,
  newton_2step_dbl,
  newton_dbl_approx,
  newton_online,
  sag,
  adagrad,
};

inline std::string_view optimizer_name(OptimizerId id) {
  switch (id) {
    case OptimizerId::avg_const_sgd: return "avg-const-sgd";
    case OptimizerId::avg_decay_sgd: return "avg-decay-sgd";
    case OptimizerId::sgd_nonavg_const: return "sgd-nonavg-const";
    case OptimizerId::sgd_nonavg_decay: return "sgd-nonavg-decay";
    case OptimizerId::lms_avg_const: return "lms-avg-const";
    case OptimizerId::newton_2step: return "newton:2step";
    case OptimizerId::newton_2step_dbl: return "newton:2step-dbl";
    case OptimizerId::newton_dbl_approx: return "newton:dbl-approx";
    case OptimizerId::newton_online: return "newton:online";
    case OptimizerId::sag: return "sag";
    case OptimizerId::adagrad: return "adagrad";
  }
  return "?";
}

inline OptimizerId parse_optimizer(std::string_view s) {
  for (int k = 0; k <= static_cast<int>(OptimizerId::adagrad); ++k) {
    const auto id = static_cast<OptimizerId>(k);
    if (optimizer_name(id) == s) return id;
  }
  throw ContractViolation("unknown optimizer '" + std::string(s) + "'");
}

inline bool is_decaying(OptimizerId id) {
  return id == OptimizerId::avg_decay_sgd || id == OptimizerId::sgd_nonavg_decay;
}

inline std::optional<SupportPolicy> newton_policy(OptimizerId id) {
  switch (id) {
    case OptimizerId::newton_2step: return SupportPolicy::two_step;
    case OptimizerId::newton_2step_dbl: return SupportPolicy::two_step_doubling;
    case OptimizerId::newton_dbl_approx: return SupportPolicy::doubling_approx;
    case OptimizerId::newton_online: return SupportPolicy::current_average;
    default: return std::nullopt;
  }
}

struct DatasetSource {
  enum class Kind { synthetic, file };
  Kind kind = Kind::synthetic;
  SyntheticModel model = SyntheticModel::lsq;
  std::size_t d = 20;
  std::optional<double> theta_norm;
  std::string path;
};

struct StepRule {
  enum class Kind { theoretical, grid, absolute, relative };
  Kind kind = Kind::theoretical;
  /// absolute: gamma itself; relative: gamma = value / R^2 (decaying
  /// schedules: C = value).
  double value = 0.0;
  int grid_radius = 2;
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::optional<LossModel> loss;
  OptimizerId optimizer = OptimizerId::lms_avg_const;
  StepRule step;
  std::optional<std::size_t> n;
  std::optional<std::size_t> passes;
  /// Synthetic only: sample with replacement from a finite training set of
  /// this size instead of streaming fresh observations.
  std::optional<std::size_t> train_size;
  std::size_t replications = 10;
  std::uint64_t seed = 0;
  std::size_t checkpoints_per_decade = 50;
  std::size_t eval_size = 20000;
  std::optional<bool> normalize;
  double decay_c = 0.5;
  /// Synthetic only: theta_0 = theta* + init_offset * u with a seeded unit u.
  double init_offset = 0.0;

  LossModel effective_loss() const {
    if (loss) return *loss;
    if (dataset.kind == DatasetSource::Kind::synthetic && dataset.model == SyntheticModel::lsq) return LossModel::square();
    return LossModel::logistic();
  }

  bool effective_normalize() const { return normalize.value_or(dataset.kind == DatasetSource::Kind::file); }

  void validate() const {
    require(replications >= 1, "ExperimentConfig: replications must be >= 1");
    require(checkpoints_per_decade >= 1, "ExperimentConfig: checkpoints_per_decade must be >= 1");
    require(dataset.d >= 1, "ExperimentConfig: d must be >= 1");
    if (dataset.kind == DatasetSource::Kind::file) require(!dataset.path.empty(), "ExperimentConfig: empty dataset path");
    if (optimizer == OptimizerId::lms_avg_const) {
      require(!effective_loss().is_logistic(), "ExperimentConfig: lms-avg-const requires the square loss");
    }
    if (optimizer == OptimizerId::sag && dataset.kind == DatasetSource::Kind::synthetic) {
      require(train_size.has_value(), "ExperimentConfig: sag on synthetic data needs train_size");
    }
    if (step.kind == StepRule::Kind::absolute || step.kind == StepRule::Kind::relative) {
      require(step.value >= 0.0, "ExperimentConfig: step size must be nonnegative");
    }
    require(step.grid_radius >= 0, "ExperimentConfig: grid_radius must be >= 0");
  }
};

/// Excess-risk values at the checkpoints of every replication.
struct RiskCurve {
  std::string optimizer;
  double gamma = 0.0;
  std::vector<std::size_t> n;
  std::vector<std::vector<double>> train;  ///< [replication][checkpoint]
  std::vector<std::vector<double>> test;
  /// raw excess = stored value * normalization
  double train_normalization = 1.0;
  double test_normalization = 1.0;
  bool normalized = false;

  std::size_t replications() const { return train.size(); }
};

enum class Series { train, test };

inline const std::vector<std::vector<double>>& series_of(const RiskCurve& c, Series s) {
  return s == Series::train ? c.train : c.test;
}

inline std::vector<double> mean_curve(const RiskCurve& c, Series s = Series::train) {
  const auto& rows = series_of(c, s);
  std::vector<double> out(c.n.size(), 0.0);
  if (rows.empty()) return out;
  for (const auto& r : rows)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += r[k];
  for (double& v : out) v /= static_cast<double>(rows.size());
  return out;
}

/// Standard error of the mean across replications (0 for one replication).
inline std::vector<double> stderr_curve(const RiskCurve& c, Series s = Series::train) {
  const auto& rows = series_of(c, s);
  std::vector<double> out(c.n.size(), 0.0);
  if (rows.size() < 2) return out;
  const auto mean = mean_curve(c, s);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += (r[k] - mean[k]) * (r[k] - mean[k]);
  const double reps = static_cast<double>(rows.size());
  for (double& v : out) v = std::sqrt(v / (reps - 1.0) / reps);
  return out;
}

// ---------------------------------------------------------------------------
// Step sizes

/// Default step for an optimizer given R^2 (average radius). Decaying
/// schedules return C / R^2 with C = decay_c.
inline double theoretical_step(OptimizerId id, LossModel loss, double R2, double decay_c = 0.5,
                               double adagrad_step = 0.0) {
  require(R2 > 0.0, "theoretical_step: R2 must be positive");
  switch (id) {
    case OptimizerId::lms_avg_const: return 1.0 / (4.0 * R2);
    case OptimizerId::avg_const_sgd:
    case OptimizerId::sgd_nonavg_const: return loss.is_logistic() ? 1.0 / (2.0 * R2) : 1.0 / (4.0 * R2);
    case OptimizerId::avg_decay_sgd:
    case OptimizerId::sgd_nonavg_decay: return decay_c / R2;
    case OptimizerId::newton_2step:
    case OptimizerId::newton_2step_dbl: return 1.0 / R2;
    case OptimizerId::newton_dbl_approx:
    case OptimizerId::newton_online: return 1.0 / (2.0 * R2);
    case OptimizerId::sag: return sag_default_step(R2);
    case OptimizerId::adagrad: return adagrad_step;
  }
  return 0.0;
}

inline std::vector<double> step_sizes(const StepRule& rule, double theoretical, double R2) {
  switch (rule.kind) {
    case StepRule::Kind::theoretical: return {theoretical};
    case StepRule::Kind::absolute: return {rule.value};
    case StepRule::Kind::relative: return {rule.value / R2};
    case StepRule::Kind::grid: {
      std::vector<double> out;
      for (int k = -rule.grid_radius; k <= rule.grid_radius; ++k) out.push_back(theoretical * std::pow(4.0, k));
      return out;
    }
  }
  return {theoretical};
}

// ---------------------------------------------------------------------------
// Running

namespace detail {

/// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first failure.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

using EstimateSink = std::function<void(std::size_t, const DenseVector&)>;

template <ObservationStream S>
void run_optimizer(OptimizerId id, S& stream, const Dataset* finite, PassSampler* sampler, double gamma, std::size_t n,
                   LossModel loss, double R2, const DenseVector& theta0, const Checkpoints& cps,
                   const EstimateSink& sink) {
  auto averaged = [&](std::size_t k, const IterateState& s) { sink(k, s.theta_bar()); };
  auto last = [&](std::size_t k, const IterateState& s) { sink(k, s.theta()); };
  auto vec = [&](std::size_t k, const DenseVector& t) { sink(k, t); };
  switch (id) {
    case OptimizerId::lms_avg_const:
      run_averaged_lms(stream, gamma, n, IterateState(theta0), cps, averaged);
      return;
    case OptimizerId::avg_const_sgd:
      run_sgd(stream, StepSchedule::constant(gamma), n, loss, IterateState(theta0), cps, averaged);
      return;
    case OptimizerId::sgd_nonavg_const:
      run_sgd(stream, StepSchedule::constant(gamma), n, loss, IterateState(theta0), cps, last);
      return;
    case OptimizerId::avg_decay_sgd:
      run_sgd(stream, StepSchedule::decaying(gamma * R2, R2), n, loss, IterateState(theta0), cps, averaged);
      return;
    case OptimizerId::sgd_nonavg_decay:
      run_sgd(stream, StepSchedule::decaying(gamma * R2, R2), n, loss, IterateState(theta0), cps, last);
      return;
    case OptimizerId::newton_2step:
    case OptimizerId::newton_2step_dbl:
    case OptimizerId::newton_dbl_approx:
    case OptimizerId::newton_online:
      run_online_newton(stream, gamma, n, *newton_policy(id), loss, IterateState(theta0), cps, averaged);
      return;
    case OptimizerId::adagrad:
      run_adagrad(stream, gamma, n, loss, theta0, cps, vec);
      return;
    case OptimizerId::sag: {
      require(finite != nullptr && sampler != nullptr, "sag needs a finite training set");
      run_sag_sampled(*finite, gamma, std::move(*sampler), loss, theta0, cps, vec);
      return;
    }
  }
}

inline DenseVector random_unit(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal;
  DenseVector u(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = normal(rng);
  return u.normalized();
}

}  // namespace detail

/// Everything a replication needs that does not depend on the replication.
class ExperimentContext {
 public:
  explicit ExperimentContext(const ExperimentConfig& cfg) : cfg_(cfg), loss_(cfg.effective_loss()) {
    cfg.validate();
    if (cfg.dataset.kind == DatasetSource::Kind::synthetic) {
      SyntheticSpec spec;
      spec.d = cfg.dataset.d;
      spec.seed = cfg.seed;
      spec.model = cfg.dataset.model;
      spec.theta_norm = cfg.dataset.theta_norm;
      problem_ = std::make_unique<SyntheticProblem>(spec);
      if (loss_.is_logistic() != (cfg.dataset.model == SyntheticModel::logistic)) {
        throw ContractViolation("ExperimentConfig: loss does not match the synthetic model");
      }
      population_ = std::make_unique<PopulationRisk>(*problem_, cfg.eval_size, cfg.seed);
      R2_ = problem_->truth().R2();
      theta0_ = DenseVector::Zero(static_cast<Eigen::Index>(cfg.dataset.d));
      if (cfg.init_offset > 0.0) {
        Rng rng = make_rng(cfg.seed, 0, StreamRole::init);
        theta0_ = problem_->truth().theta_star + cfg.init_offset * detail::random_unit(cfg.dataset.d, rng);
      }
      budget_ = cfg.n.value_or(cfg.train_size && cfg.passes ? *cfg.passes * *cfg.train_size : 100000);
    } else {
      const Dataset full = parse_libsvm(cfg.dataset.path);
      protocol_ = std::make_unique<Protocol>(prepare_protocol(full, cfg.seed, cfg.passes.value_or(100)));
      R2_ = estimate_radius(protocol_->train);
      require(R2_ > 0.0, "dataset has zero average radius");
      theta0_ = DenseVector::Zero(static_cast<Eigen::Index>(full.dim));
      ref_train_ = batch_reference(protocol_->train, loss_);
      ref_test_ = batch_reference(protocol_->test, loss_);
      budget_ = cfg.n.value_or(protocol_->budget());
    }
    checkpoints_ = Checkpoints::logarithmic(budget_, cfg.checkpoints_per_decade);

    double adagrad = 0.0;
    if (cfg.optimizer == OptimizerId::adagrad) {
      if (protocol_) {
        adagrad = adagrad_default_step(protocol_->train);
      } else {
        // Pilot sample for the sup-norm of a synthetic design.
        Rng rng = make_rng(cfg.seed, 0, StreamRole::init);
        double m = 0.0;
        for (int i = 0; i < 10000; ++i) m = std::max(m, problem_->sample_x(rng).cwiseAbs().maxCoeff());
        adagrad = 1.0 / m;
      }
    }
    theoretical_ = theoretical_step(cfg.optimizer, loss_, R2_, cfg.decay_c, adagrad);
  }

  const ExperimentConfig& config() const { return cfg_; }
  LossModel loss() const { return loss_; }
  double R2() const { return R2_; }
  double theoretical() const { return theoretical_; }
  std::size_t budget() const { return budget_; }
  const Checkpoints& checkpoints() const { return checkpoints_; }
  const DenseVector& theta0() const { return theta0_; }
  const SyntheticProblem* problem() const { return problem_.get(); }
  const Protocol* protocol() const { return protocol_.get(); }

  std::vector<double> gammas() const { return step_sizes(cfg_.step, theoretical_, R2_); }

  /// Runs one replication at one step size.
  void run_replication(double gamma, std::size_t rep, std::vector<double>& train, std::vector<double>& test) const {
    train.clear();
    test.clear();
    const std::size_t n = budget_;
    detail::EstimateSink sink;

    if (problem_) {
      Rng rng = make_rng(cfg_.seed, rep, StreamRole::samples);
      if (cfg_.train_size) {
        Dataset ds;
        ds.dim = problem_->spec().d;
        for (std::size_t i = 0; i < *cfg_.train_size; ++i) ds.observations.push_back(problem_->sample(rng));
        const double f_star = batch_reference(ds, loss_).f_star;
        sink = [&](std::size_t, const DenseVector& t) {
          train.push_back(empirical_risk(ds, loss_, t) - f_star);
          test.push_back(population_->excess(t));
        };
        PassSampler sampler(ds.size(), n, make_rng(cfg_.seed, rep, StreamRole::sampler));
        PassSampler sag_sampler = sampler;
        SampledStream stream(ds, std::move(sampler));
        detail::run_optimizer(cfg_.optimizer, stream, &ds, &sag_sampler, gamma, n, loss_, R2_, theta0_, checkpoints_,
                              sink);
      } else {
        sink = [&](std::size_t, const DenseVector& t) {
          const double e = population_->excess(t);
          train.push_back(e);
          test.push_back(e);
        };
        SyntheticStream stream(*problem_, std::move(rng));
        detail::run_optimizer(cfg_.optimizer, stream, nullptr, nullptr, gamma, n, loss_, R2_, theta0_, checkpoints_,
                              sink);
      }
    } else {
      sink = [&](std::size_t, const DenseVector& t) {
        train.push_back(empirical_risk(protocol_->train, loss_, t) - ref_train_.f_star);
        test.push_back(empirical_risk(protocol_->test, loss_, t) - ref_test_.f_star);
      };
      PassSampler sampler(protocol_->train.size(), n, make_rng(cfg_.seed, rep, StreamRole::sampler));
      PassSampler sag_sampler = sampler;
      SampledStream stream(protocol_->train, std::move(sampler));
      detail::run_optimizer(cfg_.optimizer, stream, &protocol_->train, &sag_sampler, gamma, n, loss_, R2_, theta0_,
                            checkpoints_, sink);
    }
    require(train.size() == checkpoints_.size(), "internal: checkpoint count mismatch");
  }

 private:
  ExperimentConfig cfg_;
  LossModel loss_;
  std::unique_ptr<SyntheticProblem> problem_;
  std::unique_ptr<PopulationRisk> population_;
  std::unique_ptr<Protocol> protocol_;
  BatchReference ref_train_;
  BatchReference ref_test_;
  double R2_ = 0.0;
  double theoretical_ = 0.0;
  std::size_t budget_ = 0;
  Checkpoints checkpoints_;
  DenseVector theta0_;
};

namespace detail {

inline void normalize_curves(std::vector<RiskCurve>& curves) {
  for (auto& c : curves) {
    // theta_0 is shared by every replication, so column 0 is the same everywhere.
    const double a = c.train.front().front();
    const double b = c.test.front().front();
    c.train_normalization = a > 0.0 ? a : 1.0;
    c.test_normalization = b > 0.0 ? b : 1.0;
    for (auto& row : c.train)
      for (double& v : row) v /= c.train_normalization;
    for (auto& row : c.test)
      for (double& v : row) v /= c.test_normalization;
    c.normalized = true;
  }
}

}  // namespace detail

/// Curves for every experiment, one per step size of each config's rule, in
/// config order. All (experiment, step size, replication) runs share one
/// worker pool; output does not depend on `jobs`.
inline std::vector<RiskCurve> run_experiments(const std::vector<ExperimentConfig>& cfgs, std::size_t jobs = 1) {
  std::vector<std::unique_ptr<ExperimentContext>> contexts;
  for (const auto& c : cfgs) {
    try {
      contexts.push_back(std::make_unique<ExperimentContext>(c));
    } catch (const ContractViolation& e) {
      throw ContractViolation(std::string(optimizer_name(c.optimizer)) + ": " + e.what());
    }
  }
  struct Task {
    const ExperimentContext* ctx;
    std::size_t curve;
    std::size_t rep;
  };
  std::vector<RiskCurve> curves;
  std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end) per config
  std::vector<Task> tasks;
  for (const auto& ctx : contexts) {
    const std::size_t begin = curves.size();
    const std::size_t reps = ctx->config().replications;
    for (double g : ctx->gammas()) {
      RiskCurve c;
      c.optimizer = std::string(optimizer_name(ctx->config().optimizer));
      c.gamma = g;
      c.n = ctx->checkpoints().steps();
      c.train.resize(reps);
      c.test.resize(reps);
      for (std::size_t r = 0; r < reps; ++r) tasks.push_back({ctx.get(), curves.size(), r});
      curves.push_back(std::move(c));
    }
    groups.emplace_back(begin, curves.size());
  }
  detail::parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    RiskCurve& c = curves[t.curve];
    t.ctx->run_replication(c.gamma, t.rep, c.train[t.rep], c.test[t.rep]);
  });
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    if (!contexts[k]->config().effective_normalize()) continue;
    std::vector<RiskCurve> part(std::make_move_iterator(curves.begin() + groups[k].first),
                                std::make_move_iterator(curves.begin() + groups[k].second));
    detail::normalize_curves(part);
    std::move(part.begin(), part.end(), curves.begin() + groups[k].first);
  }
  return curves;
}

inline std::vector<RiskCurve> run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  return run_experiments({cfg}, jobs);
}

/// Among same-optimizer curves, the index with the lowest mean test excess at
/// the first checkpoint at or after `one_pass` steps; ties go to the smaller
/// gamma.
inline std::size_t best_step_after_one_pass(const std::vector<RiskCurve>& curves, std::size_t one_pass) {
  require(!curves.empty(), "best_step_after_one_pass: no curves");
  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const auto it = std::lower_bound(c.n.begin(), c.n.end(), one_pass);
    const std::size_t k = it == c.n.end() ? c.n.size() - 1 : static_cast<std::size_t>(it - c.n.begin());
    const double v = mean_curve(c, Series::test)[k];
    if (v < best_val || (v == best_val && c.gamma < curves[best].gamma)) {
      best_val = v;
      best = i;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Analysis

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
  std::size_t excluded = 0;  ///< nonpositive or non-finite values in the window
};

/// Least-squares slope of log10(value) against log10(n) over checkpoints whose
/// log10(n) lies in [log_lo, log_hi]; n = 0 is never used.
inline SlopeFit fit_loglog_slope_range(const std::vector<std::size_t>& n, const std::vector<double>& values,
                                       double log_lo, double log_hi) {
  require(n.size() == values.size(), "fit_loglog_slope: length mismatch");
  std::vector<double> xs, ys;
  SlopeFit fit;
  for (std::size_t k = 0; k < n.size(); ++k) {
    if (n[k] == 0) continue;
    const double lx = std::log10(static_cast<double>(n[k]));
    if (lx < log_lo - 1e-12 || lx > log_hi + 1e-12) continue;
    if (!(values[k] > 0.0) || !std::isfinite(values[k])) {
      ++fit.excluded;
      continue;
    }
    xs.push_back(lx);
    ys.push_back(std::log10(values[k]));
  }
  fit.points = xs.size();
  require(xs.size() >= 5, "fit_loglog_slope: fewer than 5 usable checkpoints in window");
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k];
    sy += ys[k];
    sxx += xs[k] * xs[k];
    sxy += xs[k] * ys[k];
  }
  const double denom = m * sxx - sx * sx;
  require(denom > 0.0, "fit_loglog_slope: degenerate window");
  fit.slope = (m * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / m;
  return fit;
}

/// Window given as fractions [lo, hi] of the log10(n) span of the curve.
inline SlopeFit fit_loglog_slope(const std::vector<std::size_t>& n, const std::vector<double>& values, double lo,
                                 double hi) {
  require(0.0 <= lo && lo < hi && hi <= 1.0, "fit_loglog_slope: window must satisfy 0 <= lo < hi <= 1");
  std::size_t first = 0, last = 0;
  for (std::size_t v : n) {
    if (v == 0) continue;
    first = first == 0 ? v : std::min(first, v);
    last = std::max(last, v);
  }
  require(last > 0, "fit_loglog_slope: no positive checkpoints");
  const double a = std::log10(static_cast<double>(first));
  const double b = std::log10(static_cast<double>(last));
  return fit_loglog_slope_range(n, values, a + lo * (b - a), a + hi * (b - a));
}

inline SlopeFit fit_loglog_slope(const RiskCurve& curve, double lo, double hi, Series s = Series::train) {
  return fit_loglog_slope(curve.n, mean_curve(curve, s), lo, hi);
}

/// Slope over the last `decades` decades of the curve's checkpoints.
inline SlopeFit fit_last_decades(const RiskCurve& curve, double decades = 1.0, Series s = Series::train) {
  require(!curve.n.empty() && curve.n.back() > 0, "fit_last_decades: empty curve");
  const double hi = std::log10(static_cast<double>(curve.n.back()));
  return fit_loglog_slope_range(curve.n, mean_curve(curve, s), hi - decades, hi);
}

struct BoundCheck {
  std::size_t n = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double bound = 0.0;
  bool violated = false;
};

struct BoundReport {
  std::vector<BoundCheck> checks;
  std::size_t violations = 0;
  bool ok() const { return violations == 0; }
};

/// Compares mean + 2 stderr of the raw (unnormalized) excess risk with
/// bound_fn(samples consumed) at each checkpoint.
inline BoundReport verify_bound(const RiskCurve& curve, const std::function<double(std::size_t)>& bound_fn,
                                Series s = Series::train) {
  BoundReport rep;
  const double scale = s == Series::train ? curve.train_normalization : curve.test_normalization;
  const auto mean = mean_curve(curve, s);
  const auto se = stderr_curve(curve, s);
  for (std::size_t k = 0; k < curve.n.size(); ++k) {
    BoundCheck c;
    c.n = curve.n[k];
    c.mean = mean[k] * scale;
    c.stderr_ = se[k] * scale;
    c.bound = bound_fn(curve.n[k]);
    c.violated = !(c.mean + 2.0 * c.stderr_ <= c.bound);
    rep.violations += c.violated ? 1 : 0;
    rep.checks.push_back(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Export

enum class ExportFormat { csv, plot_data };

inline ExportFormat parse_format(std::string_view s) {
  if (s == "csv") return ExportFormat::csv;
  if (s == "plot-data") return ExportFormat::plot_data;
  throw ContractViolation("unknown format '" + std::string(s) + "'");
}

inline constexpr std::string_view kCsvHeader = "optimizer,gamma,replication,n,train_excess,test_excess";

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_csv(const std::vector<RiskCurve>& curves, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& c : curves) {
    for (std::size_t r = 0; r < c.replications(); ++r) {
      for (std::size_t k = 0; k < c.n.size(); ++k) {
        out << c.optimizer << ',' << detail::fmt17(c.gamma) << ',' << r << ',' << c.n[k] << ','
            << detail::fmt17(c.train[r][k]) << ',' << detail::fmt17(c.test[r][k]) << '\n';
      }
    }
  }
}

/// gnuplot-style blocks, one per (optimizer, gamma), separated by two blank
/// lines: n, mean and stderr of train and test excess.
inline void write_plot_data(const std::vector<RiskCurve>& curves, std::ostream& out) {
  bool first = true;
  for (const auto& c : curves) {
    if (!first) out << "\n\n";
    first = false;
    out << "# optimizer=" << c.optimizer << " gamma=" << detail::fmt17(c.gamma) << " replications="
        << c.replications() << '\n';
    out << "# n mean_train stderr_train mean_test stderr_test\n";
    const auto mt = mean_curve(c, Series::train), st = stderr_curve(c, Series::train);
    const auto me = mean_curve(c, Series::test), se = stderr_curve(c, Series::test);
    for (std::size_t k = 0; k < c.n.size(); ++k) {
      out << c.n[k] << ' ' << detail::fmt17(mt[k]) << ' ' << detail::fmt17(st[k]) << ' ' << detail::fmt17(me[k]) << ' '
          << detail::fmt17(se[k]) << '\n';
    }
  }
}

inline void export_results(const std::vector<RiskCurve>& curves, std::ostream& out, ExportFormat fmt) {
  if (fmt == ExportFormat::csv) {
    write_csv(curves, out);
  } else {
    write_plot_data(curves, out);
  }
}

inline void export_results(const std::vector<RiskCurve>& curves, const std::string& path, ExportFormat fmt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  export_results(curves, out, fmt);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// Parses CSV written by write_csv back into curves, grouped by (optimizer,
/// gamma) in order of first appearance. Curves come back unnormalized.
inline std::vector<RiskCurve> read_csv(std::istream& in, const std::string& source = "<csv>") {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError(source + ": missing or unexpected CSV header");
  std::vector<RiskCurve> curves;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 6) throw IoError(source + ":" + std::to_string(line_no) + ": expected 6 fields");
    const auto key = std::pair{f[0], f[1]};
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, curves.size()).first;
      RiskCurve c;
      c.optimizer = f[0];
      c.gamma = std::strtod(f[1].c_str(), nullptr);
      curves.push_back(std::move(c));
    }
    RiskCurve& c = curves[it->second];
    const std::size_t rep = std::stoul(f[2]);
    const std::size_t n = std::stoul(f[3]);
    if (rep >= c.train.size()) {
      c.train.resize(rep + 1);
      c.test.resize(rep + 1);
    }
    if (rep == 0) c.n.push_back(n);
    c.train[rep].push_back(std::strtod(f[4].c_str(), nullptr));
    c.test[rep].push_back(std::strtod(f[5].c_str(), nullptr));
  }
  for (const auto& c : curves) {
    for (const auto& row : c.train) {
      if (row.size() != c.n.size()) throw IoError(source + ": ragged replications for " + c.optimizer);
    }
  }
  return curves;
}

inline std::vector<RiskCurve> read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_csv(in, path);
}

// ---------------------------------------------------------------------------
// Config files: "key = value" lines, '#' comments. Keys before the first
// "[experiment]" header are defaults inherited by every experiment.

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(const std::string& key, const std::string& v) {
  // Accepts plain numbers and simple ratios such as 1/16.
  const auto slash = v.find('/');
  auto num = [&](const std::string& s) {
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ContractViolation("config: bad number for '" + key + "': '" + v + "'");
    return out;
  };
  if (slash == std::string::npos) return num(trim(v));
  const double den = num(trim(v.substr(slash + 1)));
  require(den != 0.0, "config: zero denominator for '" + key + "'");
  return num(trim(v.substr(0, slash))) / den;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  const double x = parse_number(key, v);
  require(x >= 0.0 && std::floor(x) == x && x < 1e18, "config: '" + key + "' must be a nonnegative integer");
  return static_cast<std::size_t>(x);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ContractViolation("config: '" + key + "' must be true or false");
}

}  // namespace detail

inline void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_count;
  using detail::parse_number;
  if (key == "dataset") {
    if (v == "synthetic-lsq") {
      c.dataset.kind = DatasetSource::Kind::synthetic;
      c.dataset.model = SyntheticModel::lsq;
    } else if (v == "synthetic-logistic") {
      c.dataset.kind = DatasetSource::Kind::synthetic;
      c.dataset.model = SyntheticModel::logistic;
    } else {
      c.dataset.kind = DatasetSource::Kind::file;
      c.dataset.path = v;
    }
  } else if (key == "d") {
    c.dataset.d = parse_count(key, v);
  } else if (key == "theta_norm") {
    c.dataset.theta_norm = parse_number(key, v);
  } else if (key == "loss") {
    c.loss = parse_loss(v);
  } else if (key == "optimizer") {
    c.optimizer = parse_optimizer(v);
  } else if (key == "step") {
    if (v == "theoretical") {
      c.step.kind = StepRule::Kind::theoretical;
    } else if (v == "grid") {
      c.step.kind = StepRule::Kind::grid;
    } else {
      c.step.kind = StepRule::Kind::absolute;
      c.step.value = parse_number(key, v);
    }
  } else if (key == "gamma") {
    c.step.kind = StepRule::Kind::absolute;
    c.step.value = parse_number(key, v);
  } else if (key == "gamma_r2") {
    c.step.kind = StepRule::Kind::relative;
    c.step.value = parse_number(key, v);
  } else if (key == "grid_radius") {
    c.step.grid_radius = static_cast<int>(parse_count(key, v));
  } else if (key == "n") {
    c.n = parse_count(key, v);
  } else if (key == "passes") {
    c.passes = parse_count(key, v);
  } else if (key == "train_size") {
    c.train_size = parse_count(key, v);
  } else if (key == "replications") {
    c.replications = parse_count(key, v);
  } else if (key == "seed") {
    c.seed = parse_count(key, v);
  } else if (key == "checkpoints_per_decade") {
    c.checkpoints_per_decade = parse_count(key, v);
  } else if (key == "eval_size") {
    c.eval_size = parse_count(key, v);
  } else if (key == "normalize") {
    c.normalize = detail::parse_bool(key, v);
  } else if (key == "decay_c") {
    c.decay_c = parse_number(key, v);
  } else if (key == "init_offset") {
    c.init_offset = parse_number(key, v);
  } else {
    throw ContractViolation("config: unknown key '" + key + "'");
  }
}

inline std::vector<ExperimentConfig> parse_config(std::istream& in, const std::string& source = "<config>") {
  std::vector<std::pair<std::string, std::string>> defaults;
  std::vector<std::vector<std::pair<std::string, std::string>>> blocks;
  bool in_block = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t == "[experiment]") {
      blocks.emplace_back();
      in_block = true;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ContractViolation(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto kv = std::pair{detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1))};
    (in_block ? blocks.back() : defaults).push_back(std::move(kv));
  }
  if (blocks.empty()) blocks.emplace_back();
  std::vector<ExperimentConfig> out;
  for (const auto& b : blocks) {
    ExperimentConfig c;
    try {
      for (const auto& [k, v] : defaults) apply_config_key(c, k, v);
      for (const auto& [k, v] : b) apply_config_key(c, k, v);
    } catch (const ContractViolation& e) {
      throw ContractViolation(source + ": " + e.what());
    }
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<ExperimentConfig> parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline std::vector<ExperimentConfig> load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config(in, path);
}

/// Experiment lists reproducing the synthetic figures: least squares with
/// LMS variants, logistic SGD with and without averaging, and the Newton
/// variants.
inline std::vector<ExperimentConfig> preset(std::string_view name) {
  if (name == "fig1-left") {
    return parse_config_text(R"(
dataset = synthetic-lsq
d = 20
n = 1000000
replications = 10
[experiment]
optimizer = lms-avg-const
gamma_r2 = 1
[experiment]
optimizer = lms-avg-const
gamma_r2 = 1/4
[experiment]
optimizer = lms-avg-const
gamma_r2 = 1/16
[experiment]
optimizer = sgd-nonavg-const
gamma_r2 = 1
[experiment]
optimizer = sgd-nonavg-const
gamma_r2 = 1/4
[experiment]
optimizer = sgd-nonavg-const
gamma_r2 = 1/16
[experiment]
optimizer = avg-decay-sgd
gamma_r2 = 1/2
[experiment]
optimizer = sgd-nonavg-decay
gamma_r2 = 1/2
)");
  }
  if (name == "fig1-middle") {
    return parse_config_text(R"(
dataset = synthetic-logistic
d = 20
n = 1000000
replications = 10
[experiment]
optimizer = avg-const-sgd
gamma_r2 = 1
[experiment]
optimizer = avg-const-sgd
gamma_r2 = 1/4
[experiment]
optimizer = avg-const-sgd
gamma_r2 = 1/16
[experiment]
optimizer = sgd-nonavg-const
gamma_r2 = 1
[experiment]
optimizer = sgd-nonavg-const
gamma_r2 = 1/4
[experiment]
optimizer = sgd-nonavg-const
gamma_r2 = 1/16
)");
  }
  if (name == "fig1-right") {
    return parse_config_text(R"(
dataset = synthetic-logistic
d = 20
n = 1000000
replications = 10
[experiment]
optimizer = newton:2step
[experiment]
optimizer = newton:2step-dbl
[experiment]
optimizer = newton:dbl-approx
[experiment]
optimizer = newton:online
[experiment]
optimizer = avg-const-sgd
)");
  }
  throw ContractViolation("unknown preset '" + std::string(name) + "'");
}

}  // namespace avgsgd

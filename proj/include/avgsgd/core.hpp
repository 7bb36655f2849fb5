#pragma once

// Vectors, observations and the running-average iterate shared by every
// optimizer in the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace avgsgd {

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on file-system and parse failures of external inputs.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using DenseVector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

namespace detail {
inline void check_dims(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ContractViolation(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                            " vs " + std::to_string(b) + ")");
  }
}
}  // namespace detail

/// Inner-product and axpy flop counters, per thread. Used to audit the
/// relative cost of the optimizer steps; reset before measuring.
struct KernelStats {
  std::uint64_t dot_flops = 0;
  std::uint64_t axpy_flops = 0;

  static KernelStats& local() {
    thread_local KernelStats stats;
    return stats;
  }
  void reset() { *this = KernelStats{}; }
};

/// Immutable sparse vector: strictly increasing indices below `dim`, nonzero
/// values.
class SparseVector {
 public:
  SparseVector() = default;

  SparseVector(std::size_t dim, std::vector<std::uint32_t> indices, std::vector<double> values)
      : dim_(dim), indices_(std::move(indices)), values_(std::move(values)) {
    require(indices_.size() == values_.size(), "SparseVector: index/value length mismatch");
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      require(indices_[k] < dim_, "SparseVector: index out of range");
      require(k == 0 || indices_[k - 1] < indices_[k], "SparseVector: indices not strictly increasing");
      require(values_[k] != 0.0, "SparseVector: stored value is zero");
    }
  }

  /// Drops exact zeros of a dense vector.
  static SparseVector from_dense(const DenseVector& v) {
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (v[j] != 0.0) {
        idx.push_back(static_cast<std::uint32_t>(j));
        val.push_back(v[j]);
      }
    }
    return SparseVector(static_cast<std::size_t>(v.size()), std::move(idx), std::move(val));
  }

  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return indices_.size(); }
  const std::vector<std::uint32_t>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

  DenseVector to_dense() const {
    DenseVector out = DenseVector::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < indices_.size(); ++k) out[indices_[k]] = values_[k];
    return out;
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

/// A covariate vector, stored densely or sparsely.
using Features = std::variant<DenseVector, SparseVector>;

inline std::size_t dimension(const DenseVector& v) { return static_cast<std::size_t>(v.size()); }
inline std::size_t dimension(const SparseVector& v) { return v.dim(); }
inline std::size_t dimension(const Features& x) {
  return std::visit([](const auto& v) { return dimension(v); }, x);
}

inline std::size_t nnz(const Features& x) {
  if (const auto* s = std::get_if<SparseVector>(&x)) return s->nnz();
  return dimension(x);
}

inline double dot(const DenseVector& a, const DenseVector& b) {
  detail::check_dims(dimension(a), dimension(b), "dot");
  KernelStats::local().dot_flops += static_cast<std::uint64_t>(a.size());
  return a.dot(b);
}

inline double dot(const SparseVector& a, const DenseVector& b) {
  detail::check_dims(a.dim(), dimension(b), "dot");
  KernelStats::local().dot_flops += a.nnz();
  double acc = 0.0;
  const auto& idx = a.indices();
  const auto& val = a.values();
  for (std::size_t k = 0; k < idx.size(); ++k) acc += val[k] * b[idx[k]];
  return acc;
}

inline double dot(const DenseVector& a, const SparseVector& b) { return dot(b, a); }

inline double dot(const SparseVector& a, const SparseVector& b) {
  detail::check_dims(a.dim(), b.dim(), "dot");
  const auto& ia = a.indices();
  const auto& ib = b.indices();
  double acc = 0.0;
  std::size_t p = 0, q = 0;
  while (p < ia.size() && q < ib.size()) {
    if (ia[p] == ib[q]) {
      acc += a.values()[p++] * b.values()[q++];
    } else if (ia[p] < ib[q]) {
      ++p;
    } else {
      ++q;
    }
  }
  KernelStats::local().dot_flops += std::min(a.nnz(), b.nnz());
  return acc;
}

inline double dot(const Features& a, const DenseVector& b) {
  return std::visit([&](const auto& v) { return dot(v, b); }, a);
}

inline double dot(const Features& a, const Features& b) {
  return std::visit([](const auto& u, const auto& v) { return dot(u, v); }, a, b);
}

/// y += alpha * x
inline void axpy(double alpha, const Features& x, DenseVector& y) {
  detail::check_dims(dimension(x), dimension(y), "axpy");
  if (const auto* s = std::get_if<SparseVector>(&x)) {
    const auto& idx = s->indices();
    const auto& val = s->values();
    for (std::size_t k = 0; k < idx.size(); ++k) y[idx[k]] += alpha * val[k];
    KernelStats::local().axpy_flops += s->nnz();
  } else {
    y.noalias() += alpha * std::get<DenseVector>(x);
    KernelStats::local().axpy_flops += dimension(y);
  }
}

inline double squared_norm(const Features& x) {
  if (const auto* s = std::get_if<SparseVector>(&x)) {
    double acc = 0.0;
    for (double v : s->values()) acc += v * v;
    return acc;
  }
  return std::get<DenseVector>(x).squaredNorm();
}

inline double max_abs(const Features& x) {
  if (const auto* s = std::get_if<SparseVector>(&x)) {
    double m = 0.0;
    for (double v : s->values()) m = std::max(m, std::abs(v));
    return m;
  }
  const auto& d = std::get<DenseVector>(x);
  return d.size() == 0 ? 0.0 : d.cwiseAbs().maxCoeff();
}

inline DenseVector to_dense(const Features& x) {
  if (const auto* s = std::get_if<SparseVector>(&x)) return s->to_dense();
  return std::get<DenseVector>(x);
}

/// One data point. Least-squares recursions use the target `z`, which is
/// `y * x` unless an explicit vector is supplied; classification losses use
/// the label `y` in {-1, +1}.
struct Observation {
  Features x;
  double y = 0.0;
  std::optional<DenseVector> z;

  static Observation regression(Features x, double y) { return Observation{std::move(x), y, std::nullopt}; }

  static Observation with_target(Features x, DenseVector z) {
    detail::check_dims(dimension(x), dimension(z), "Observation::with_target");
    return Observation{std::move(x), 0.0, std::move(z)};
  }

  static Observation classification(Features x, double label) {
    require(label == 1.0 || label == -1.0, "Observation: label must be -1 or +1");
    return Observation{std::move(x), label, std::nullopt};
  }

  std::size_t dim() const { return dimension(x); }
  bool has_explicit_target() const { return z.has_value(); }
};

/// Current iterate, the running average of theta_0..theta_n, and n.
class IterateState {
 public:
  IterateState() = default;
  explicit IterateState(DenseVector theta0) : theta_(std::move(theta0)), theta_bar_(theta_), n_(0) {}

  static IterateState zeros(std::size_t d) { return IterateState(DenseVector::Zero(static_cast<Eigen::Index>(d))); }

  const DenseVector& theta() const { return theta_; }
  const DenseVector& theta_bar() const { return theta_bar_; }
  std::size_t n() const { return n_; }
  std::size_t dim() const { return dimension(theta_); }

  /// Mutable access for in-place steps; every mutation must be followed by
  /// commit() to keep the average consistent.
  DenseVector& mutable_theta() { return theta_; }

  /// Folds the current theta into the average as theta_{n+1}.
  void commit() {
    ++n_;
    theta_bar_ += (theta_ - theta_bar_) / static_cast<double>(n_ + 1);
  }

 private:
  DenseVector theta_;
  DenseVector theta_bar_;
  std::size_t n_ = 0;
};

/// theta <- new_theta; n <- n + 1; theta_bar <- theta_bar + (new_theta - theta_bar)/(n + 1).
inline void update_average(IterateState& state, const DenseVector& new_theta) {
  detail::check_dims(state.dim(), dimension(new_theta), "update_average");
  state.mutable_theta() = new_theta;
  state.commit();
}

/// Functional form of update_average.
inline IterateState updated_average(IterateState state, const DenseVector& new_theta) {
  update_average(state, new_theta);
  return state;
}

/// A source of observations. next() returns nullptr once exhausted; the
/// pointer stays valid until the following call.
template <class S>
concept ObservationStream = requires(S s) {
  { s.next() } -> std::convertible_to<const Observation*>;
};

/// Reads the next observation or reports how far the run got.
template <ObservationStream S>
const Observation& next_or_throw(S& stream, std::size_t step, const char* who) {
  const Observation* obs = stream.next();
  if (obs == nullptr) {
    throw ContractViolation(std::string(who) + ": observation stream exhausted at step " + std::to_string(step));
  }
  return *obs;
}

/// Replays a fixed vector of observations in order.
class VectorStream {
 public:
  explicit VectorStream(const std::vector<Observation>& obs) : obs_(&obs) {}
  const Observation* next() { return pos_ < obs_->size() ? &(*obs_)[pos_++] : nullptr; }

 private:
  const std::vector<Observation>* obs_;
  std::size_t pos_ = 0;
};

/// Observer that ignores all checkpoints.
struct NoObserver {
  template <class... A>
  void operator()(A&&...) const {}
};

/// Sorted step indices at which a run reports its state.
class Checkpoints {
 public:
  Checkpoints() = default;
  explicit Checkpoints(std::vector<std::size_t> steps) : steps_(std::move(steps)) {
    for (std::size_t k = 1; k < steps_.size(); ++k) {
      require(steps_[k - 1] < steps_[k], "Checkpoints: steps must be strictly increasing");
    }
  }

  /// 0, n, and round(10^(k/per_decade)) for every k with value in [1, n].
  static Checkpoints logarithmic(std::size_t n, std::size_t per_decade) {
    require(per_decade >= 1, "Checkpoints: per_decade must be positive");
    std::vector<std::size_t> s{0};
    if (n >= 1) {
      for (std::size_t k = 0;; ++k) {
        const double v = std::round(std::pow(10.0, static_cast<double>(k) / static_cast<double>(per_decade)));
        if (v > static_cast<double>(n)) break;
        const auto step = static_cast<std::size_t>(v);
        if (step > s.back()) s.push_back(step);
      }
      if (s.back() != n) s.push_back(n);
    }
    return Checkpoints(std::move(s));
  }

  static Checkpoints every_step(std::size_t n) {
    std::vector<std::size_t> s(n + 1);
    for (std::size_t k = 0; k <= n; ++k) s[k] = k;
    return Checkpoints(std::move(s));
  }

  const std::vector<std::size_t>& steps() const { return steps_; }
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }

 private:
  std::vector<std::size_t> steps_;
};

/// Walks a Checkpoints list in step order, firing the observer on matches.
template <class Observer>
class CheckpointCursor {
 public:
  CheckpointCursor(const Checkpoints& cps, Observer& obs) : steps_(&cps.steps()), obs_(&obs) {}

  template <class... A>
  void at(std::size_t step, const A&... state) {
    while (pos_ < steps_->size() && (*steps_)[pos_] < step) ++pos_;
    if (pos_ < steps_->size() && (*steps_)[pos_] == step) {
      (*obs_)(step, state...);
      ++pos_;
    }
  }

 private:
  const std::vector<std::size_t>* steps_;
  Observer* obs_;
  std::size_t pos_ = 0;
};

/// Observer storing copies of the averaged (or last) iterate.
class IterateRecorder {
 public:
  explicit IterateRecorder(bool averaged = true) : averaged_(averaged) {}

  void operator()(std::size_t step, const IterateState& s) {
    steps.push_back(step);
    iterates.push_back(averaged_ ? s.theta_bar() : s.theta());
  }
  void operator()(std::size_t step, const DenseVector& theta) {
    steps.push_back(step);
    iterates.push_back(theta);
  }

  std::vector<std::size_t> steps;
  std::vector<DenseVector> iterates;

 private:
  bool averaged_;
};

}  // namespace avgsgd

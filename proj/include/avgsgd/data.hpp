#pragma once

// Synthetic Gaussian-design problems, libsvm text I/O, and the benchmark
// protocol (outlier removal, half split, bootstrap pass sampling).

#include "avgsgd/core.hpp"
#include "avgsgd/losses.hpp"
#include "avgsgd/rng.hpp"

#include <Eigen/QR>
#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace avgsgd {

enum class SyntheticModel { lsq, logistic };

struct SyntheticSpec {
  std::size_t d = 20;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  SyntheticModel model = SyntheticModel::lsq;
  /// ||theta*||; defaults to 1 for lsq and 3 for logistic.
  std::optional<double> theta_norm;
  /// Overrides the random optimum entirely.
  std::optional<DenseVector> theta_star;

  double effective_theta_norm() const {
    if (theta_norm) return *theta_norm;
    return model == SyntheticModel::lsq ? 1.0 : 3.0;
  }
};

/// Known population quantities of a synthetic problem.
struct GroundTruth {
  SyntheticModel model = SyntheticModel::lsq;
  DenseVector theta_star;
  DenseMatrix H;          ///< E[x x^T] = U diag(1/k) U^T
  DenseMatrix factor;     ///< x = factor * g with g ~ N(0, I)
  DenseVector eigenvalues;
  double sigma = 0.0;     ///< noise standard deviation (lsq only)

  double R2() const { return H.trace(); }
};

struct Dataset {
  std::vector<Observation> observations;
  std::size_t dim = 0;
  std::optional<GroundTruth> truth;

  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }

  double sparsity() const {
    if (observations.empty() || dim == 0) return 0.0;
    double total = 0.0;
    for (const auto& o : observations) total += static_cast<double>(nnz(o.x));
    return total / (static_cast<double>(observations.size()) * static_cast<double>(dim));
  }
};

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// diagonal of R made positive.
inline DenseMatrix random_orthogonal(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal;
  DenseMatrix g(d, d);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<DenseMatrix> qr(g);
  DenseMatrix q = qr.householderQ();
  const DenseMatrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Gaussian design with covariance eigenvalues 1/k and random eigenvectors,
/// linear-Gaussian (unit SNR) or logistic outputs.
class SyntheticProblem {
 public:
  explicit SyntheticProblem(const SyntheticSpec& spec) : spec_(spec) {
    require(spec.d >= 1, "SyntheticSpec: d must be >= 1");
    Rng rng = make_rng(spec.seed, 0, StreamRole::problem);
    const auto d = static_cast<Eigen::Index>(spec.d);
    truth_.model = spec.model;
    truth_.eigenvalues.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) truth_.eigenvalues[k] = 1.0 / static_cast<double>(k + 1);
    const DenseMatrix u = random_orthogonal(spec.d, rng);
    truth_.H = u * truth_.eigenvalues.asDiagonal() * u.transpose();
    truth_.H = (0.5 * (truth_.H + truth_.H.transpose())).eval();
    truth_.factor = u * truth_.eigenvalues.cwiseSqrt().asDiagonal();

    if (spec.theta_star) {
      detail::check_dims(dimension(*spec.theta_star), spec.d, "SyntheticSpec::theta_star");
      truth_.theta_star = *spec.theta_star;
    } else {
      std::normal_distribution<double> normal;
      DenseVector dir(d);
      for (Eigen::Index j = 0; j < d; ++j) dir[j] = normal(rng);
      truth_.theta_star = dir.normalized() * spec.effective_theta_norm();
    }
    if (spec.model == SyntheticModel::lsq) {
      truth_.sigma = std::sqrt(truth_.theta_star.dot(truth_.H * truth_.theta_star));
    }
  }

  const SyntheticSpec& spec() const { return spec_; }
  const GroundTruth& truth() const { return truth_; }
  std::size_t dim() const { return spec_.d; }

  DenseVector sample_x(Rng& rng) const {
    std::normal_distribution<double> normal;
    return sample_x(rng, normal);
  }

  /// Draws a fresh observation into `out`, reusing its storage.
  void sample_into(Rng& rng, Observation& out) const {
    if (!std::holds_alternative<DenseVector>(out.x)) out.x = DenseVector();
    auto& x = std::get<DenseVector>(out.x);
    std::normal_distribution<double> normal;
    x = sample_x(rng, normal);
    const double signal = truth_.theta_star.dot(x);
    if (spec_.model == SyntheticModel::lsq) {
      out.y = signal + truth_.sigma * normal(rng);
    } else {
      const double p = 1.0 - detail::sigmoid_neg(signal);
      out.y = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p ? 1.0 : -1.0;
    }
    out.z.reset();
  }

  Observation sample(Rng& rng) const {
    Observation o;
    sample_into(rng, o);
    return o;
  }

 private:
  DenseVector sample_x(Rng& rng, std::normal_distribution<double>& normal) const {
    DenseVector g(static_cast<Eigen::Index>(spec_.d));
    for (Eigen::Index j = 0; j < g.size(); ++j) g[j] = normal(rng);
    return truth_.factor * g;
  }

  SyntheticSpec spec_;
  GroundTruth truth_;
};

/// Infinite i.i.d. stream from a synthetic problem.
class SyntheticStream {
 public:
  SyntheticStream(const SyntheticProblem& problem, Rng rng) : problem_(&problem), rng_(std::move(rng)) {}

  const Observation* next() {
    problem_->sample_into(rng_, buf_);
    return &buf_;
  }

 private:
  const SyntheticProblem* problem_;
  Rng rng_;
  Observation buf_;
};

namespace detail {
inline Dataset draw_dataset(const SyntheticSpec& spec) {
  require(spec.n >= 1, "SyntheticSpec: n must be >= 1");
  SyntheticProblem problem(spec);
  Rng rng = make_rng(spec.seed, 0, StreamRole::samples);
  Dataset ds;
  ds.dim = spec.d;
  ds.observations.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) ds.observations.push_back(problem.sample(rng));
  ds.truth = problem.truth();
  return ds;
}
}  // namespace detail

inline Dataset generate_lsq(const SyntheticSpec& spec) {
  require(spec.model == SyntheticModel::lsq, "generate_lsq: spec.model must be lsq");
  return detail::draw_dataset(spec);
}

inline Dataset generate_logistic(const SyntheticSpec& spec) {
  require(spec.model == SyntheticModel::logistic, "generate_logistic: spec.model must be logistic");
  return detail::draw_dataset(spec);
}

/// Population excess risk of a synthetic problem. Least squares uses the
/// closed form 1/2 <d, H d>; logistic averages, over a fixed sample of
/// covariates, the conditional expectation over y of the loss difference
/// (a KL divergence, hence nonnegative).
class PopulationRisk {
 public:
  PopulationRisk(const SyntheticProblem& problem, std::size_t eval_size, std::uint64_t seed)
      : truth_(problem.truth()) {
    if (truth_.model == SyntheticModel::logistic) {
      require(eval_size >= 1, "PopulationRisk: evaluation sample must be nonempty");
      Rng rng = make_rng(seed, 0, StreamRole::evaluation);
      xs_.resize(static_cast<Eigen::Index>(eval_size), static_cast<Eigen::Index>(problem.dim()));
      for (Eigen::Index i = 0; i < xs_.rows(); ++i) xs_.row(i) = problem.sample_x(rng).transpose();
      margins_star_ = xs_ * truth_.theta_star;
      p_.resize(margins_star_.size());
      for (Eigen::Index i = 0; i < p_.size(); ++i) p_[i] = 1.0 - detail::sigmoid_neg(margins_star_[i]);
    }
  }

  double excess(const DenseVector& theta) const {
    detail::check_dims(dimension(theta), dimension(truth_.theta_star), "PopulationRisk::excess");
    const DenseVector delta = theta - truth_.theta_star;
    if (truth_.model == SyntheticModel::lsq) return 0.5 * delta.dot(truth_.H * delta);
    const DenseVector m = xs_ * theta;
    const LossModel lg = LossModel::logistic();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double a = margins_star_[i];
      const double b = m[i];
      acc += p_[i] * (loss_value(lg, 1.0, b) - loss_value(lg, 1.0, a)) +
             (1.0 - p_[i]) * (loss_value(lg, -1.0, b) - loss_value(lg, -1.0, a));
    }
    return std::max(0.0, acc / static_cast<double>(m.size()));
  }

 private:
  GroundTruth truth_;
  DenseMatrix xs_;
  DenseVector margins_star_;
  DenseVector p_;
};

// ---------------------------------------------------------------------------
// libsvm text format

struct LibsvmOptions {
  /// Lower bound on the dimension; the result uses max(min_dim, max index).
  std::size_t min_dim = 0;
};

namespace detail {

inline std::string read_file_bytes(const std::string& path) {
  // zlib reads uncompressed files transparently, so .gz and plain text share a path.
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open '" + path + "'");
  std::string out;
  char buf[1 << 16];
  for (;;) {
    const int got = gzread(f, buf, sizeof buf);
    if (got < 0) {
      int errnum = 0;
      const char* msg = gzerror(f, &errnum);
      gzclose(f);
      throw IoError("read error in '" + path + "': " + msg);
    }
    if (got == 0) break;
    out.append(buf, static_cast<std::size_t>(got));
  }
  gzclose(f);
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline bool parse_index(std::string_view tok, unsigned long& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

/// Parses libsvm text: "label idx:val ..." with 1-based, strictly increasing
/// indices. Labels {0,1} and {-1,+1} map to {-1,+1}; any other two-valued
/// label set maps its smaller value to -1. Blank lines and '#' comments are
/// skipped.
inline Dataset parse_libsvm_text(std::string_view text, const std::string& source = "<text>",
                                 const LibsvmOptions& opts = {}) {
  struct Row {
    double label;
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
  };
  std::vector<Row> rows;
  std::size_t max_index = 0;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> IoError {
    return IoError(source + ":" + std::to_string(line_no) + ": " + what);
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) toks.push_back(line.substr(i, j - i));
      i = j;
    }
    if (toks.empty()) continue;

    Row row;
    if (!detail::parse_double(toks[0], row.label)) throw fail("unparseable label '" + std::string(toks[0]) + "'");
    unsigned long prev = 0;
    for (std::size_t t = 1; t < toks.size(); ++t) {
      const auto colon = toks[t].find(':');
      if (colon == std::string_view::npos) throw fail("expected idx:val, got '" + std::string(toks[t]) + "'");
      unsigned long index = 0;
      double value = 0.0;
      if (!detail::parse_index(toks[t].substr(0, colon), index) || index == 0) {
        throw fail("bad feature index in '" + std::string(toks[t]) + "'");
      }
      if (!detail::parse_double(toks[t].substr(colon + 1), value)) {
        throw fail("bad feature value in '" + std::string(toks[t]) + "'");
      }
      if (index <= prev) throw fail("feature indices not strictly increasing at '" + std::string(toks[t]) + "'");
      prev = index;
      if (index > std::numeric_limits<std::uint32_t>::max()) throw fail("feature index too large");
      max_index = std::max<std::size_t>(max_index, index);
      if (value != 0.0) {
        row.idx.push_back(static_cast<std::uint32_t>(index - 1));
        row.val.push_back(value);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(source + ": no observations");

  std::set<double> labels;
  for (const auto& r : rows) labels.insert(r.label);
  if (labels.size() > 2) throw IoError(source + ": more than two distinct labels; not a binary dataset");
  auto map_label = [&](double v) {
    if (labels.size() == 2) return v == *labels.begin() ? -1.0 : 1.0;
    return v > 0.0 ? 1.0 : -1.0;
  };

  Dataset ds;
  ds.dim = std::max(max_index, opts.min_dim);
  ds.observations.reserve(rows.size());
  for (auto& r : rows) {
    ds.observations.push_back(
        Observation::classification(SparseVector(ds.dim, std::move(r.idx), std::move(r.val)), map_label(r.label)));
  }
  return ds;
}

inline Dataset parse_libsvm(const std::string& path, const LibsvmOptions& opts = {}) {
  const std::string bytes = detail::read_file_bytes(path);
  return parse_libsvm_text(bytes, path, opts);
}

/// Writes labels and nonzero features with 17 significant digits, so that
/// parse_libsvm reproduces the values exactly.
inline void write_libsvm(const Dataset& ds, std::ostream& out) {
  char buf[64];
  for (const auto& o : ds.observations) {
    std::snprintf(buf, sizeof buf, "%+.17g", o.y);
    out << buf;
    auto emit = [&](std::size_t j, double v) {
      std::snprintf(buf, sizeof buf, " %zu:%.17g", j + 1, v);
      out << buf;
    };
    if (const auto* s = std::get_if<SparseVector>(&o.x)) {
      for (std::size_t k = 0; k < s->nnz(); ++k) emit(s->indices()[k], s->values()[k]);
    } else {
      const auto& v = std::get<DenseVector>(o.x);
      for (Eigen::Index j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) emit(static_cast<std::size_t>(j), v[j]);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Benchmark protocol

/// Drops observations with ||x|| > factor * (mean ||x|| over the input).
inline Dataset remove_outliers(const Dataset& ds, double factor = 5.0, std::size_t* removed = nullptr) {
  require(!ds.empty(), "remove_outliers: empty dataset");
  std::vector<double> norms(ds.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    norms[i] = std::sqrt(squared_norm(ds.observations[i].x));
    mean += norms[i];
  }
  mean /= static_cast<double>(ds.size());
  Dataset out;
  out.dim = ds.dim;
  out.truth = ds.truth;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (norms[i] <= factor * mean) out.observations.push_back(ds.observations[i]);
  }
  if (removed != nullptr) *removed = ds.size() - out.size();
  return out;
}

/// i.i.d. uniform indices into [0, size), with replacement, up to `budget`
/// draws.
class PassSampler {
 public:
  PassSampler(std::size_t size, std::size_t budget, Rng rng)
      : dist_(0, size == 0 ? 0 : size - 1), budget_(budget), rng_(std::move(rng)) {
    require(size >= 1, "PassSampler: empty index range");
  }

  std::optional<std::size_t> next() {
    if (drawn_ >= budget_) return std::nullopt;
    ++drawn_;
    return dist_(rng_);
  }

  std::size_t budget() const { return budget_; }
  std::size_t drawn() const { return drawn_; }

 private:
  std::uniform_int_distribution<std::size_t> dist_;
  std::size_t budget_;
  std::size_t drawn_ = 0;
  Rng rng_;
};

/// Observations of a dataset in the order given by a PassSampler.
class SampledStream {
 public:
  SampledStream(const Dataset& ds, PassSampler sampler) : ds_(&ds), sampler_(std::move(sampler)) {}

  const Observation* next() {
    const auto i = sampler_.next();
    return i ? &ds_->observations[*i] : nullptr;
  }

 private:
  const Dataset* ds_;
  PassSampler sampler_;
};

struct Protocol {
  Dataset train;
  Dataset test;
  std::size_t removed = 0;
  std::uint64_t seed = 0;
  std::size_t passes = 100;

  std::size_t budget() const { return passes * train.size(); }

  /// Independent bootstrap index stream for one replication.
  PassSampler sampler(std::size_t replication = 0) const {
    return PassSampler(train.size(), budget(), make_rng(seed, replication, StreamRole::sampler));
  }
};

/// Outlier removal at 5x the mean norm, seeded shuffle, half split (the odd
/// leftover goes to test), and a 100-pass bootstrap budget.
inline Protocol prepare_protocol(const Dataset& ds, std::uint64_t seed, std::size_t passes = 100) {
  require(ds.size() >= 4, "prepare_protocol: need at least 4 observations");
  Protocol p;
  p.seed = seed;
  p.passes = passes;
  const Dataset kept = remove_outliers(ds, 5.0, &p.removed);
  if (kept.size() < 2) throw ContractViolation("prepare_protocol: fewer than 2 observations after outlier removal");
  std::vector<std::size_t> order(kept.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, 0, StreamRole::split);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t half = kept.size() / 2;
  p.train.dim = p.test.dim = kept.dim;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < half ? p.train : p.test).observations.push_back(kept.observations[order[k]]);
  }
  return p;
}

}  // namespace avgsgd

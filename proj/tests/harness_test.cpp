#include "avgsgd/harness.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace avgsgd;
using avgsgd::testing::Gen;

namespace {
std::string csv_of(const std::vector<RiskCurve>& curves) {
  std::ostringstream out;
  export_results(curves, out, ExportFormat::csv);
  return out.str();
}

RiskCurve hand_curve(const std::string& name, double gamma, std::size_t reps, std::vector<std::size_t> n, Gen& g) {
  RiskCurve c;
  c.optimizer = name;
  c.gamma = gamma;
  c.n = std::move(n);
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<double> a, b;
    for (std::size_t k = 0; k < c.n.size(); ++k) {
      a.push_back(std::exp(g.normal()) * 1e-3);
      b.push_back(g.uniform(0.0, 1.0) / 3.0);
    }
    c.train.push_back(a);
    c.test.push_back(b);
  }
  return c;
}

ExperimentConfig lsq_config(std::size_t n, std::size_t reps, std::uint64_t seed) {
  ExperimentConfig c;
  c.optimizer = OptimizerId::lms_avg_const;
  c.n = n;
  c.replications = reps;
  c.seed = seed;
  c.checkpoints_per_decade = 10;
  return c;
}
}  // namespace

TEST(OptimizerNames, RoundTrip) {
  for (int k = 0; k <= static_cast<int>(OptimizerId::adagrad); ++k) {
    const auto id = static_cast<OptimizerId>(k);
    EXPECT_EQ(parse_optimizer(optimizer_name(id)), id);
  }
  EXPECT_THROW(parse_optimizer("newton"), ContractViolation);
  EXPECT_TRUE(is_decaying(OptimizerId::avg_decay_sgd));
  EXPECT_FALSE(is_decaying(OptimizerId::avg_const_sgd));
  EXPECT_EQ(newton_policy(OptimizerId::newton_online), SupportPolicy::current_average);
  EXPECT_FALSE(newton_policy(OptimizerId::sag).has_value());
}

TEST(StepSizes, TheoreticalTableAndGrid) {
  const auto sq = LossModel::square(), lg = LossModel::logistic();
  EXPECT_DOUBLE_EQ(theoretical_step(OptimizerId::lms_avg_const, sq, 2.0), 1.0 / 8.0);
  EXPECT_DOUBLE_EQ(theoretical_step(OptimizerId::avg_const_sgd, lg, 2.0), 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(theoretical_step(OptimizerId::newton_2step, lg, 2.0), 1.0 / 2.0);
  EXPECT_DOUBLE_EQ(theoretical_step(OptimizerId::newton_online, lg, 2.0), 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(theoretical_step(OptimizerId::avg_decay_sgd, lg, 2.0, 0.5), 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(theoretical_step(OptimizerId::sag, lg, 2.0), 1.0 / 32.0);
  EXPECT_THROW(theoretical_step(OptimizerId::sag, lg, 0.0), ContractViolation);
  StepRule grid;
  grid.kind = StepRule::Kind::grid;
  const auto g = step_sizes(grid, 1.0, 3.0);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g.front(), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(g.back(), 16.0);
  for (std::size_t k = 1; k < g.size(); ++k) EXPECT_DOUBLE_EQ(g[k] / g[k - 1], 4.0);
  StepRule rel;
  rel.kind = StepRule::Kind::relative;
  rel.value = 0.5;
  EXPECT_EQ(step_sizes(rel, 1.0, 2.0), std::vector<double>{0.25});
}

TEST(RunExperiment, EmptyBudgetIsFlatAtOne) {
  ExperimentConfig c = lsq_config(0, 1, 1);
  c.normalize = true;
  const auto curves = run_experiment(c);
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_EQ(curves[0].n, std::vector<std::size_t>{0});
  EXPECT_EQ(curves[0].train[0], std::vector<double>{1.0});
  EXPECT_EQ(curves[0].test[0], std::vector<double>{1.0});
  EXPECT_GT(curves[0].train_normalization, 0.0);
}

TEST(RunExperiment, NormalizedCurvesStartAtOne) {
  ExperimentConfig c = lsq_config(1000, 3, 2);
  c.normalize = true;
  c.step.kind = StepRule::Kind::grid;
  c.step.grid_radius = 1;
  const auto curves = run_experiment(c);
  ASSERT_EQ(curves.size(), 3u);
  for (const auto& cv : curves) {
    EXPECT_TRUE(cv.normalized);
    for (std::size_t r = 0; r < cv.replications(); ++r) {
      EXPECT_EQ(cv.train[r][0], 1.0);
      EXPECT_EQ(cv.test[r][0], 1.0);
    }
    for (std::size_t k = 1; k < cv.n.size(); ++k) EXPECT_LT(cv.n[k - 1], cv.n[k]);
  }
}

TEST(RunExperiment, LmsStepSizesReachTheSameRate) {
  std::vector<ExperimentConfig> cfgs;
  for (double v : {1.0, 0.25, 1.0 / 16}) {
    ExperimentConfig c = lsq_config(100000, 10, 3);
    c.step.kind = StepRule::Kind::relative;
    c.step.value = v;
    cfgs.push_back(c);
  }
  const auto curves = run_experiments(cfgs);
  std::vector<double> finals;
  for (const auto& c : curves) finals.push_back(mean_curve(c).back());
  const double hi = *std::max_element(finals.begin(), finals.end());
  const double lo = *std::min_element(finals.begin(), finals.end());
  EXPECT_LE(hi / lo, 2.5);
}

TEST(RunExperiment, DeterministicAcrossRunsAndJobCounts) {
  ExperimentConfig a = lsq_config(3000, 4, 4);
  ExperimentConfig b;
  b.dataset.model = SyntheticModel::logistic;
  b.optimizer = OptimizerId::newton_online;
  b.n = 2000;
  b.replications = 3;
  b.seed = 4;
  b.eval_size = 500;
  const std::string one = csv_of(run_experiments({a, b}, 1));
  EXPECT_EQ(one, csv_of(run_experiments({a, b}, 1)));
  EXPECT_EQ(one, csv_of(run_experiments({a, b}, 3)));
  ExperimentConfig other = a;
  other.seed = 5;
  EXPECT_NE(csv_of(run_experiment(a)), csv_of(run_experiment(other)));
}

TEST(RunExperiment, ConfigErrorsAreContractViolations) {
  ExperimentConfig c = lsq_config(10, 1, 1);
  c.loss = LossModel::logistic();
  EXPECT_THROW(run_experiment(c), ContractViolation);
  ExperimentConfig s = lsq_config(10, 1, 1);
  s.optimizer = OptimizerId::sag;
  EXPECT_THROW(run_experiment(s), ContractViolation);
  ExperimentConfig r = lsq_config(10, 0, 1);
  EXPECT_THROW(run_experiment(r), ContractViolation);
  ExperimentConfig f;
  f.dataset.kind = DatasetSource::Kind::file;
  f.dataset.path = avgsgd::testing::temp_path("does-not-exist.svm").string();
  f.optimizer = OptimizerId::avg_const_sgd;
  EXPECT_THROW(run_experiment(f), IoError);
}

TEST(RunExperiment, FiniteSyntheticTrainingSetWithSagAndAdagrad) {
  for (auto opt : {OptimizerId::sag, OptimizerId::adagrad, OptimizerId::avg_const_sgd}) {
    ExperimentConfig c;
    c.dataset.model = SyntheticModel::logistic;
    c.dataset.d = 5;
    c.optimizer = opt;
    c.train_size = 200;
    c.passes = 5;
    c.replications = 2;
    c.eval_size = 1000;
    c.seed = 6;
    const auto curves = run_experiment(c);
    ASSERT_EQ(curves.size(), 1u);
    EXPECT_EQ(curves[0].n.back(), 1000u);
    for (const auto& row : curves[0].train)
      for (double v : row) EXPECT_GE(v, -1e-12);
    // The training excess ends below its starting value.
    EXPECT_LT(mean_curve(curves[0]).back(), mean_curve(curves[0]).front());
  }
}

TEST(RunExperiment, FileDatasetUsesSplitOptima) {
  const Dataset ds = avgsgd::testing::logistic_dataset(5, 400, 7);
  const auto path = avgsgd::testing::temp_path("harness.svm");
  {
    std::ofstream f(path);
    write_libsvm(ds, f);
  }
  std::vector<ExperimentConfig> cfgs;
  for (auto opt : {OptimizerId::avg_const_sgd, OptimizerId::sag, OptimizerId::adagrad, OptimizerId::newton_2step}) {
    ExperimentConfig c;
    c.dataset.kind = DatasetSource::Kind::file;
    c.dataset.path = path.string();
    c.optimizer = opt;
    c.passes = 3;
    c.replications = 2;
    c.seed = 7;
    cfgs.push_back(c);
  }
  const auto curves = run_experiments(cfgs);
  ASSERT_EQ(curves.size(), 4u);
  for (const auto& c : curves) {
    EXPECT_TRUE(c.normalized) << c.optimizer;
    EXPECT_EQ(c.n.back(), 3u * 200u);
    EXPECT_EQ(c.train[0][0], 1.0);
    EXPECT_EQ(c.test[0][0], 1.0);
    for (std::size_t r = 0; r < c.replications(); ++r)
      for (std::size_t k = 0; k < c.n.size(); ++k) {
        EXPECT_GE(c.train[r][k], -1e-10) << c.optimizer;
        EXPECT_GE(c.test[r][k], -1e-10) << c.optimizer;
      }
    EXPECT_LT(mean_curve(c).back(), 0.5) << c.optimizer;
  }
  std::filesystem::remove(path);
}

TEST(BestStep, PicksLowestTestErrorAfterOnePassWithSmallerGammaOnTies) {
  auto make = [](double gamma, double at_pass) {
    RiskCurve c;
    c.gamma = gamma;
    c.n = {0, 10, 100};
    c.train = {{1.0, 0.5, 0.1}};
    c.test = {{1.0, at_pass, 0.01}};
    return c;
  };
  EXPECT_EQ(best_step_after_one_pass({make(1.0, 0.3), make(0.25, 0.2), make(4.0, 0.4)}, 10), 1u);
  EXPECT_EQ(best_step_after_one_pass({make(1.0, 0.2), make(0.25, 0.2), make(4.0, 0.2)}, 10), 1u);
  EXPECT_EQ(best_step_after_one_pass({make(1.0, 0.2), make(0.25, 0.2)}, 7), 1u);
  EXPECT_THROW(best_step_after_one_pass({}, 10), ContractViolation);
}

TEST(MeanCurve, HandValues) {
  RiskCurve c;
  c.n = {0, 1};
  c.train = {{1.0, 2.0}, {3.0, 6.0}};
  c.test = c.train;
  EXPECT_EQ(mean_curve(c), (std::vector<double>{2.0, 4.0}));
  const auto se = stderr_curve(c);
  EXPECT_NEAR(se[0], std::sqrt(2.0) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(se[1], std::sqrt(8.0) / std::sqrt(2.0), 1e-15);
  c.train.resize(1);
  EXPECT_EQ(stderr_curve(c), (std::vector<double>{0.0, 0.0}));
}

TEST(SlopeFit, ExactPowerLaws) {
  std::vector<std::size_t> n{0};
  for (int k = 0; k <= 60; ++k) n.push_back(static_cast<std::size_t>(std::llround(std::pow(10.0, k / 10.0))));
  std::vector<double> inv, isqrt;
  for (std::size_t v : n) {
    inv.push_back(v == 0 ? 1.0 : 3.7 / static_cast<double>(v));
    isqrt.push_back(v == 0 ? 1.0 : 0.2 / std::sqrt(static_cast<double>(v)));
  }
  EXPECT_NEAR(fit_loglog_slope(n, inv, 0.1, 1.0).slope, -1.0, 1e-12);
  EXPECT_NEAR(fit_loglog_slope(n, inv, 0.1, 1.0).intercept, std::log10(3.7), 1e-10);
  EXPECT_NEAR(fit_loglog_slope(n, isqrt, 0.0, 0.5).slope, -0.5, 1e-12);
  RiskCurve c;
  c.n = n;
  c.train = {inv};
  c.test = {isqrt};
  EXPECT_NEAR(fit_last_decades(c).slope, -1.0, 1e-12);
  EXPECT_NEAR(fit_last_decades(c, 2.0, Series::test).slope, -0.5, 1e-12);
}

TEST(SlopeFit, TooFewPointsAndNonpositiveValues) {
  const std::vector<std::size_t> n{1, 10, 100, 1000, 10000, 100000};
  std::vector<double> v{1, 0.1, 0.01, 0.0, 1e-4, -1.0};
  EXPECT_THROW(fit_loglog_slope(n, v, 0.0, 1.0), ContractViolation);
  v = {1, 0.1, 0.01, 0.0, 1e-4, 1e-5};
  const auto fit = fit_loglog_slope(n, v, 0.0, 1.0);
  EXPECT_EQ(fit.excluded, 1u);
  EXPECT_EQ(fit.points, 5u);
  EXPECT_NEAR(fit.slope, -1.0, 1e-12);
  EXPECT_THROW(fit_loglog_slope(n, v, 0.5, 0.4), ContractViolation);
  EXPECT_THROW(fit_loglog_slope_range(n, std::vector<double>(5, 1.0), 0, 5), ContractViolation);
}

TEST(VerifyBound, NoiselessStartAtOptimumIsIdenticallyZero) {
  SyntheticSpec spec;
  spec.d = 6;
  SyntheticProblem problem(spec);
  const auto& t = problem.truth();
  PopulationRisk risk(problem, 1, 0);
  RiskCurve curve;
  const auto cps = Checkpoints::logarithmic(10000, 10);
  curve.n = cps.steps();
  for (std::size_t rep = 0; rep < 3; ++rep) {
    Rng rng = make_rng(8, rep, StreamRole::samples);
    std::vector<Observation> obs;
    for (int i = 0; i < 10000; ++i) {
      const DenseVector x = problem.sample_x(rng);
      obs.push_back(Observation::regression(x, x.dot(t.theta_star)));
    }
    VectorStream stream(obs);
    std::vector<double> row;
    run_averaged_lms(stream, 1.0 / (4.0 * t.R2()), 10000, IterateState(t.theta_star), cps,
                     [&](std::size_t, const IterateState& s) { row.push_back(risk.excess(s.theta_bar())); });
    for (double v : row) EXPECT_LE(v, 1e-28);
    curve.train.push_back(row);
    curve.test.push_back(row);
  }
  BoundParams p;
  p.R = std::sqrt(t.R2());
  p.d = 6;
  const auto rep = verify_bound(curve, [&](std::size_t n) { return n == 0 ? 0.0 : theorem1_bound(p, 1.0 / (4.0 * t.R2()), n); });
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.checks.size(), curve.n.size());
}

TEST(VerifyBound, PositiveAndNegativeControls) {
  ExperimentConfig c = lsq_config(20000, 10, 9);
  c.init_offset = 1e-3;
  const auto curve = run_experiment(c).at(0);
  SyntheticSpec spec;
  spec.d = c.dataset.d;
  spec.seed = c.seed;
  const GroundTruth t = SyntheticProblem(spec).truth();
  BoundParams p;
  p.R = std::sqrt(t.R2());
  p.d = spec.d;
  p.sigma = p.tau = t.sigma;
  p.dist0 = c.init_offset;
  auto bound = [&](const BoundParams& bp) {
    return [bp, gamma = curve.gamma](std::size_t n) { return theorem1_bound(bp, gamma, std::max<std::size_t>(n, 1)); };
  };
  EXPECT_EQ(verify_bound(curve, bound(p)).violations, 0u);
  BoundParams wrong = p;
  wrong.sigma = wrong.tau = t.sigma / 10;
  const auto rep = verify_bound(curve, bound(wrong));
  EXPECT_GT(rep.violations, 0u);
  for (const auto& ch : rep.checks) EXPECT_EQ(ch.violated, !(ch.mean + 2 * ch.stderr_ <= ch.bound));
}

TEST(Export, EmptyCurveSetIsHeaderOnly) {
  EXPECT_EQ(csv_of({}), std::string(kCsvHeader) + "\n");
  std::istringstream in(csv_of({}));
  EXPECT_TRUE(read_csv(in).empty());
}

TEST(Export, RowCountAndRoundTrip) {
  Gen g(10);
  const std::vector<RiskCurve> curves{hand_curve("avg-const-sgd", 0.1, 2, {0, 5, 50}, g),
                                      hand_curve("newton:online", 1.0 / 3.0, 2, {0, 5, 50}, g)};
  const std::string text = csv_of(curves);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 13);
  std::istringstream in(text);
  const auto back = read_csv(in);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].optimizer, curves[i].optimizer);
    EXPECT_EQ(back[i].gamma, curves[i].gamma);
    EXPECT_EQ(back[i].n, curves[i].n);
    EXPECT_EQ(back[i].train, curves[i].train);
    EXPECT_EQ(back[i].test, curves[i].test);
  }
  EXPECT_EQ(csv_of(back), text);
}

TEST(Export, RandomValuesSurviveSeventeenDigits) {
  Gen g(11);
  for (int t = 0; t < 50; ++t) {
    RiskCurve c = hand_curve("sag", std::ldexp(g.uniform(0.5, 1.0), g.integer(-60, 60)), 3, {0, 1, 2, 3}, g);
    for (auto& row : c.train)
      for (double& v : row) v = std::ldexp(g.uniform(-1.0, 1.0), g.integer(-300, 300));
    std::istringstream in(csv_of({c}));
    const auto back = read_csv(in);
    EXPECT_EQ(back.at(0).train, c.train);
    EXPECT_EQ(back.at(0).gamma, c.gamma);
  }
}

TEST(Export, PlotDataBlocks) {
  Gen g(12);
  const std::vector<RiskCurve> curves{hand_curve("a", 1, 2, {0, 1}, g), hand_curve("b", 2, 3, {0, 1, 2}, g)};
  std::ostringstream out;
  export_results(curves, out, ExportFormat::plot_data);
  const std::string s = out.str();
  EXPECT_NE(s.find("# optimizer=a gamma=1 replications=2\n"), std::string::npos);
  EXPECT_NE(s.find("# optimizer=b gamma=2 replications=3\n"), std::string::npos);
  EXPECT_NE(s.find("\n\n\n# optimizer=b"), std::string::npos);
  std::istringstream in(s);
  std::string line;
  int data = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') {
      std::istringstream f(line);
      double v;
      int cols = 0;
      while (f >> v) ++cols;
      EXPECT_EQ(cols, 5);
      ++data;
    }
  EXPECT_EQ(data, 5);
  EXPECT_EQ(parse_format("plot-data"), ExportFormat::plot_data);
  EXPECT_THROW(parse_format("json"), ContractViolation);
}

TEST(Export, IoFailures) {
  EXPECT_THROW(export_results({}, "/nonexistent-dir/x.csv", ExportFormat::csv), IoError);
  EXPECT_THROW(read_csv_file("/nonexistent-dir/x.csv"), IoError);
  std::istringstream bad("a,b,c\n");
  EXPECT_THROW(read_csv(bad), IoError);
  std::istringstream short_row(std::string(kCsvHeader) + "\nsgd,1,0,0,1\n");
  EXPECT_THROW(read_csv(short_row), IoError);
  const auto path = avgsgd::testing::temp_path("out.csv");
  Gen g(13);
  const std::vector<RiskCurve> curves{hand_curve("x", 1, 1, {0, 1}, g)};
  export_results(curves, path.string(), ExportFormat::csv);
  EXPECT_EQ(read_csv_file(path.string()).at(0).train, curves[0].train);
  std::filesystem::remove(path);
}

TEST(Config, DefaultsBlocksAndValues) {
  const auto cfgs = parse_config_text(R"(
# shared settings
dataset = synthetic-logistic
d = 7
replications = 3   # trailing comment
seed = 42
[experiment]
optimizer = avg-const-sgd
gamma_r2 = 1/16
[experiment]
optimizer = newton:2step
step = grid
grid_radius = 1
n = 1000
normalize = true
[experiment]
optimizer = sag
train_size = 50
passes = 4
gamma = 0.01
eval_size = 100
checkpoints_per_decade = 5
decay_c = 2
init_offset = 0.1
theta_norm = 2
loss = logistic
)");
  ASSERT_EQ(cfgs.size(), 3u);
  for (const auto& c : cfgs) {
    EXPECT_EQ(c.dataset.d, 7u);
    EXPECT_EQ(c.replications, 3u);
    EXPECT_EQ(c.seed, 42u);
    EXPECT_TRUE(c.effective_loss().is_logistic());
  }
  EXPECT_EQ(cfgs[0].step.kind, StepRule::Kind::relative);
  EXPECT_DOUBLE_EQ(cfgs[0].step.value, 1.0 / 16.0);
  EXPECT_EQ(cfgs[1].step.kind, StepRule::Kind::grid);
  EXPECT_EQ(cfgs[1].step.grid_radius, 1);
  EXPECT_EQ(*cfgs[1].n, 1000u);
  EXPECT_TRUE(cfgs[1].effective_normalize());
  EXPECT_FALSE(cfgs[0].effective_normalize());
  EXPECT_EQ(cfgs[2].optimizer, OptimizerId::sag);
  EXPECT_EQ(cfgs[2].step.kind, StepRule::Kind::absolute);
  EXPECT_EQ(*cfgs[2].train_size, 50u);
  EXPECT_EQ(*cfgs[2].passes, 4u);
  EXPECT_EQ(cfgs[2].eval_size, 100u);
  EXPECT_EQ(cfgs[2].checkpoints_per_decade, 5u);
  EXPECT_EQ(cfgs[2].decay_c, 2.0);
  EXPECT_EQ(cfgs[2].init_offset, 0.1);
  EXPECT_EQ(*cfgs[2].dataset.theta_norm, 2.0);
}

TEST(Config, SingleImplicitExperimentAndFileDataset) {
  const auto cfgs = parse_config_text("dataset = /data/a9a.txt\noptimizer = adagrad\n");
  ASSERT_EQ(cfgs.size(), 1u);
  EXPECT_EQ(cfgs[0].dataset.kind, DatasetSource::Kind::file);
  EXPECT_EQ(cfgs[0].dataset.path, "/data/a9a.txt");
  EXPECT_TRUE(cfgs[0].effective_normalize());
  EXPECT_TRUE(cfgs[0].effective_loss().is_logistic());
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config_text("colour = blue\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("n = ten\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("n = 2.5\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("gamma = 1/0\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("just words\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("optimizer = sgd\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("normalize = maybe\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("replications = 0\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("dataset = synthetic-logistic\noptimizer = lms-avg-const\n"), ContractViolation);
  EXPECT_THROW(parse_config_text("optimizer = sag\n"), ContractViolation);
  EXPECT_THROW(load_config(avgsgd::testing::temp_path("missing.cfg").string()), IoError);
  try {
    parse_config_text("seed = 1\n\nbogus = 2\n");
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(Config, LoadFromFile) {
  const auto path = avgsgd::testing::temp_path("exp.cfg");
  {
    std::ofstream f(path);
    f << "n = 10\n[experiment]\nseed = 1\n[experiment]\nseed = 2\n";
  }
  const auto cfgs = load_config(path.string());
  ASSERT_EQ(cfgs.size(), 2u);
  EXPECT_EQ(cfgs[1].seed, 2u);
  EXPECT_EQ(*cfgs[0].n, 10u);
  std::filesystem::remove(path);
}

TEST(Presets, FigureExperimentLists) {
  const auto left = preset("fig1-left");
  const auto middle = preset("fig1-middle");
  const auto right = preset("fig1-right");
  EXPECT_EQ(left.size(), 8u);
  EXPECT_EQ(middle.size(), 6u);
  EXPECT_EQ(right.size(), 5u);
  for (const auto& c : left) EXPECT_FALSE(c.effective_loss().is_logistic());
  for (const auto* set : {&middle, &right})
    for (const auto& c : *set) {
      EXPECT_TRUE(c.effective_loss().is_logistic());
      EXPECT_EQ(*c.n, 1000000u);
      EXPECT_EQ(c.replications, 10u);
    }
  EXPECT_EQ(right[3].optimizer, OptimizerId::newton_online);
  EXPECT_THROW(preset("fig2"), ContractViolation);
}

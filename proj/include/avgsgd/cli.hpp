#pragma once

// Command-line front end. run_cli is the whole program; main() only forwards
// argv and the standard streams.
//
// Exit codes: 0 success, 1 invalid arguments or contract violation, 2 I/O
// error.

#include "avgsgd/harness.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace avgsgd {

namespace detail {

inline std::map<std::string, double> parse_params(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ContractViolation("--params: expected key=value, got '" + item + "'");
    const std::string key = trim(item.substr(0, eq));
    out[key] = parse_number(key, trim(item.substr(eq + 1)));
  }
  return out;
}

inline double param(const std::map<std::string, double>& p, const std::string& key) {
  const auto it = p.find(key);
  if (it == p.end()) throw ContractViolation("--params: missing '" + key + "'");
  return it->second;
}

inline double param_or(const std::map<std::string, double>& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline std::size_t param_count(const std::map<std::string, double>& p, const std::string& key) {
  const double v = param(p, key);
  require(v >= 1.0 && std::floor(v) == v, "--params: '" + key + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

// R may be given directly or as R2.
inline double param_R(const std::map<std::string, double>& p) {
  if (p.count("R")) return param(p, "R");
  return std::sqrt(param(p, "R2"));
}

// gamma may be given directly or as gamma_r2 (gamma * R^2).
inline double param_gamma(const std::map<std::string, double>& p, double R) {
  if (p.count("gamma")) return param(p, "gamma");
  return param(p, "gamma_r2") / (R * R);
}

inline BoundParams bound_params(const std::map<std::string, double>& p) {
  BoundParams b;
  b.R = param_R(p);
  b.sigma = param_or(p, "sigma", 0.0);
  b.tau = param_or(p, "tau", b.sigma);
  b.kappa = param_or(p, "kappa", 1.0);
  b.d = param_count(p, "d");
  b.dist0 = param_or(p, "dist0", 0.0);
  return b;
}

inline std::string fmt(double v) { return fmt17(v); }

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Averaged stochastic gradient experiments", "avgsgd"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_path = "-";
  std::string format = "csv";
  std::size_t jobs = 1;

  auto* run = app.add_subcommand("run", "Run experiments and export excess-risk curves");
  std::string config_path, preset_name;
  std::optional<std::size_t> reps_override, n_override;
  auto* cfg_opt = run->add_option("--config", config_path, "Experiment config file");
  auto* preset_opt = run->add_option("--preset", preset_name, "Built-in preset: fig1-left, fig1-middle, fig1-right");
  cfg_opt->excludes(preset_opt);
  run->add_option("--seed", seed, "Experiment seed (overrides the config)")->each([&](const std::string&) {
    seed_given = true;
  });
  run->add_option("--out", out_path, "Output path, '-' for stdout");
  run->add_option("--format", format, "csv or plot-data")->check(CLI::IsMember({"csv", "plot-data"}));
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--replications", reps_override, "Override replications");
  run->add_option("--n", n_override, "Override the number of steps");

  auto* est = app.add_subcommand("estimate-constants", "Estimate R^2, kappa, rho and the batch optimum");
  std::string data, loss_name = "logistic", kappa_mode = "auto";
  std::size_t synth_d = 20, synth_n = 10000;
  est->add_option("--data", data, "libsvm file, or synthetic-lsq / synthetic-logistic")->required();
  est->add_option("--loss", loss_name, "square or logistic");
  est->add_option("--kappa-mode", kappa_mode, "auto, fastica or axes")
      ->check(CLI::IsMember({"auto", "fastica", "axes"}));
  est->add_option("--seed", seed, "Seed for synthetic data and restarts");
  est->add_option("--d", synth_d, "Synthetic dimension");
  est->add_option("--n", synth_n, "Synthetic sample size");

  auto* bounds = app.add_subcommand("bounds", "Evaluate a closed-form bound");
  std::string theorem, params_text;
  bounds->add_option("--theorem", theorem, "1, 2, 3 or corollary")
      ->required()
      ->check(CLI::IsMember({"1", "2", "3", "corollary"}));
  bounds->add_option("--params", params_text, "Comma-separated key=value list")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (run->parsed()) {
      if (config_path.empty() == preset_name.empty()) {
        throw ContractViolation("run: exactly one of --config or --preset is required");
      }
      auto cfgs = config_path.empty() ? preset(preset_name) : load_config(config_path);
      for (auto& c : cfgs) {
        if (seed_given) c.seed = seed;
        if (reps_override) c.replications = *reps_override;
        if (n_override) c.n = *n_override;
        c.validate();
      }
      const auto curves = run_experiments(cfgs, jobs);
      const auto fmt = parse_format(format);
      if (out_path == "-") {
        export_results(curves, out, fmt);
      } else {
        export_results(curves, out_path, fmt);
      }
      return 0;
    }

    if (est->parsed()) {
      const LossModel loss = parse_loss(loss_name);
      Dataset ds;
      if (data == "synthetic-lsq" || data == "synthetic-logistic") {
        SyntheticSpec spec;
        spec.d = synth_d;
        spec.n = synth_n;
        spec.seed = seed;
        spec.model = data == "synthetic-lsq" ? SyntheticModel::lsq : SyntheticModel::logistic;
        ds = spec.model == SyntheticModel::lsq ? generate_lsq(spec) : generate_logistic(spec);
      } else {
        ds = parse_libsvm(data);
      }
      std::optional<KappaMode> mode;
      if (kappa_mode == "fastica") mode = KappaMode::fastica;
      if (kappa_mode == "axes") mode = KappaMode::axes;
      KappaOptions kopts;
      kopts.seed = seed;
      const ProblemConstants pc = estimate_constants(ds, loss, mode, kopts);
      out << "n=" << ds.size() << '\n';
      out << "d=" << ds.dim << '\n';
      out << "R2=" << detail::fmt(pc.R2) << '\n';
      out << "kappa=" << detail::fmt(pc.kappa) << '\n';
      out << "kappa_mode=" << (pc.kappa_mode == KappaMode::fastica ? "fastica" : "axes") << '\n';
      if (pc.rho) {
        out << "rho=" << detail::fmt(pc.rho->rho) << '\n';
        out << "rho_loose=" << (pc.rho->loose ? "true" : "false") << '\n';
      }
      out << "f_star=" << detail::fmt(pc.reference.f_star) << '\n';
      out << "grad_norm=" << detail::fmt(pc.reference.grad_norm) << '\n';
      out << "near_separable=" << (pc.reference.near_separable ? "true" : "false") << '\n';
      return 0;
    }

    if (bounds->parsed()) {
      const auto p = detail::parse_params(params_text);
      if (theorem == "1") {
        const BoundParams b = detail::bound_params(p);
        out << "bound=" << detail::fmt(theorem1_bound(b, detail::param_gamma(p, b.R), detail::param_count(p, "n")))
            << '\n';
      } else if (theorem == "2") {
        const BoundParams b = detail::bound_params(p);
        out << "bound="
            << detail::fmt(theorem2_pmoment_bound(b, detail::param_or(p, "p", 1.0), detail::param_gamma(p, b.R),
                                                  detail::param_count(p, "n")))
            << '\n';
      } else if (theorem == "corollary") {
        const BoundParams b = detail::bound_params(p);
        out << "threshold="
            << detail::fmt(corollary_tail_threshold(b, detail::param_gamma(p, b.R), detail::param(p, "delta"),
                                                    detail::param_count(p, "n")))
            << '\n';
      } else {
        NewtonBoundParams b;
        b.kappa = detail::param_or(p, "kappa", 1.0);
        b.rho = detail::param(p, "rho");
        b.d = detail::param_count(p, "d");
        b.R = detail::param_R(p);
        b.dist0 = detail::param_or(p, "dist0", 0.0);
        const auto r = theorem3_bound(b, detail::param_count(p, "n"));
        out << "bound=" << detail::fmt(r.bound) << '\n';
        out << "valid=" << (r.valid ? "true" : "false") << '\n';
      }
      return 0;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace avgsgd

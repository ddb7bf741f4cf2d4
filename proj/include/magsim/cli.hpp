#pragma once

#include <CLI11.hpp>
#include <deque>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "magsim/checks.hpp"
#include "magsim/config.hpp"
#include "magsim/scenarios.hpp"

// Command-line front end. Flags mirror the config-file keys (dashes for
// underscores) and take precedence over file values.

namespace magsim::cli {

namespace detail {

struct FlagSet {
  std::string config_path;
  // raw values; applied through apply_key so file/flag parsing agree
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::vector<std::string> values;
  bool decay_value = true;
  CLI::Option* decay_opt = nullptr;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value lines)");
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"wavelength", "probe wavelength [m]"},
        {"dipole_moment", "atomic dipole moment [C m]"},
        {"decay_width", "atomic decay width Gamma [1/s]"},
        {"detuning", "probe detuning [rad/s]"},
        {"beam_area", "interaction area [m^2]"},
        {"photon_flux", "photon flux [1/s]"},
        {"atom_number", "atom number"},
        {"beta", "atomic magnetic moment [J/T]"},
        {"kappa_sq", "effective kappa^2 [1/s]"},
        {"mu", "effective mu [1/(s T)]"},
        {"eta", "effective decay rate [1/s]"},
        {"tau", "probe segment duration [s]"},
        {"t_final", "total probing time [s]"},
        {"r", "probe squeezing parameter"},
        {"delta_b0", "prior width of B [T]"},
        {"prior_mean", "prior mean of B [T]"},
        {"sg_time", "terminal spin measurement time [s]"},
        {"truth_mode", "innovation | ground-truth"},
        {"b_true", "fixed true field [T]"},
        {"n", "number of trajectories"},
        {"record_points", "points on the log-spaced record grid"},
        {"record_t_min", "first recorded time [s]"},
        {"seed", "RNG seed"},
        {"threads", "worker threads (0 = auto)"},
        {"out", "output CSV path"},
    };
    values.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      std::string flag = "--" + keys[i].first;
      for (auto& ch : flag)
        if (ch == '_') ch = '-';
      options.emplace_back(keys[i].first,
                           sub->add_option(flag, values[i], keys[i].second));
    }
    decay_opt = sub->add_flag("--decay,!--no-decay", decay_value,
                              "include spontaneous-emission decay");
  }

  void apply(ScenarioConfig& cfg) const {
    if (!config_path.empty()) parse_config_file(cfg, config_path);
    for (std::size_t i = 0; i < options.size(); ++i)
      if (options[i].second->count() > 0)
        apply_key(cfg, options[i].first, values[i], "command line");
    if (decay_opt->count() > 0)
      apply_key(cfg, "decay", decay_value ? "true" : "false", "command line");
  }
};

}  // namespace detail

/// argv-style entry point (excluding the program name).
inline int run(const std::vector<std::string>& args) {
  CLI::App app{"Gaussian-state simulation of atomic magnetometry"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    Subcommand kind;
    detail::FlagSet flags;
  };
  // deque: growth must not relocate the FlagSets already bound to options
  std::deque<Sub> subs;
  auto add_sub = [&](const char* name, const char* desc, Subcommand kind) {
    subs.push_back({app.add_subcommand(name, desc), kind, {}});
    subs.back().flags.attach(subs.back().app);
  };
  add_sub("derive-params", "print effective couplings kappa^2, mu, eta",
          Subcommand::kDeriveParams);
  add_sub("variance", "deterministic uncertainty curve dB(t)",
          Subcommand::kVariance);
  add_sub("trajectory", "one stochastic estimation run",
          Subcommand::kTrajectory);
  add_sub("ensemble", "Monte Carlo ensemble statistics",
          Subcommand::kEnsemble);
  add_sub("verify", "run the acceptance/oracle suite", Subcommand::kVerify);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (const Sub& sub : subs) {
      if (!sub.app->parsed()) continue;
      ScenarioConfig cfg;
      cfg.subcommand = sub.kind;
      sub.flags.apply(cfg);
      resolve_source(cfg);
      if (sub.kind == Subcommand::kVerify) {
        const auto results = checks::run_acceptance_checks(&std::cout);
        int failures = 0;
        for (const auto& r : results) failures += r.pass ? 0 : 1;
        std::cout << (failures == 0 ? "all checks passed"
                                    : std::to_string(failures) + " check(s) failed")
                  << "\n";
        return failures == 0 ? 0 : 1;
      }
      return run_scenario(cfg, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace magsim::cli

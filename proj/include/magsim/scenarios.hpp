#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include "magsim/config.hpp"
#include "magsim/constants.hpp"
#include "magsim/filter.hpp"
#include "magsim/riccati.hpp"

// Subcommand execution and CSV output. Every CSV starts with a `#` header
// block carrying the artifact version, the fully resolved configuration and
// the physical constants, so a result file is reproducible on its own.

namespace magsim {

namespace csv {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void header(std::ostream& os, const ScenarioConfig& cfg,
                   const char* subcommand) {
  os << "# " << constants::version << "\n";
  os << "# subcommand = " << subcommand << "\n";
  os << "# source = "
     << (cfg.source == ParamSource::kEffective ? "effective" : "physical")
     << "\n";
  if (cfg.source == ParamSource::kPhysical) {
    const PhysicalParams& p = cfg.physical;
    os << "# wavelength = " << num(p.wavelength) << "\n";
    os << "# dipole_moment = " << num(p.dipole_moment) << "\n";
    os << "# decay_width = " << num(p.decay_width) << "\n";
    os << "# detuning = " << num(p.detuning) << "\n";
    os << "# beam_area = " << num(p.beam_area) << "\n";
    os << "# photon_flux = " << num(p.photon_flux) << "\n";
    os << "# atom_number = " << num(p.atom_number) << "\n";
    os << "# beta = " << num(p.magnetic_moment) << "\n";
  }
  const EffectiveCouplings c = cfg.couplings();
  os << "# kappa_sq = " << num(c.kappa_sq()) << "\n";
  os << "# mu = " << num(c.mu) << "\n";
  os << "# eta = " << num(c.eta) << "\n";
  os << "# tau = " << num(cfg.tau) << "\n";
  os << "# t_final = " << num(cfg.t_final) << "\n";
  os << "# r = " << num(cfg.r) << "\n";
  os << "# delta_b0 = " << num(cfg.delta_b0) << "\n";
  os << "# prior_mean = " << num(cfg.prior_mean) << "\n";
  os << "# decay = " << (cfg.decay ? "true" : "false") << "\n";
  if (cfg.sg_time) os << "# sg_time = " << num(*cfg.sg_time) << "\n";
  if (cfg.b_true) os << "# b_true = " << num(*cfg.b_true) << "\n";
  os << "# truth_mode = "
     << (cfg.truth_mode == TruthMode::kGroundTruth ? "ground-truth"
                                                   : "innovation")
     << "\n";
  os << "# n = " << cfg.n_traj << "\n";
  os << "# record_points = " << cfg.record_points << "\n";
  os << "# record_t_min = " << num(cfg.record_t_min) << "\n";
  os << "# seed = " << cfg.seed << "\n";
  os << "# constants: c = " << num(constants::speed_of_light)
     << ", hbar = " << num(constants::hbar)
     << ", eps0 = " << num(constants::vacuum_permittivity)
     << ", bohr_magneton = " << num(constants::bohr_magneton) << "\n";
}

}  // namespace csv

namespace detail {

inline constexpr double kPicotesla = constants::tesla_per_picotesla;

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : std::min(hw, 8u);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  return out;
}

}  // namespace detail

inline void write_variance_csv(std::ostream& os, const ScenarioConfig& cfg) {
  csv::header(os, cfg, "variance");
  const EffectiveCouplings c = cfg.couplings();
  const CovarianceTrack track = propagate_covariance(cfg.filter_config());
  os << "t_s,deltaB_pT,deltaB_analytic_pT,jx_fraction\n";
  for (const auto& p : track.points) {
    const double analytic =
        analytic_variance(cfg.delta_b0, c.kappa, c.mu, cfg.r, p.t);
    os << csv::num(p.t) << ","
       << csv::num(std::sqrt(p.delta_b_sq) / detail::kPicotesla) << ","
       << csv::num(std::sqrt(analytic) / detail::kPicotesla) << ","
       << csv::num(p.jx_fraction) << "\n";
  }
  if (track.sg) {
    // terminal spin measurement: one extra row at sg_time, analytic column
    // holds the closed-form post-measurement value
    const double analytic_sg =
        analytic_sg_variance(cfg.delta_b0, c.kappa, c.mu, track.sg->t);
    os << csv::num(track.sg->t) << ","
       << csv::num(std::sqrt(track.sg->delta_b_sq_after) / detail::kPicotesla)
       << "," << csv::num(std::sqrt(analytic_sg) / detail::kPicotesla) << ","
       << csv::num(track.points.empty() ? 1.0
                                        : track.points.back().jx_fraction)
       << "\n";
  }
}

inline void write_trajectory_csv(std::ostream& os, const ScenarioConfig& cfg) {
  csv::header(os, cfg, "trajectory");
  std::mt19937_64 gen = rng::make_stream(cfg.seed, 0);
  const TrajectoryRecord rec = run_trajectory(cfg.filter_config(), gen);
  const bool truth = rec.b_true.has_value();
  os << "t_s,B_mean_pT,deltaB_pT" << (truth ? ",B_true_pT" : "") << "\n";
  for (const auto& p : rec.points) {
    os << csv::num(p.t) << "," << csv::num(p.b_mean / detail::kPicotesla)
       << "," << csv::num(std::sqrt(p.delta_b_sq) / detail::kPicotesla);
    if (truth) os << "," << csv::num(*rec.b_true / detail::kPicotesla);
    os << "\n";
  }
}

inline void write_ensemble_csv(std::ostream& os, const ScenarioConfig& cfg) {
  csv::header(os, cfg, "ensemble");
  const EnsembleStats stats =
      run_ensemble(cfg.filter_config(), cfg.n_traj,
                   detail::resolve_threads(cfg.threads));
  const double pt2 = detail::kPicotesla * detail::kPicotesla;
  os << "t_s,mse_pT2,var_mean_pT2,deltaB2_pT2,ltv_residual_pT2\n";
  for (const auto& p : stats.points) {
    os << csv::num(p.t) << "," << csv::num(p.mse / pt2) << ","
       << csv::num(p.var_b / pt2) << "," << csv::num(p.delta_b_sq / pt2) << ","
       << csv::num(p.ltv_residual / pt2) << "\n";
  }
}

inline void write_derive_params(std::ostream& os, const ScenarioConfig& cfg) {
  const EffectiveCouplings c = cfg.couplings();
  os << "kappa_sq = " << csv::num(c.kappa_sq()) << " s^-1\n";
  os << "mu = " << csv::num(c.mu * detail::kPicotesla) << " (s pT)^-1\n";
  os << "eta = " << csv::num(c.eta) << " s^-1\n";
}

inline std::string default_output(Subcommand sub) {
  switch (sub) {
    case Subcommand::kVariance: return "variance.csv";
    case Subcommand::kTrajectory: return "trajectory.csv";
    case Subcommand::kEnsemble: return "ensemble.csv";
    default: return "out.csv";
  }
}

/// Execute a resolved scenario (verify is handled by the checks module).
/// Returns a process exit status.
inline int run_scenario(const ScenarioConfig& cfg, std::ostream& console) {
  switch (cfg.subcommand) {
    case Subcommand::kDeriveParams:
      write_derive_params(console, cfg);
      return 0;
    case Subcommand::kVariance: {
      auto out = detail::open_output(
          cfg.out.empty() ? default_output(cfg.subcommand) : cfg.out);
      write_variance_csv(out, cfg);
      return 0;
    }
    case Subcommand::kTrajectory: {
      auto out = detail::open_output(
          cfg.out.empty() ? default_output(cfg.subcommand) : cfg.out);
      write_trajectory_csv(out, cfg);
      return 0;
    }
    case Subcommand::kEnsemble: {
      auto out = detail::open_output(
          cfg.out.empty() ? default_output(cfg.subcommand) : cfg.out);
      write_ensemble_csv(out, cfg);
      return 0;
    }
    default:
      throw std::logic_error("run_scenario: unhandled subcommand");
  }
}

}  // namespace magsim

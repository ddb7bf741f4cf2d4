#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "magsim/gaussian_state.hpp"
#include "magsim/model.hpp"
#include "magsim/rng.hpp"
#include "magsim/timegrid.hpp"

// Discrete-time filter: deterministic covariance track, stochastic mean
// track against drawn innovations or a simulated ground truth, terminal
// spin measurement, and the Monte Carlo ensemble runner.

namespace magsim {

enum class TruthMode { kInnovationDraw, kGroundTruth };

struct FilterConfig {
  EffectiveCouplings couplings;
  double tau = 1e-8;     // s
  double t_final = 1e-2; // s
  bool decay_enabled = true;
  double r = 1.0;
  double prior_width = 1e-12;  // T
  double prior_mean = 0.0;     // T
  std::optional<double> sg_time;  // s; terminal spin measurement
  TruthMode truth_mode = TruthMode::kGroundTruth;
  std::optional<double> b_true;   // T; sampled from the prior when unset
  std::uint64_t seed = 0;
  int record_points = 200;
  double record_t_min = 0.0;      // s; 0 means t_final * 1e-4

  void validate() const {
    if (!(tau > 0.0) || !(tau < t_final))
      throw std::invalid_argument("FilterConfig: need 0 < tau < t_final");
    if (decay_enabled && couplings.eta * tau > kMaxEtaTau)
      throw std::invalid_argument("FilterConfig: eta*tau > 0.01 with decay enabled");
    if (!(r >= 1e-6)) throw std::invalid_argument("FilterConfig: r must be >= 1e-6");
    if (!(prior_width > 0.0))
      throw std::invalid_argument("FilterConfig: prior_width must be > 0");
    if (record_points < 2)
      throw std::invalid_argument("FilterConfig: record_points must be >= 2");
    if (sg_time && (*sg_time < tau || *sg_time > t_final))
      throw std::invalid_argument("FilterConfig: sg_time outside (tau, t_final]");
    if (couplings.kappa < 0.0 || couplings.mu < 0.0 || couplings.eta < 0.0)
      throw std::invalid_argument("FilterConfig: couplings must be >= 0");
  }

  /// Recording grid; the covariance track ends at sg_time when a terminal
  /// spin measurement is requested, trajectories always run to t_final.
  std::vector<long long> make_record_steps(bool honor_sg = true) const {
    const double t_min = record_t_min > 0.0 ? record_t_min : t_final * 1e-4;
    const double t_end = (honor_sg && sg_time) ? *sg_time : t_final;
    return record_steps(tau, t_end, std::min(t_min, t_end), record_points);
  }
};

struct CovariancePoint {
  double t = 0.0;
  double delta_b_sq = 0.0;   // T^2
  double cov_b_pat = 0.0;    // (dB p_at)^2 = gamma(B,p_at)/2, in T
  double x_at_var = 0.0;     // gamma(x_at,x_at)/2
  double p_at_var = 0.0;     // gamma(p_at,p_at)/2
  double jx_fraction = 1.0;
  double b_mean = 0.0;       // T
};

struct SternGerlachResult {
  double t = 0.0;
  double delta_b_sq_before = 0.0;
  double delta_b_sq_after = 0.0;
};

struct CovarianceTrack {
  std::vector<CovariancePoint> points;
  std::optional<SternGerlachResult> sg;
};

struct TrajectoryPoint {
  double t = 0.0;
  double b_mean = 0.0;       // T
  double delta_b_sq = 0.0;   // T^2
  double innovation = 0.0;   // chi at the recorded step
  double jx_fraction = 1.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryPoint> points;
  std::optional<double> b_true;  // T; set in ground-truth mode
};

namespace detail {

inline constexpr Index kXPhoton = 3;
inline const std::vector<Index> kAtomicAndField = {0, 1, 2};

inline void advance_dynamics(GaussianState& s, const StepMatrices& m,
                             bool decay) {
  s = linear_transform(s, m.S);
  if (decay) s = add_noise(s, m.L, m.M, m.noise_prefactor);
}

/// Condition on x_ph with the given outcome, then splice in a fresh probe
/// segment. Returns the innovation.
inline double measure_and_reset(GaussianState& s, double outcome, double r) {
  Conditioned c =
      condition_on_quadrature(s, kAtomicAndField, MeasurementSpec{0}, outcome);
  s = append(c.state, fresh_probe_segment(r));
  return c.innovation;
}

}  // namespace detail

/// Terminal destructive measurement of the atomic spin component that
/// carries the field imprint (p_at). Single-shot: once the variable has
/// been consumed the operation is the identity.
inline GaussianState stern_gerlach_update(const GaussianState& s) {
  const Index ip = s.index_of("p_at");
  if (ip < 0) return s;
  std::vector<Index> retained;
  retained.reserve(static_cast<std::size_t>(s.size()) - 1);
  for (Index i = 0; i < s.size(); ++i)
    if (i != ip) retained.push_back(i);
  // covariance semantics only: outcome at the predicted mean, chi = 0
  return condition_on_quadrature(s, retained, MeasurementSpec{0}, s.mean()(ip))
      .state;
}

/// Deterministic covariance track: per step, transform with S, apply decay
/// noise, condition on x_ph (outcome irrelevant), splice a fresh probe
/// segment and shrink the mean spin. Records dB^2(t) = gamma_BB / 2 on the
/// log grid.
inline CovarianceTrack propagate_covariance(const FilterConfig& cfg) {
  cfg.validate();
  GaussianState state = initial_state(cfg.prior_width, cfg.r, cfg.prior_mean);
  double jx = 1.0;

  const std::vector<long long> record = cfg.make_record_steps();
  const long long n_steps =
      cfg.sg_time ? std::llround(*cfg.sg_time / cfg.tau)
                  : std::llround(cfg.t_final / cfg.tau);

  CovarianceTrack track;
  track.points.reserve(record.size());
  std::size_t next_record = 0;
  for (long long k = 1; k <= n_steps; ++k) {
    const StepMatrices m =
        build_step_matrices(cfg.couplings, cfg.tau, jx, cfg.decay_enabled);
    detail::advance_dynamics(state, m, cfg.decay_enabled);
    detail::measure_and_reset(state, state.mean()(detail::kXPhoton), cfg.r);
    if (cfg.decay_enabled) jx *= 1.0 - cfg.couplings.eta * cfg.tau;

    if (next_record < record.size() && record[next_record] == k) {
      ++next_record;
      CovariancePoint p;
      p.t = static_cast<double>(k) * cfg.tau;
      p.delta_b_sq = 0.5 * state.cov()(0, 0);
      p.cov_b_pat = 0.5 * state.cov()(0, 2);
      p.x_at_var = 0.5 * state.cov()(1, 1);
      p.p_at_var = 0.5 * state.cov()(2, 2);
      p.jx_fraction = jx;
      p.b_mean = state.mean()(0);
      track.points.push_back(p);
    }
  }

  if (cfg.sg_time) {
    SternGerlachResult sg;
    sg.t = static_cast<double>(n_steps) * cfg.tau;
    sg.delta_b_sq_before = 0.5 * state.cov()(0, 0);
    state = stern_gerlach_update(state);
    sg.delta_b_sq_after = 0.5 * state.cov()(0, 0);
    track.sg = sg;
  }
  return track;
}

/// One stochastic run. In innovation-draw mode the innovation is drawn with
/// variance 1/2; in ground-truth mode a degenerate truth state (B variance
/// zero at B_true) is propagated with the same matrices and outcomes are
/// sampled from its x_ph marginal.
inline TrajectoryRecord run_trajectory(const FilterConfig& cfg,
                                       std::mt19937_64& gen) {
  cfg.validate();
  GaussianState filter = initial_state(cfg.prior_width, cfg.r, cfg.prior_mean);
  double jx = 1.0;

  const bool ground = cfg.truth_mode == TruthMode::kGroundTruth;
  TrajectoryRecord rec;
  std::optional<GaussianState> truth;
  if (ground) {
    const double b_true =
        cfg.b_true ? *cfg.b_true
                   : cfg.prior_mean + cfg.prior_width * rng::normal(gen);
    rec.b_true = b_true;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
    mean(0) = b_true;
    Eigen::VectorXd diag(5);
    diag << 0.0, 1.0, 1.0, 1.0 / cfg.r, cfg.r;
    truth.emplace(std::move(mean), Eigen::MatrixXd(diag.asDiagonal()),
                  canonical_labels());
  }

  const std::vector<long long> record = cfg.make_record_steps(false);
  const long long n_steps = std::llround(cfg.t_final / cfg.tau);
  rec.points.reserve(record.size());
  std::size_t next_record = 0;

  for (long long k = 1; k <= n_steps; ++k) {
    const StepMatrices m =
        build_step_matrices(cfg.couplings, cfg.tau, jx, cfg.decay_enabled);
    detail::advance_dynamics(filter, m, cfg.decay_enabled);
    if (ground) detail::advance_dynamics(*truth, m, cfg.decay_enabled);

    const double outcome =
        ground ? sample_outcome(*truth, detail::kXPhoton, gen)
               : filter.mean()(detail::kXPhoton) +
                     std::sqrt(0.5) * rng::normal(gen);
    const double chi = detail::measure_and_reset(filter, outcome, cfg.r);
    if (ground) detail::measure_and_reset(*truth, outcome, cfg.r);
    if (cfg.decay_enabled) jx *= 1.0 - cfg.couplings.eta * cfg.tau;

    if (next_record < record.size() && record[next_record] == k) {
      ++next_record;
      TrajectoryPoint p;
      p.t = static_cast<double>(k) * cfg.tau;
      p.b_mean = filter.mean()(0);
      p.delta_b_sq = 0.5 * filter.cov()(0, 0);
      p.innovation = chi;
      p.jx_fraction = jx;
      rec.points.push_back(p);
    }
  }
  return rec;
}

struct EnsemblePoint {
  double t = 0.0;
  double mean_b = 0.0;        // T
  double var_b = 0.0;         // T^2, across trajectories (unbiased)
  double mse = 0.0;           // T^2, vs truth; NaN in innovation-draw mode
  double delta_b_sq = 0.0;    // T^2, deterministic covariance track
  double ltv_residual = 0.0;  // T^2, dB0^2 - (delta_b_sq + var_b)
};

struct EnsembleStats {
  std::vector<EnsemblePoint> points;
  int n_traj = 0;
};

/// Monte Carlo ensemble: independent trajectories with per-index RNG
/// streams. Results are aggregated in trajectory order, so the outcome is
/// identical for any thread count.
inline EnsembleStats run_ensemble(const FilterConfig& cfg, int n_traj,
                                  unsigned n_threads = 1) {
  cfg.validate();
  if (n_traj < 2) throw std::invalid_argument("run_ensemble: n_traj must be >= 2");

  std::vector<TrajectoryRecord> runs(static_cast<std::size_t>(n_traj));
  auto worker = [&](unsigned first) {
    for (int i = static_cast<int>(first); i < n_traj;
         i += static_cast<int>(std::max(1u, n_threads))) {
      std::mt19937_64 gen =
          rng::make_stream(cfg.seed, static_cast<std::uint64_t>(i));
      runs[static_cast<std::size_t>(i)] = run_trajectory(cfg, gen);
    }
  };
  if (n_threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  FilterConfig track_cfg = cfg;
  track_cfg.sg_time.reset();  // trajectories ignore the terminal measurement
  const CovarianceTrack track = propagate_covariance(track_cfg);
  const std::size_t n_times = track.points.size();
  const bool ground = cfg.truth_mode == TruthMode::kGroundTruth;

  EnsembleStats stats;
  stats.n_traj = n_traj;
  stats.points.resize(n_times);
  for (std::size_t j = 0; j < n_times; ++j) {
    EnsemblePoint& p = stats.points[j];
    p.t = track.points[j].t;
    p.delta_b_sq = track.points[j].delta_b_sq;

    double sum = 0.0;
    for (const auto& run : runs) sum += run.points[j].b_mean;
    p.mean_b = sum / n_traj;

    double ss = 0.0;
    double se = 0.0;
    for (const auto& run : runs) {
      const double d = run.points[j].b_mean - p.mean_b;
      ss += d * d;
      if (ground) {
        const double e = run.points[j].b_mean - *run.b_true;
        se += e * e;
      }
    }
    p.var_b = ss / (n_traj - 1);
    p.mse = ground ? se / n_traj : std::numeric_limits<double>::quiet_NaN();
    p.ltv_residual =
        cfg.prior_width * cfg.prior_width - (p.delta_b_sq + p.var_b);
  }
  return stats;
}

}  // namespace magsim

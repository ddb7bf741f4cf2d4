#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "magsim/model.hpp"

// Continuous-time limit of the filter: the closed 2x2 system for the
// reduced covariance V = [2 (dB)^2, 2 (dB p_at)^2; ., 2 (dp_at)^2] obeys
// dV/dt = -D V - V D^T - V E V, and the B variance has a closed form that
// the integrators are checked against.

namespace magsim {

using ReducedCovariance = Eigen::Matrix2d;

inline Eigen::Matrix2d riccati_drift(double mu) {
  Eigen::Matrix2d d;
  d << 0.0, 0.0, mu, 0.0;
  return d;
}

/// Information-gain rate of the optical readout; squeezing enters as
/// kappa^2 -> r kappa^2.
inline Eigen::Matrix2d riccati_gain(double kappa, double r) {
  Eigen::Matrix2d e = Eigen::Matrix2d::Zero();
  e(1, 1) = r * kappa * kappa;
  return e;
}

inline ReducedCovariance riccati_rhs(const ReducedCovariance& v,
                                     const Eigen::Matrix2d& d,
                                     const Eigen::Matrix2d& e) {
  return -d * v - v * d.transpose() - v * e * v;
}

struct TimedCovariance {
  double t = 0.0;
  ReducedCovariance v = ReducedCovariance::Zero();
};

/// Classical RK4 on the Riccati equation, landing exactly on each requested
/// record time (ascending, in seconds). The step bound dt <= 1e-4 / kappa^2
/// keeps the fastest rate resolved to fourth-order accuracy.
inline std::vector<TimedCovariance> integrate_riccati(
    const ReducedCovariance& v0, const EffectiveCouplings& c, double r,
    const std::vector<double>& record_times, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_riccati: dt must be > 0");
  const double kappa_sq = c.kappa * c.kappa;
  if (kappa_sq > 0.0 && dt > 1e-4 / kappa_sq)
    throw std::invalid_argument("integrate_riccati: dt exceeds 1e-4 / kappa^2");

  const Eigen::Matrix2d d = riccati_drift(c.mu);
  const Eigen::Matrix2d e = riccati_gain(c.kappa, r);
  auto step = [&](ReducedCovariance v, double h) {
    const ReducedCovariance k1 = riccati_rhs(v, d, e);
    const ReducedCovariance k2 = riccati_rhs(v + 0.5 * h * k1, d, e);
    const ReducedCovariance k3 = riccati_rhs(v + 0.5 * h * k2, d, e);
    const ReducedCovariance k4 = riccati_rhs(v + h * k3, d, e);
    v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // keep exact symmetry against drift in the off-diagonal pair
    const double off = 0.5 * (v(0, 1) + v(1, 0));
    v(0, 1) = v(1, 0) = off;
    return v;
  };

  std::vector<TimedCovariance> out;
  out.reserve(record_times.size());
  ReducedCovariance v = v0;
  double t = 0.0;
  for (double target : record_times) {
    if (target < t)
      throw std::invalid_argument("integrate_riccati: record times must ascend");
    const double span = target - t;
    const auto n = static_cast<long long>(std::floor(span / dt));
    for (long long i = 0; i < n; ++i) v = step(v, dt);
    const double rem = span - static_cast<double>(n) * dt;
    if (rem > 1e-9 * dt) v = step(v, rem);
    t = target;

    const double scale = std::max({std::abs(v(0, 0)), std::abs(v(1, 1)), 1e-300});
    if (v(0, 0) < -1e-10 * scale || v(1, 1) < -1e-10 * scale ||
        v(0, 0) * v(1, 1) - v(0, 1) * v(0, 1) < -1e-10 * scale * scale)
      throw std::runtime_error("integrate_riccati: V lost positive semidefiniteness");
    out.push_back({target, v});
  }
  return out;
}

/// Closed-form B variance (noise-free), squeezing folded in as
/// kappa^2 -> r kappa^2:
///   dB(t)^2 = (1 + r k^2 t) dB0^2 /
///             (1 + r k^2 t + 2/3 r k^2 m^2 dB0^2 t^3 + 1/6 r^2 k^4 m^2 dB0^2 t^4)
inline double analytic_variance(double prior_width, double kappa, double mu,
                                double r, double t) {
  const double db0_sq = prior_width * prior_width;
  const double k2 = r * kappa * kappa;
  const double m2 = mu * mu;
  const double den = 1.0 + k2 * t + (2.0 / 3.0) * k2 * m2 * db0_sq * t * t * t +
                     (1.0 / 6.0) * k2 * k2 * m2 * db0_sq * t * t * t * t;
  return (1.0 + k2 * t) * db0_sq / den;
}

/// Long-time asymptote of the closed form, dB(t)^2 ~= 6 / (r kappa^2 mu^2 t^3).
inline double asymptotic_variance(double kappa, double mu, double r, double t) {
  return 6.0 / (r * kappa * kappa * mu * mu * t * t * t);
}

/// B variance after a terminal destructive measurement of the atomic spin
/// at time t (noise-free, coherent probe):
///   dB_SG(t)^2 = dB0^2 / (1 + 2 m^2 dB0^2 t^2 + 2/3 k^2 m^2 dB0^2 t^3)
inline double analytic_sg_variance(double prior_width, double kappa, double mu,
                                   double t) {
  const double db0_sq = prior_width * prior_width;
  const double k2 = kappa * kappa;
  const double m2 = mu * mu;
  return db0_sq / (1.0 + 2.0 * m2 * db0_sq * t * t +
                   (2.0 / 3.0) * k2 * m2 * db0_sq * t * t * t);
}

/// Stochastic mean increment d<B> = sqrt(2) kappa (dB p_at)^2 dW with
/// (dB p_at)^2 = V(1,2)/2 in the doubled convention.
inline double mean_increment_sde(double cov_b_pat, double kappa, double dw) {
  return std::sqrt(2.0) * kappa * cov_b_pat * dw;
}

}  // namespace magsim

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "magsim/constants.hpp"
#include "magsim/gaussian_state.hpp"

// Translation of laboratory parameters into the effective continuous-rate
// couplings of the five-variable model y = (B, x_at, p_at, x_ph, p_ph), and
// construction of the per-step matrices. B is carried in tesla throughout;
// conversion to pT happens only at the output layer.

namespace magsim {

/// Laboratory inputs. Defaults reproduce the canonical cesium D1 probing
/// scenario (852 nm, 2 mm^2 beam, 2e12 atoms, 5e12 photons/s, 1 GHz
/// detuning taken as angular frequency 2*pi*1e9 rad/s).
struct PhysicalParams {
  double wavelength = 852e-9;       // m
  double dipole_moment = 2.61e-29;  // C m
  double decay_width = 3.1e7;       // s^-1 (Gamma)
  double detuning = 2.0 * M_PI * 1e9;  // rad/s
  double beam_area = 2e-6;          // m^2
  double photon_flux = 5e12;        // s^-1
  double atom_number = 2e12;
  double magnetic_moment = constants::bohr_magneton;  // J/T (beta)
  double prior_width = 1e-12;       // T (Delta B_0)
  double squeezing = 1.0;           // r; fresh probe block diag(1/r, r)

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0))
        throw std::invalid_argument(std::string("PhysicalParams: ") + name +
                                    " must be > 0");
    };
    positive(wavelength, "wavelength");
    positive(dipole_moment, "dipole_moment");
    positive(decay_width, "decay_width");
    positive(detuning, "detuning");
    positive(beam_area, "beam_area");
    positive(photon_flux, "photon_flux");
    positive(atom_number, "atom_number");
    positive(magnetic_moment, "magnetic_moment");
    positive(prior_width, "prior_width");
    if (!(squeezing >= 1e-6))
      throw std::invalid_argument("PhysicalParams: squeezing must be >= 1e-6");
  }
};

/// Continuous-rate constants: kappa^2 in s^-1, mu in (s T)^-1, eta in s^-1.
struct EffectiveCouplings {
  double kappa = 0.0;
  double mu = 0.0;
  double eta = 0.0;

  double kappa_sq() const { return kappa * kappa; }
};

/// kappa, mu, eta from laboratory parameters.
///
/// With <J_x> = hbar N_at / 2 and segment photon number Phi*tau, the
/// finite-step coupling kappa_tau = (2 g^2 / Delta) sqrt(N_at Phi / 4) tau
/// is proportional to sqrt(tau) because g^2 tau = omega d^2 / (A c eps0 hbar)
/// is step-independent; kappa = kappa_tau / sqrt(tau) and mu = mu_tau / tau
/// are the continuous rates. eta is the photon scattering rate
/// Phi (sigma/A) (Gamma^2/4)/(Gamma^2/4 + Delta^2), sigma = lambda^2/(2 pi).
inline EffectiveCouplings derive_couplings(const PhysicalParams& p) {
  p.validate();
  using namespace constants;
  const double omega = 2.0 * M_PI * speed_of_light / p.wavelength;
  const double g_sq_tau = omega * p.dipole_moment * p.dipole_moment /
                          (p.beam_area * speed_of_light * vacuum_permittivity * hbar);

  EffectiveCouplings c;
  c.kappa = (2.0 * g_sq_tau / p.detuning) *
            std::sqrt(p.atom_number * p.photon_flux / 4.0);
  c.mu = (p.magnetic_moment / hbar) * std::sqrt(p.atom_number / 2.0);
  const double sigma = p.wavelength * p.wavelength / (2.0 * M_PI);
  const double gamma_sq_4 = 0.25 * p.decay_width * p.decay_width;
  c.eta = p.photon_flux * (sigma / p.beam_area) * gamma_sq_4 /
          (gamma_sq_4 + p.detuning * p.detuning);
  return c;
}

using Matrix5 = Eigen::Matrix<double, 5, 5>;
using Vector5 = Eigen::Matrix<double, 5, 1>;

/// Per-step matrices: the linear map S, decay contraction L, decay noise M
/// (diagonals) and the noise prefactor hbar N_at / <J_x(t)> = 2 / jx_fraction.
struct StepMatrices {
  Matrix5 S = Matrix5::Identity();
  Vector5 L = Vector5::Ones();
  Vector5 M = Vector5::Zero();
  double noise_prefactor = 0.0;
  double tau = 0.0;
};

/// Maximum eta*tau accepted by the small-decay expansion.
inline constexpr double kMaxEtaTau = 0.01;

/// Build S, L, M for one step of length tau at the current remaining mean
/// spin fraction. The coupling shrinkage kappa_tau -> kappa_tau sqrt(1-eta_tau)
/// per step enters through sqrt(jx_fraction).
inline StepMatrices build_step_matrices(const EffectiveCouplings& c, double tau,
                                        double jx_fraction, bool decay_enabled) {
  if (!(tau > 0.0))
    throw std::invalid_argument("build_step_matrices: tau must be > 0");
  if (!(jx_fraction > 0.0 && jx_fraction <= 1.0))
    throw std::invalid_argument("build_step_matrices: jx_fraction must be in (0, 1]");

  StepMatrices m;
  m.tau = tau;
  const double scale = std::sqrt(jx_fraction);
  const double kappa_tau = c.kappa * std::sqrt(tau) * scale;
  const double mu_tau = c.mu * tau * scale;
  m.S(1, 4) = kappa_tau;   // x_at <- x_at + kappa_tau p_ph
  m.S(2, 0) = -mu_tau;     // p_at <- p_at - mu_tau B
  m.S(3, 2) = kappa_tau;   // x_ph <- x_ph + kappa_tau p_at

  if (decay_enabled) {
    const double eta_tau = c.eta * tau;
    if (eta_tau > kMaxEtaTau)
      throw std::invalid_argument(
          "build_step_matrices: eta*tau > 0.01, reduce the time step");
    const double l = std::sqrt(1.0 - eta_tau);
    m.L << 1.0, l, l, 1.0, 1.0;
    m.M << 0.0, eta_tau, eta_tau, 0.0, 0.0;
    m.noise_prefactor = 2.0 / jx_fraction;
  }
  return m;
}

inline const std::vector<std::string>& canonical_labels() {
  static const std::vector<std::string> labels = {"B", "x_at", "p_at", "x_ph",
                                                  "p_ph"};
  return labels;
}

/// Fresh probe segment: zero means, covariance diag(1/r, r) (coherent for
/// r = 1), uncorrelated with everything already present.
inline GaussianState fresh_probe_segment(double r) {
  if (!(r > 0.0))
    throw std::invalid_argument("fresh_probe_segment: r must be > 0");
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0 / r, 0.0, 0.0, r;
  return GaussianState(Eigen::VectorXd::Zero(2), std::move(cov),
                       {"x_ph", "p_ph"});
}

/// Full five-variable initial state: B prior N(prior_mean, prior_width^2),
/// atoms in the polarized ground state, fresh probe segment.
inline GaussianState initial_state(double prior_width, double r,
                                   double prior_mean = 0.0) {
  if (!(prior_width > 0.0))
    throw std::invalid_argument("initial_state: prior_width must be > 0");
  if (!(r > 0.0))
    throw std::invalid_argument("initial_state: r must be > 0");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
  mean(0) = prior_mean;
  Eigen::VectorXd diag(5);
  diag << 2.0 * prior_width * prior_width, 1.0, 1.0, 1.0 / r, r;
  return GaussianState(std::move(mean), diag.asDiagonal(), canonical_labels());
}

}  // namespace magsim

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "magsim/checks.hpp"
#include "magsim/model.hpp"
#include "magsim/riccati.hpp"

using namespace magsim;

namespace {

EffectiveCouplings canonical() { return derive_couplings(PhysicalParams{}); }

std::vector<double> log_times(double lo, double hi, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    t[static_cast<std::size_t>(i)] =
        lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return t;
}

}  // namespace

TEST_CASE("riccati_rhs hand-checked values") {
  const double kappa = 0.3;
  const double mu = 0.7;
  const Eigen::Matrix2d d = riccati_drift(mu);
  const Eigen::Matrix2d e = riccati_gain(kappa, 1.0);

  SECTION("V = 0 is stationary") {
    REQUIRE(riccati_rhs(ReducedCovariance::Zero(), d, e).cwiseAbs().maxCoeff() ==
            0.0);
  }
  SECTION("uncorrelated prior: only the drift and p_at gain act") {
    // V = diag(2 dB0^2, 1) with dB0 = 1:
    //   dV11 = 0, dV12 = -2 mu dB0^2, dV22 = -kappa^2
    ReducedCovariance v;
    v << 2.0, 0.0, 0.0, 1.0;
    const ReducedCovariance dv = riccati_rhs(v, d, e);
    REQUIRE(dv(0, 0) == 0.0);
    REQUIRE(dv(0, 1) == Catch::Approx(-2.0 * mu));
    REQUIRE(dv(1, 0) == Catch::Approx(-2.0 * mu));
    REQUIRE(dv(1, 1) == Catch::Approx(-kappa * kappa));
  }
  SECTION("zero couplings freeze any V") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
      ReducedCovariance v;
      const double a = normal(gen), b = normal(gen), c = normal(gen);
      v << a * a + 0.1, a * b, a * b, b * b + 0.1 + c * c;
      REQUIRE(riccati_rhs(v, riccati_drift(0.0), riccati_gain(0.0, 1.0))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("integrate_riccati tracks the closed form") {
  const EffectiveCouplings c = canonical();
  const double db0 = 1e-12;
  ReducedCovariance v0;
  v0 << 2.0 * db0 * db0, 0.0, 0.0, 1.0;
  const double dt = 1e-4 / c.kappa_sq();
  const auto times = log_times(1e-6, 1e-3, 25);

  for (const double r : {1.0, 3.0}) {
    const auto vs = integrate_riccati(v0, c, r, times, dt);
    for (const auto& tv : vs) {
      const double want = analytic_variance(db0, c.kappa, c.mu, r, tv.t);
      REQUIRE(0.5 * tv.v(0, 0) == Catch::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("integrate_riccati trivial and error cases") {
  const EffectiveCouplings c = canonical();
  const double dt = 1e-4 / c.kappa_sq();

  SECTION("V0 = 0 stays 0") {
    const auto vs =
        integrate_riccati(ReducedCovariance::Zero(), c, 1.0, {1e-5, 1e-4}, dt);
    for (const auto& tv : vs) REQUIRE(tv.v.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("step size above the bound is rejected") {
    REQUIRE_THROWS_AS(integrate_riccati(ReducedCovariance::Identity(), c, 1.0,
                                        {1e-4}, 10.0 * dt),
                      std::invalid_argument);
  }
  SECTION("descending record times are rejected") {
    REQUIRE_THROWS_AS(integrate_riccati(ReducedCovariance::Identity(), c, 1.0,
                                        {1e-4, 1e-5}, dt),
                      std::invalid_argument);
  }
  SECTION("an indefinite V0 trips the PSD guard") {
    ReducedCovariance bad;
    bad << 1.0, 2.0, 2.0, 1.0;
    REQUIRE_THROWS_AS(integrate_riccati(bad, c, 1.0, {0.0}, dt),
                      std::runtime_error);
  }
}

TEST_CASE("halving the Riccati step leaves V(10 ms) unchanged to 1e-8") {
  const EffectiveCouplings c = canonical();
  const double db0 = 1e-12;
  ReducedCovariance v0;
  v0 << 2.0 * db0 * db0, 0.0, 0.0, 1.0;
  const double dt = 1e-4 / c.kappa_sq();
  const auto coarse = integrate_riccati(v0, c, 1.0, {1e-2}, dt);
  const auto fine = integrate_riccati(v0, c, 1.0, {1e-2}, 0.5 * dt);
  REQUIRE(coarse[0].v(0, 0) ==
          Catch::Approx(fine[0].v(0, 0)).epsilon(1e-8));
  REQUIRE(coarse[0].v(1, 1) ==
          Catch::Approx(fine[0].v(1, 1)).epsilon(1e-8));
}

TEST_CASE("analytic variance formulas") {
  const EffectiveCouplings c = canonical();
  const double db0 = 1e-12;

  SECTION("t = 0 returns the prior variance") {
    REQUIRE(analytic_variance(db0, c.kappa, c.mu, 1.0, 0.0) == db0 * db0);
    REQUIRE(analytic_sg_variance(db0, c.kappa, c.mu, 0.0) == db0 * db0);
  }
  SECTION("long-time limit approaches 6/(kappa^2 mu^2 t^3)") {
    const double t = 1e-2;  // kappa^2 t ~ 1.8e4
    const double v = analytic_variance(db0, c.kappa, c.mu, 1.0, t);
    REQUIRE(v == Catch::Approx(asymptotic_variance(c.kappa, c.mu, 1.0, t))
                     .epsilon(0.01));
  }
  SECTION("squeezing improves the long-time variance by 1/r") {
    const double t = 1e-2;
    const double v1 = analytic_variance(db0, c.kappa, c.mu, 1.0, t);
    const double v3 = analytic_variance(db0, c.kappa, c.mu, 3.0, t);
    REQUIRE(v3 / v1 == Catch::Approx(1.0 / 3.0).epsilon(0.02));
  }
  SECTION("terminal spin measurement: free-precession limit at kappa = 0") {
    const double t = 3e-4;
    const double want =
        db0 * db0 / (1.0 + 2.0 * c.mu * c.mu * db0 * db0 * t * t);
    REQUIRE(analytic_sg_variance(db0, 0.0, c.mu, t) == Catch::Approx(want));
  }
  SECTION("terminal spin measurement gains a factor 4 at long times") {
    const double t = 1e-3;  // kappa^2 t ~ 1.8e3
    const double ratio = analytic_sg_variance(db0, c.kappa, c.mu, t) /
                         analytic_variance(db0, c.kappa, c.mu, 1.0, t);
    REQUIRE(ratio == Catch::Approx(0.25).epsilon(0.02));
  }
}

TEST_CASE("mean_increment_sde") {
  REQUIRE(mean_increment_sde(3.7e-15, 1353.0, 0.0) == 0.0);
  const double cov_bp = -2.5e-16;
  const double dw = 0.031;
  REQUIRE(mean_increment_sde(cov_bp, 1353.0, dw) ==
          Catch::Approx(std::sqrt(2.0) * 1353.0 * cov_bp * dw));
}

TEST_CASE("closed-form W/U propagator solves the Riccati equation") {
  // independent route: finite difference of the W/U solution vs the RHS
  const EffectiveCouplings c = canonical();
  const double db0 = 1e-12;
  ReducedCovariance v0;
  v0 << 2.0 * db0 * db0, 0.0, 0.0, 1.0;
  const Eigen::Matrix2d d = riccati_drift(c.mu);
  const Eigen::Matrix2d e = riccati_gain(c.kappa, 1.0);

  for (const double t : {1e-7, 1e-5, 1e-3}) {
    const double h = 1e-3 * t;
    const ReducedCovariance va = checks::riccati_wu_solution(v0, c, 1.0, t - h);
    const ReducedCovariance vb = checks::riccati_wu_solution(v0, c, 1.0, t + h);
    const ReducedCovariance v = checks::riccati_wu_solution(v0, c, 1.0, t);
    const ReducedCovariance lhs = (vb - va) / (2.0 * h);
    const ReducedCovariance rhs = riccati_rhs(v, d, e);
    const double scale = rhs.cwiseAbs().maxCoeff();
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() / scale < 1e-5);
  }
}

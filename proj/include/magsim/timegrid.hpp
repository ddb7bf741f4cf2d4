#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace magsim {

/// Log-spaced recording grid expressed as step indices: n_points times
/// between t_min and t_final, snapped to multiples of tau and deduplicated.
inline std::vector<long long> record_steps(double tau, double t_final,
                                           double t_min, int n_points) {
  if (!(tau > 0.0) || !(t_final > tau))
    throw std::invalid_argument("record_steps: need 0 < tau < t_final");
  if (n_points < 2) throw std::invalid_argument("record_steps: n_points < 2");
  t_min = std::clamp(t_min, tau, t_final);

  const long long last = std::llround(t_final / tau);
  const double log_lo = std::log(t_min);
  const double log_hi = std::log(t_final);
  std::vector<long long> steps;
  steps.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double f = static_cast<double>(i) / (n_points - 1);
    const double t = std::exp(log_lo + f * (log_hi - log_lo));
    long long k = std::llround(t / tau);
    k = std::clamp(k, 1LL, last);
    if (steps.empty() || k > steps.back()) steps.push_back(k);
  }
  return steps;
}

}  // namespace magsim

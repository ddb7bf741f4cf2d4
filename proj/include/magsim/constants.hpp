#pragma once

// Physical constants (CODATA 2018). These are echoed into every CSV header
// so that results can be reproduced against the exact values used.

namespace magsim::constants {

inline constexpr double speed_of_light = 299792458.0;        // m/s (exact)
inline constexpr double planck = 6.62607015e-34;             // J s (exact)
inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double bohr_magneton = 9.2740100783e-24;    // J/T

inline constexpr double tesla_per_picotesla = 1e-12;

inline constexpr const char* version = "magsim 0.1.0";

}  // namespace magsim::constants

#pragma once

namespace spinterface::constants {

// Bohr magneton over Planck constant, GHz per Tesla.
inline constexpr double mu_bohr_ghz_per_tesla = 13.996244936;

// Boltzmann constant over Planck constant, GHz per Kelvin.
inline constexpr double boltzmann_ghz_per_kelvin = 20.836619123;

// Speed of light in nm * GHz (i.e. lambda_nm = c / nu_GHz).
inline constexpr double speed_of_light_nm_ghz = 2.99792458e8;

}  // namespace spinterface::constants

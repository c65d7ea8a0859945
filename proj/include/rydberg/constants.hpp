// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <numbers>

namespace rydberg::constants
{
    // CODATA 2018, SI.
    inline constexpr double pi = std::numbers::pi;
    inline constexpr double two_pi = 2.0 * std::numbers::pi;
    inline constexpr double hbar = 1.054571817e-34;        // J s
    inline constexpr double planck = two_pi * hbar;        // J s
    inline constexpr double boltzmann = 1.380649e-23;      // J/K
    inline constexpr double elementary_charge = 1.602176634e-19; // C
    inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
    inline constexpr double bohr_radius = 5.29177210903e-11; // m
    inline constexpr double speed_of_light = 299792458.0;   // m/s
    inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
    inline constexpr double standard_gravity = 9.80665;      // m/s^2

    // e^2 / (4 pi eps0), J m
    inline constexpr double coulomb_energy_scale =
        elementary_charge * elementary_charge / (4.0 * pi * vacuum_permittivity);
}

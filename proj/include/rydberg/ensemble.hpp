// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "constants.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace rydberg
{
    using Vec3 = Eigen::Vector3d;

    /// Alkali species data. All rates and splittings are angular (rad/s).
    struct AtomicSpecies
    {
        double mass = 1.443e-25;                                  // kg
        double linewidth = constants::two_pi * 6.07e6;            // Gamma, D2 line
        double saturation_intensity = 16.7;                       // W/m^2
        double line_wavelength = 780.0e-9;                        // m
        double ground_hyperfine_splitting = constants::two_pi * 6.8e9;
        double rydberg_decay = 1.0e4;                             // gamma_R, n ~ 50

        static AtomicSpecies rubidium87() { return {}; }

        double line_wavenumber() const { return constants::two_pi / line_wavelength; }
        double line_angular_frequency() const
        {
            return constants::two_pi * constants::speed_of_light / line_wavelength;
        }

        void validate() const
        {
            if (!(mass > 0 && linewidth > 0 && saturation_intensity > 0 && line_wavelength > 0 &&
                  ground_hyperfine_splitting > 0 && rydberg_decay > 0))
                throw std::invalid_argument("AtomicSpecies: all fields must be strictly positive");
        }
    };

    /// Parallel-dipole Rydberg pair interaction with f(n) = f_coefficient * n^6.
    struct RydbergCoupling
    {
        int principal_n = 50;
        double f_coefficient = 0.0;
        // Point the coefficient was fixed from: at n = anchor_n and this
        // separation the pair shift magnitude equals anchor_shift.
        int anchor_n = 50;
        double anchor_separation = 5.0e-6;                     // m
        double anchor_shift = constants::two_pi * 100.0e6;     // rad/s

        double f_of_n() const { return f_coefficient * std::pow(static_cast<double>(principal_n), 6); }

        /// |Delta| * r^3 in rad/s m^3.
        double c3() const
        {
            return f_of_n() * constants::coulomb_energy_scale * constants::bohr_radius *
                   constants::bohr_radius / constants::hbar;
        }

        /// Fixes f_coefficient so that the anchor point is reproduced, then
        /// evaluates the coupling at level n.
        static RydbergCoupling calibrated(int n, int anchor_n = 50, double anchor_separation = 5.0e-6,
                                          double anchor_shift = constants::two_pi * 100.0e6)
        {
            if (n < 1 || anchor_n < 1)
                throw std::invalid_argument("RydbergCoupling: principal quantum number must be >= 1");
            if (!(anchor_separation > 0 && anchor_shift > 0))
                throw std::invalid_argument("RydbergCoupling: calibration anchor must be positive");
            RydbergCoupling c;
            c.principal_n = n;
            c.anchor_n = anchor_n;
            c.anchor_separation = anchor_separation;
            c.anchor_shift = anchor_shift;
            const double r3 = anchor_separation * anchor_separation * anchor_separation;
            const double f_anchor = constants::hbar * anchor_shift * r3 /
                                    (constants::coulomb_energy_scale * constants::bohr_radius *
                                     constants::bohr_radius);
            c.f_coefficient = f_anchor / std::pow(static_cast<double>(anchor_n), 6);
            return c;
        }
    };

    struct AtomCloud
    {
        std::vector<Vec3> positions;
        double diameter = 0.0;
        std::uint64_t master_seed = 0;
        AtomicSpecies species;

        std::size_t size() const { return positions.size(); }
    };

    inline constexpr double minimum_pair_separation = 10.0e-9;
    inline constexpr std::size_t max_sampling_attempts = 1'000'000;

    /// N points i.i.d. uniform in a ball of the given diameter, centred at the
    /// origin, no two closer than 10 nm. Deterministic in the seed.
    inline AtomCloud sample_cloud(std::size_t n, double diameter, std::uint64_t seed,
                                  const AtomicSpecies& species = AtomicSpecies::rubidium87())
    {
        if (n < 1)
            throw std::invalid_argument("sample_cloud: need at least one atom");
        if (!(diameter > 0))
            throw std::invalid_argument("sample_cloud: diameter must be positive");

        AtomCloud cloud;
        cloud.diameter = diameter;
        cloud.master_seed = seed;
        cloud.species = species;
        cloud.positions.reserve(n);

        Rng rng(seed);
        const double radius = 0.5 * diameter;
        const double min_sq = minimum_pair_separation * minimum_pair_separation;
        std::size_t attempts = 0;
        while (cloud.positions.size() < n)
        {
            if (++attempts > max_sampling_attempts)
                throw NumericalError("sample_cloud: rejection sampling exceeded " +
                                     std::to_string(max_sampling_attempts) +
                                     " attempts; diameter too small for " + std::to_string(n) +
                                     " atoms at 10 nm minimum separation");
            const Vec3 p = uniform_in_ball(rng, radius);
            bool ok = true;
            for (const auto& q : cloud.positions)
            {
                if ((p - q).squaredNorm() < min_sq)
                {
                    ok = false;
                    break;
                }
            }
            if (ok)
                cloud.positions.push_back(p);
        }
        return cloud;
    }

    /// Builds a cloud from explicit positions (used for symmetric test geometries).
    inline AtomCloud make_cloud(std::vector<Vec3> positions, const AtomicSpecies& species = AtomicSpecies::rubidium87())
    {
        if (positions.empty())
            throw std::invalid_argument("make_cloud: need at least one atom");
        AtomCloud cloud;
        double r_max = 0.0;
        for (const auto& p : positions)
            r_max = std::max(r_max, p.norm());
        for (std::size_t i = 0; i < positions.size(); ++i)
            for (std::size_t j = i + 1; j < positions.size(); ++j)
                if (positions[i] == positions[j])
                    throw std::invalid_argument("make_cloud: duplicate atom positions");
        cloud.positions = std::move(positions);
        cloud.diameter = 2.0 * r_max;
        cloud.species = species;
        return cloud;
    }

    /// Signed pair shift Delta_jk (rad/s), negative for the parallel-dipole
    /// configuration applied to every pair.
    inline double pair_shift(const RydbergCoupling& coupling, const Vec3& rj, const Vec3& rk)
    {
        const double r = (rj - rk).norm();
        if (!(r > 0))
            throw std::invalid_argument("pair_shift: atoms at identical positions");
        return -coupling.c3() / (r * r * r);
    }

    /// Harmonic mean of |Delta_jk| over all pairs.
    inline double mean_blockade_shift(const AtomCloud& cloud, const RydbergCoupling& coupling)
    {
        const auto n = cloud.size();
        if (n < 2)
            throw std::invalid_argument("mean_blockade_shift: need at least two atoms");
        // sum of 1/|Delta| = sum r^3 / C3
        double sum_r3 = 0.0;
        for (std::size_t j = 0; j < n; ++j)
        {
            for (std::size_t k = j + 1; k < n; ++k)
            {
                const double r = (cloud.positions[j] - cloud.positions[k]).norm();
                if (!(r > 0))
                    throw std::invalid_argument("mean_blockade_shift: atoms at identical positions");
                sum_r3 += r * r * r;
            }
        }
        const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
        return pairs * coupling.c3() / sum_r3;
    }

    /// Smallest |Delta_jk| over all pairs (the weakest blockade pair).
    inline double min_pair_shift(const AtomCloud& cloud, const RydbergCoupling& coupling)
    {
        double r_max = 0.0;
        for (std::size_t j = 0; j < cloud.size(); ++j)
            for (std::size_t k = j + 1; k < cloud.size(); ++k)
                r_max = std::max(r_max, (cloud.positions[j] - cloud.positions[k]).norm());
        if (r_max == 0.0)
            throw std::invalid_argument("min_pair_shift: need two distinct atoms");
        return coupling.c3() / (r_max * r_max * r_max);
    }
}

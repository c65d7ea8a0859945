// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

#include "constants.hpp"

namespace rydberg
{
    using Rng = std::mt19937_64;

    namespace detail
    {
        constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
        {
            x += 0x9e3779b97f4a7c15ULL;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            return x ^ (x >> 31);
        }
    }

    /// Child seed for a (master, index...) tuple. Stable across platforms and
    /// independent of evaluation order, so parallel trials stay reproducible.
    inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept
    {
        std::uint64_t s = detail::splitmix64(master);
        for (auto p : path)
            s = detail::splitmix64(s ^ detail::splitmix64(p + 0x632be59bd9b4e019ULL));
        return s;
    }

    inline Eigen::Vector3d random_unit_vector(Rng& rng)
    {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_real_distribution<double> phi(0.0, constants::two_pi);
        const double cos_t = u(rng);
        const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
        const double p = phi(rng);
        return {sin_t * std::cos(p), sin_t * std::sin(p), cos_t};
    }

    /// Uniform point in a ball of the given radius centred at the origin.
    inline Eigen::Vector3d uniform_in_ball(Rng& rng, double radius)
    {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double r = radius * std::cbrt(u(rng));
        return r * random_unit_vector(rng);
    }
}

// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "constants.hpp"
#include "ensemble.hpp"

namespace rydberg
{
    /// Focused TEM00 beam. `waist` is the 1/e^2 intensity radius at focus.
    struct GaussianBeam
    {
        double power = 0.0;                  // W
        double waist = 1.0e-6;               // m
        double wavelength = 1.0e-6;          // m
        Vec3 axis = Vec3::UnitZ();           // propagation direction (normalized on use)
        Vec3 focus = Vec3::Zero();           // m

        void validate() const
        {
            if (power < 0 || !(waist > 0) || !(wavelength > 0))
                throw std::invalid_argument("GaussianBeam: need power >= 0, waist > 0, wavelength > 0");
            if (!(axis.norm() > 0))
                throw std::invalid_argument("GaussianBeam: axis must be nonzero");
        }

        double rayleigh_range() const { return constants::pi * waist * waist / wavelength; }
        double peak_intensity() const { return 2.0 * power / (constants::pi * waist * waist); }
        double wavenumber() const { return constants::two_pi / wavelength; }
        Vec3 unit_axis() const { return axis.normalized(); }

        /// I(rho, z) = 2P / (pi w(z)^2) exp(-2 rho^2 / w(z)^2).
        double intensity(const Vec3& r) const
        {
            const Vec3 a = unit_axis();
            const Vec3 d = r - focus;
            const double z = d.dot(a);
            const double rho2 = (d - z * a).squaredNorm();
            const double zr = rayleigh_range();
            const double w2 = waist * waist * (1.0 + (z / zr) * (z / zr));
            return 2.0 * power / (constants::pi * w2) * std::exp(-2.0 * rho2 / w2);
        }

        Vec3 intensity_gradient(const Vec3& r) const
        {
            const Vec3 a = unit_axis();
            const Vec3 d = r - focus;
            const double z = d.dot(a);
            const Vec3 rho = d - z * a;
            const double rho2 = rho.squaredNorm();
            const double zr = rayleigh_range();
            const double w2 = waist * waist * (1.0 + (z / zr) * (z / zr));
            const double i = 2.0 * power / (constants::pi * w2) * std::exp(-2.0 * rho2 / w2);
            const double dw2_dz = 2.0 * waist * waist * z / (zr * zr);
            const double di_dz = i * dw2_dz * (2.0 * rho2 / (w2 * w2) - 1.0 / w2);
            return -4.0 * i / w2 * rho + di_dz * a;
        }
    };

    namespace detail
    {
        inline double saturation_denominator(double detuning, const AtomicSpecies& s)
        {
            const double x = 2.0 * detuning / s.linewidth;
            return 1.0 + x * x;
        }
    }

    /// Two-level light shift U = (hbar delta / 2) ln(1 + s / (1 + (2 delta / Gamma)^2)).
    /// Positive (repulsive) for blue detuning.
    inline double dipole_potential(double intensity, double detuning, const AtomicSpecies& species)
    {
        if (detuning == 0.0)
            throw std::invalid_argument("dipole_potential: resonant light (zero detuning) is not supported");
        const double s = intensity / species.saturation_intensity;
        return 0.5 * constants::hbar * detuning *
               std::log1p(s / detail::saturation_denominator(detuning, species));
    }

    /// dU/dI for the light shift above.
    inline double dipole_potential_slope(double intensity, double detuning, const AtomicSpecies& species)
    {
        if (detuning == 0.0)
            throw std::invalid_argument("dipole_potential: resonant light (zero detuning) is not supported");
        const double den = detail::saturation_denominator(detuning, species);
        const double s = intensity / species.saturation_intensity;
        return 0.5 * constants::hbar * detuning / (species.saturation_intensity * den * (1.0 + s / den));
    }

    /// Photon scattering rate R = (Gamma/2) s / (1 + s + (2 delta / Gamma)^2), 1/s.
    inline double scattering_rate(double intensity, double detuning, const AtomicSpecies& species)
    {
        const double s = intensity / species.saturation_intensity;
        const double x = 2.0 * detuning / species.linewidth;
        return 0.5 * species.linewidth * s / (1.0 + s + x * x);
    }

    /// Detuning of light at `wavelength` from the species' line, rad/s (negative = red).
    inline double detuning_from_line(double wavelength, const AtomicSpecies& species)
    {
        return constants::two_pi * constants::speed_of_light * (1.0 / wavelength - 1.0 / species.line_wavelength);
    }

    enum class GroundState
    {
        a,
        b,
    };

    inline const char* to_string(GroundState g) { return g == GroundState::a ? "a" : "b"; }

    /// Field frequency minus the e<-a and e<-b transition frequencies.
    struct StateDetunings
    {
        double detuning_a = 0.0;
        double detuning_b = 0.0;

        /// |a> is the lower ground state: omega_ea = omega_eb + splitting.
        static StateDetunings from_b(double detuning_b, const AtomicSpecies& species)
        {
            return {detuning_b - species.ground_hyperfine_splitting, detuning_b};
        }

        /// Far-detuned light: both ground states see the same detuning.
        static StateDetunings common(double detuning) { return {detuning, detuning}; }

        double of(GroundState g) const { return g == GroundState::a ? detuning_a : detuning_b; }
    };

    struct BeamDrive
    {
        GaussianBeam beam;
        StateDetunings detunings;
    };

    /// Per-state potentials, forces and scattering rates from a list of beams.
    /// Immutable after construction; safe to share between threads.
    class StatePotentialField
    {
    public:
        StatePotentialField(std::vector<BeamDrive> beams, AtomicSpecies species)
            : m_beams(std::move(beams)), m_species(species)
        {
            if (m_beams.empty())
                throw std::invalid_argument("StatePotentialField: need at least one beam");
            for (const auto& b : m_beams)
            {
                b.beam.validate();
                if (b.detunings.detuning_a == 0.0 || b.detunings.detuning_b == 0.0)
                    throw std::invalid_argument("StatePotentialField: zero detuning is not supported");
            }
            m_species.validate();
        }

        const std::vector<BeamDrive>& beams() const { return m_beams; }
        const AtomicSpecies& species() const { return m_species; }

        double potential(GroundState g, const Vec3& r) const
        {
            double u = 0.0;
            for (const auto& b : m_beams)
                u += dipole_potential(b.beam.intensity(r), b.detunings.of(g), m_species);
            return u;
        }

        /// F = -grad U from the analytic beam gradient.
        Vec3 force(GroundState g, const Vec3& r) const
        {
            Vec3 f = Vec3::Zero();
            for (const auto& b : m_beams)
                f -= dipole_potential_slope(b.beam.intensity(r), b.detunings.of(g), m_species) *
                     b.beam.intensity_gradient(r);
            return f;
        }

        Vec3 acceleration(GroundState g, const Vec3& r) const { return force(g, r) / m_species.mass; }

        double scattering_rate(GroundState g, const Vec3& r) const
        {
            double rate = 0.0;
            for (const auto& b : m_beams)
                rate += rydberg::scattering_rate(b.beam.intensity(r), b.detunings.of(g), m_species);
            return rate;
        }

        /// Scattering rate contributed by each beam, same order as beams().
        std::vector<double> scattering_rates(GroundState g, const Vec3& r) const
        {
            std::vector<double> rates;
            rates.reserve(m_beams.size());
            for (const auto& b : m_beams)
                rates.push_back(rydberg::scattering_rate(b.beam.intensity(r), b.detunings.of(g), m_species));
            return rates;
        }

    private:
        std::vector<BeamDrive> m_beams;
        AtomicSpecies m_species;
    };

    inline StatePotentialField state_potentials(std::vector<BeamDrive> beams, const AtomicSpecies& species)
    {
        return StatePotentialField(std::move(beams), species);
    }
}

// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <rydberg/ejection.hpp>
#include <rydberg/optics.hpp>
#include <rydberg/random.hpp>

#include "oracles.hpp"

using namespace rydberg;

namespace
{
    GaussianBeam fort_beam()
    {
        GaussianBeam b;
        b.power = 0.1;
        b.waist = 5e-6;
        b.wavelength = 1.06e-6;
        return b;
    }

    const AtomicSpecies rb = AtomicSpecies::rubidium87();
}

TEST(GaussianBeam, PeakIntensityExample)
{
    EXPECT_NEAR(fort_beam().intensity(Vec3::Zero()) / 2.546e9, 1.0, 1e-3);
}

TEST(GaussianBeam, WaistRadiusIsOneOverESquared)
{
    const auto b = fort_beam();
    EXPECT_NEAR(b.intensity(Vec3(0, 5e-6, 0)) / b.intensity(Vec3::Zero()), std::exp(-2.0), 1e-12);
}

TEST(GaussianBeam, ZeroPowerGivesZeroIntensity)
{
    auto b = fort_beam();
    b.power = 0.0;
    EXPECT_EQ(b.intensity(Vec3(1e-6, 2e-6, 3e-6)), 0.0);
}

TEST(GaussianBeam, TransversePlaneCarriesFullPower)
{
    const auto b = fort_beam();
    for (double z : {0.0, b.rayleigh_range(), -2.5 * b.rayleigh_range()})
    {
        const double w = b.waist * std::sqrt(1.0 + std::pow(z / b.rayleigh_range(), 2));
        const double p = oracle::transverse_power([&](double x, double y) { return b.intensity(Vec3(x, y, z)); },
                                                  4.0 * w, 400);
        EXPECT_NEAR(p / b.power, 1.0, 1e-4) << z;
    }
}

TEST(GaussianBeam, RejectsNonPhysicalParameters)
{
    auto b = fort_beam();
    b.waist = 0.0;
    EXPECT_THROW(b.validate(), std::invalid_argument);
    b = fort_beam();
    b.power = -1.0;
    EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(DipolePotential, SignFollowsDetuning)
{
    const double d = constants::two_pi * 1e9;
    EXPECT_GT(dipole_potential(5e4, d, rb), 0.0);
    EXPECT_LT(dipole_potential(5e4, -d, rb), 0.0);
    EXPECT_EQ(dipole_potential(0.0, d, rb), 0.0);
    EXPECT_THROW(dipole_potential(5e4, 0.0, rb), std::invalid_argument);
}

TEST(DipolePotential, FarDetunedLimit)
{
    // hbar Gamma^2 I / (8 delta I_sat)
    const double d = constants::two_pi * 1e11;
    const double i = 1e3;
    const double ref = constants::hbar * rb.linewidth * rb.linewidth * i / (8.0 * d * rb.saturation_intensity);
    EXPECT_NEAR(dipole_potential(i, d, rb) / ref, 1.0, 1e-6);
    EXPECT_NEAR(dipole_potential(i, -d, rb) / -ref, 1.0, 1e-6);
}

TEST(DipolePotential, EjectBeamPeakOnLowerStateOfUpperPair)
{
    EjectGeometry g;
    const double i0 = 2.0 * g.eject_power / (constants::pi * g.eject_waist * g.eject_waist);
    const double u = dipole_potential(i0, g.eject_detuning_b, rb) / constants::boltzmann;
    EXPECT_NEAR(u / 0.7e-3, 1.0, 0.1);
}

TEST(ScatteringRate, EjectPhotonsOverFortyMicroseconds)
{
    EjectGeometry g;
    const double i0 = 2.0 * g.eject_power / (constants::pi * g.eject_waist * g.eject_waist);
    const auto det = StateDetunings::from_b(g.eject_detuning_b, rb);
    EXPECT_NEAR(scattering_rate(i0, det.detuning_b, rb) * 40e-6 / 21.0, 1.0, 0.3);
    EXPECT_NEAR(scattering_rate(i0, det.detuning_a, rb) * 40e-6 / 0.6, 1.0, 0.3);
}

TEST(ScatteringRate, FallsAsInverseSquareDetuning)
{
    const double i = 1e3;
    const double d1 = constants::two_pi * 10e9, d2 = constants::two_pi * 20e9;
    const double r1 = scattering_rate(i, d1, rb) * d1 * d1;
    const double r2 = scattering_rate(i, d2, rb) * d2 * d2;
    EXPECT_NEAR(r1 / r2, 1.0, 1e-4);
}

TEST(StateDetunings, DifferenceIsHyperfineSplitting)
{
    const auto d = StateDetunings::from_b(constants::two_pi * 1e9, rb);
    EXPECT_NEAR(d.detuning_a - d.detuning_b, -constants::two_pi * 6.8e9, 1e-3);
}

TEST(StatePotentialField, FortAloneIsStateIndependent)
{
    EjectGeometry g;
    g.eject_power = 0.0;
    const auto field = make_eject_field(g, rb);
    for (const Vec3& r : std::vector<Vec3>{Vec3::Zero(), Vec3(1e-6, -2e-6, 0.5e-6), Vec3(4e-6, 0, 10e-6)})
    {
        EXPECT_DOUBLE_EQ(field.potential(GroundState::a, r), field.potential(GroundState::b, r));
        EXPECT_LT(field.potential(GroundState::a, r), 0.0);
    }
}

TEST(StatePotentialField, ForceMatchesFiniteDifference)
{
    const auto field = make_eject_field(EjectGeometry{}, rb);
    Rng rng(5);
    for (int n = 0; n < 100; ++n)
    {
        const Vec3 r = uniform_in_ball(rng, 8e-6);
        for (auto g : {GroundState::a, GroundState::b})
        {
            const Vec3 f = field.force(g, r);
            Vec3 fd;
            const double h = 1e-10;
            for (int i = 0; i < 3; ++i)
            {
                Vec3 e = Vec3::Zero();
                e[i] = h;
                fd[i] = -(field.potential(g, r + e) - field.potential(g, r - e)) / (2.0 * h);
            }
            EXPECT_LE((f - fd).norm(), 1e-6 * f.norm() + 1e-32) << n;
        }
    }
}

TEST(EjectProfile, UpperStateIsPushedAcrossCloud)
{
    EjectGeometry g;
    const auto field = make_eject_field(g, rb);
    const auto rows = scan_fig2(field, Vec3::Zero(), g.push_direction(), -2.5e-6, 2.5e-6, 101);
    for (const auto& r : rows)
        EXPECT_GT(r.accel_b, 0.0) << r.x;
}

TEST(EjectProfile, LowerStateStaysTrappedNearCentre)
{
    EjectGeometry g;
    const auto field = make_eject_field(g, rb);
    const auto rows = scan_fig2(field, Vec3::Zero(), g.push_direction(), -5e-6, 5e-6, 2001);
    auto best = rows.front();
    for (const auto& r : rows)
        if (r.u_a < best.u_a)
            best = r;
    EXPECT_LT(std::abs(best.x), 1e-6);
    EXPECT_LT(best.u_a, 0.0);
}

TEST(EjectProfile, WithoutEjectBeamIsSymmetric)
{
    EjectGeometry g;
    g.eject_power = 0.0;
    const auto field = make_eject_field(g, rb);
    const auto rows = scan_fig2(field, Vec3::Zero(), Vec3::UnitX(), -4e-6, 4e-6, 81);
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        const auto& a = rows[i];
        const auto& b = rows[rows.size() - 1 - i];
        EXPECT_DOUBLE_EQ(a.u_a, a.u_b);
        EXPECT_NEAR(a.u_a, b.u_a, 1e-12 * std::abs(a.u_a));
    }
}

TEST(EjectProfile, FlippingOffsetMirrorsProfile)
{
    EjectGeometry g;
    EjectGeometry flipped = g;
    flipped.eject_offset = -g.eject_offset;
    const auto rows = scan_fig2(make_eject_field(g, rb), Vec3::Zero(), Vec3::UnitX(), -4e-6, 4e-6, 81);
    const auto mirror = scan_fig2(make_eject_field(flipped, rb), Vec3::Zero(), Vec3::UnitX(), -4e-6, 4e-6, 81);
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        const auto& m = mirror[rows.size() - 1 - i];
        EXPECT_NEAR(rows[i].u_b, m.u_b, 1e-12 * std::abs(rows[i].u_b));
        EXPECT_NEAR(rows[i].accel_b, -m.accel_b, 1e-9 * std::abs(rows[i].accel_b) + 1e-9);
    }
}

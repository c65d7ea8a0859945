// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <rydberg/emission.hpp>
#include <rydberg/random.hpp>
#include <rydberg/statistics.hpp>

#include "oracles.hpp"

using namespace rydberg;

namespace
{
    const EmissionGeometry collinear = EmissionGeometry::phase_matched(0.0, 0.78e-6);

    double degrees(double d) { return d * constants::pi / 180.0; }
}

TEST(Pattern, SingleAtomIsFlat)
{
    const auto cloud = sample_cloud(1, 5e-6, 1);
    const auto p = single_photon_pattern(cloud, collinear, AngularGrid::full_sphere(30, 60));
    for (double v : p.values)
        EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Pattern, PeakEqualsAtomNumberWhenPhaseMatched)
{
    for (std::size_t n : {2u, 17u, 50u, 300u})
    {
        const auto cloud = sample_cloud(n, 5e-6, n);
        const auto dir = expected_peak_direction(collinear);
        EXPECT_NEAR(dir.mismatch, 0.0, 1e-6);
        EXPECT_NEAR(single_photon_value(cloud, collinear, dir.direction), static_cast<double>(n), 1e-9 * n);
    }
}

TEST(Pattern, MatchesBruteForceSum)
{
    const auto cloud = sample_cloud(40, 5e-6, 4);
    const auto g = EmissionGeometry::phase_matched(degrees(15), 0.78e-6);
    const auto grid = AngularGrid::around(expected_peak_direction(g).direction, 0.5, 21);
    const auto p = single_photon_pattern(cloud, g, grid, 2);
    for (std::size_t i = 0; i < p.values.size(); ++i)
    {
        const Vec3 q = g.k4() * p.directions[i] - g.matched_wavevector();
        EXPECT_NEAR(p.values[i], oracle::phase_sum(cloud.positions, q), 1e-9);
    }
}

TEST(Pattern, NeverExceedsAtomNumber)
{
    const auto cloud = sample_cloud(60, 5e-6, 9);
    const auto p = single_photon_pattern(cloud, collinear, AngularGrid::full_sphere(60, 120));
    for (double v : p.values)
        EXPECT_LE(v, 60.0 + 1e-9);
}

TEST(Pattern, TranslationInvariant)
{
    const auto cloud = sample_cloud(30, 5e-6, 12);
    auto moved = cloud;
    for (auto& r : moved.positions)
        r += Vec3(2.1e-6, -0.7e-6, 5.3e-6);
    const auto g = EmissionGeometry::phase_matched(degrees(10), 0.78e-6);
    Rng rng(3);
    for (int i = 0; i < 50; ++i)
    {
        const Vec3 d = random_unit_vector(rng);
        EXPECT_NEAR(single_photon_value(cloud, g, d), single_photon_value(moved, g, d), 1e-9);
    }
}

TEST(Pattern, SphereAverageMatchesPairSincIdentity)
{
    // the full-sphere mean is 1 + (1/N) sum_{j != k} cos(K.r_jk) sinc(k4 r_jk)
    const auto cloud = sample_cloud(20, 3e-6, 6);
    const auto p = single_photon_pattern(cloud, collinear, AngularGrid::full_sphere(400, 400));
    const double mean = stats::mean(p.values);
    EXPECT_NEAR(mean, oracle::sphere_average(cloud.positions, collinear.k4(), collinear.matched_wavevector()), 5e-3);
}

TEST(Pattern, SwappingFirstTwoBeamsChangesNothing)
{
    const auto a = EmissionGeometry::from_beams(0.78e-6, Vec3(0, 0, 1), 0.48e-6, Vec3(0.2, 0, 1), 0.78e-6,
                                                Vec3(1, 0, 2), 0.78e-6);
    const auto b = EmissionGeometry::from_beams(0.48e-6, Vec3(0.2, 0, 1), 0.78e-6, Vec3(0, 0, 1), 0.78e-6,
                                                Vec3(1, 0, 2), 0.78e-6);
    const auto cloud = sample_cloud(25, 5e-6, 13);
    Rng rng(1);
    for (int i = 0; i < 20; ++i)
    {
        const Vec3 d = random_unit_vector(rng);
        EXPECT_NEAR(single_photon_value(cloud, a, d), single_photon_value(cloud, b, d), 1e-9);
    }
}

TEST(Pattern, PhaseConjugateGeometryEmitsAgainstThirdBeam)
{
    const Vec3 k3_dir = Vec3(1, 0, 1).normalized();
    const auto g = EmissionGeometry::counter_propagating(Vec3::UnitZ(), 0.48e-6, k3_dir, 0.78e-6);
    const auto peak = expected_peak_direction(g);
    EXPECT_LT((peak.direction + k3_dir).norm(), 1e-12);
    const auto cloud = sample_cloud(200, 5e-6, 21);
    const auto grid = AngularGrid::full_sphere(180, 360);
    const auto p = single_photon_pattern(cloud, g, grid, 2);
    const Vec3 best = p.directions[p.argmax()];
    EXPECT_LT(std::acos(std::clamp(best.dot(-k3_dir), -1.0, 1.0)), degrees(2.0));
}

TEST(Pattern, TiltedGeometryEmitsAtTiltAngle)
{
    for (double tilt : {0.0, 5.0, 20.0, 35.0})
    {
        const auto g = EmissionGeometry::phase_matched(degrees(tilt), 0.78e-6);
        const auto peak = expected_peak_direction(g);
        EXPECT_NEAR(AngularPattern::polar_angle(peak.direction), degrees(tilt), 1e-12);
        const auto cloud = sample_cloud(200, 5e-6, 31);
        const auto p = single_photon_pattern(cloud, g, AngularGrid::around(peak.direction, 0.3, 121));
        const Vec3 best = p.directions[p.argmax()];
        EXPECT_NEAR(AngularPattern::polar_angle(best), degrees(tilt), 0.01) << tilt;
    }
}

TEST(Pattern, ZeroMatchedVectorHasNoDirection)
{
    EmissionGeometry g;
    EXPECT_THROW(expected_peak_direction(g), std::invalid_argument);
}

TEST(DoubleChannel, SuppressedAwayFromSpecialGeometry)
{
    const auto cloud = sample_cloud(50, 5e-6, 8);
    for (double tilt : {5.0, 20.0})
    {
        const auto g = EmissionGeometry::phase_matched(degrees(tilt), 0.78e-6);
        EXPECT_FALSE(double_channel_phase_matched(g));
        const auto peak = expected_peak_direction(g).direction;
        EXPECT_LE(double_excitation_value(cloud, g, peak), 3.0);
    }
    const auto one = sample_cloud(1, 5e-6, 8);
    EXPECT_NEAR(double_excitation_value(one, collinear, Vec3::UnitZ()), 1.0, 1e-12);
}

TEST(DoubleChannel, EngineeredMatchReachesAtomNumber)
{
    // k1 + k2 = k4 z and k3 = k4 z: offset 2(k1 + k2) - k3 = k4 z
    EmissionGeometry g;
    const double k = constants::two_pi / 0.78e-6;
    g.k1 = Vec3(0, 0, 0.5 * k);
    g.k2 = g.k1;
    g.k3 = Vec3(0, 0, k);
    g.lambda4 = 0.78e-6;
    EXPECT_TRUE(double_channel_phase_matched(g));
    const auto cloud = sample_cloud(40, 5e-6, 2);
    EXPECT_NEAR(double_excitation_value(cloud, g, Vec3::UnitZ()), 40.0, 1e-9);
}

TEST(Metrics, PeakToBackgroundNearAtomNumber)
{
    std::vector<double> peak, background;
    for (std::uint64_t s = 0; s < 20; ++s)
    {
        const auto cloud = sample_cloud(50, 5e-6, 300 + s);
        const auto [p, m] = resolved_single_photon_metrics(cloud, collinear, AngularGrid::around(Vec3::UnitZ()));
        EXPECT_GE(m.samples_first, min_points_per_fwhm);
        peak.push_back(m.peak_value);
        background.push_back(background_mean(cloud, collinear, 500, s, m.peak_direction, 3.0 * m.fwhm));
    }
    EXPECT_NEAR(stats::mean(peak) / stats::mean(background) / 50.0, 1.0, 0.2);
}

TEST(Metrics, UnderResolvedGridIsReported)
{
    const auto cloud = sample_cloud(100, 5e-6, 5);
    const auto p = single_photon_pattern(cloud, collinear, AngularGrid::around(Vec3::UnitZ(), 0.8, 21));
    EXPECT_THROW(pattern_metrics(p), NumericalError);
}

TEST(Metrics, DoublingDiameterHalvesWidth)
{
    std::vector<double> small, large;
    for (std::uint64_t s = 0; s < 4; ++s)
    {
        const auto grid = AngularGrid::around(Vec3::UnitZ(), 0.6, 201);
        small.push_back(resolved_single_photon_metrics(sample_cloud(200, 5e-6, s), collinear, grid, 2).second.fwhm);
        large.push_back(resolved_single_photon_metrics(sample_cloud(200, 10e-6, s), collinear, grid, 2).second.fwhm);
    }
    EXPECT_NEAR(stats::mean(large) / stats::mean(small), 0.5, 0.075);
}

TEST(Background, AverageIsNearOneOffPeak)
{
    std::vector<double> b;
    for (std::uint64_t s = 0; s < 40; ++s)
    {
        const auto cloud = sample_cloud(50, 5e-6, 100 + s);
        b.push_back(background_mean(cloud, collinear, 400, s, Vec3::UnitZ(), 0.6));
    }
    EXPECT_LT(std::abs(stats::mean(b) - 1.0), 3.0 * stats::standard_error(b) + 0.02);
}

TEST(Jitter, ZeroSigmaIsIdentity)
{
    const auto cloud = sample_cloud(30, 5e-6, 2);
    const auto grid = AngularGrid::around(Vec3::UnitZ(), 0.5, 41);
    const auto a = single_photon_pattern(cloud, collinear, grid);
    const auto b = jittered_pattern(cloud, collinear, grid, 0.0, 5, 1);
    EXPECT_EQ(a.values, b.values);
}

TEST(Jitter, WavelengthScaleJitterDestroysPeak)
{
    const auto cloud = sample_cloud(50, 5e-6, 2);
    const auto grid = AngularGrid::around(Vec3::UnitZ(), 0.8, 41);
    const auto p = jittered_pattern(cloud, collinear, grid, 0.78e-6, 20, 3);
    const double peak = p.values[p.argmax()];
    EXPECT_LT(peak / stats::mean(p.values), 3.0);
}

TEST(Jitter, SmallJitterFollowsDebyeWallerFactor)
{
    // <|sum|^2>/N at the matched direction: 1 + (N - 1) exp(-k4^2 sigma^2)
    const auto cloud = sample_cloud(50, 5e-6, 4);
    const double sigma = 0.05e-6;
    const auto grid = AngularGrid::around(Vec3::UnitZ(), 0.1, 3);
    const auto p = jittered_pattern(cloud, collinear, grid, sigma, 400, 5);
    const double k = collinear.k4();
    const double expected = 1.0 + 49.0 * std::exp(-k * k * sigma * sigma);
    EXPECT_NEAR(p.at(1, 1) / expected, 1.0, 0.03);
}

TEST(MotionalBlur, Examples)
{
    const auto rb = AtomicSpecies::rubidium87();
    const auto b = motional_blur(30e-6, 50e-9, rb);
    EXPECT_NEAR(b.speed, 0.0536, 1e-3);
    EXPECT_NEAR(b.displacement / 2.68e-9, 1.0, 0.01);
    EXPECT_NEAR(motional_blur(30e-6, 3e-6, rb).fraction_of_wavelength, 0.206, 2e-3);
    EXPECT_NEAR(thermal_speed(30e-6, rb, ThermalSpeed::mean_speed), 0.0855, 1e-3);
    EXPECT_EQ(motional_blur(0.0, 1e-6, rb).displacement, 0.0);
    EXPECT_THROW(motional_blur(30e-6, -1.0, rb), std::invalid_argument);
}

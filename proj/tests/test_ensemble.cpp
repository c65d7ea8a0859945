// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include <rydberg/ensemble.hpp>

#include "oracles.hpp"

using namespace rydberg;

namespace
{
    constexpr double mhz = constants::two_pi * 1e6;
}

TEST(SampleCloud, SinglePointInsideBall)
{
    const auto c = sample_cloud(1, 5e-6, 42);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_LE(c.positions[0].norm(), 2.5e-6);
}

TEST(SampleCloud, FiveHundredAtomsRespectBallAndSeparation)
{
    const auto c = sample_cloud(500, 5e-6, 7);
    ASSERT_EQ(c.size(), 500u);
    double min_sep = 1.0;
    for (std::size_t i = 0; i < c.size(); ++i)
    {
        EXPECT_LE(c.positions[i].norm(), 2.5e-6);
        for (std::size_t j = i + 1; j < c.size(); ++j)
            min_sep = std::min(min_sep, (c.positions[i] - c.positions[j]).norm());
    }
    EXPECT_GE(min_sep, minimum_pair_separation);
}

TEST(SampleCloud, SameSeedIsBitIdentical)
{
    const auto a = sample_cloud(100, 5e-6, 99);
    const auto b = sample_cloud(100, 5e-6, 99);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(a.positions[i], b.positions[i]);
    const auto c = sample_cloud(100, 5e-6, 100);
    EXPECT_NE(a.positions[0], c.positions[0]);
}

TEST(SampleCloud, MeanPositionApproachesCentre)
{
    // each coordinate of a uniform ball point has variance R^2 / 5
    const std::size_t n = 10000;
    const double radius = 2.5e-6;
    const auto c = sample_cloud(n, 2.0 * radius, 3);
    Vec3 mean = Vec3::Zero();
    for (const auto& p : c.positions)
        mean += p;
    mean /= static_cast<double>(n);
    const double sigma = radius / std::sqrt(5.0 * static_cast<double>(n));
    for (int i = 0; i < 3; ++i)
        EXPECT_LT(std::abs(mean[i]), 3.0 * sigma);
}

TEST(SampleCloud, ImpossibleDensityFailsExplicitly)
{
    EXPECT_THROW(sample_cloud(2000, 40e-9, 1), NumericalError);
}

TEST(SampleCloud, RejectsBadArguments)
{
    EXPECT_THROW(sample_cloud(0, 5e-6, 1), std::invalid_argument);
    EXPECT_THROW(sample_cloud(3, 0.0, 1), std::invalid_argument);
    EXPECT_THROW(make_cloud({Vec3(0, 0, 0), Vec3(0, 0, 0)}), std::invalid_argument);
}

TEST(PairShift, CalibrationAnchorGivesOneHundredMegahertz)
{
    const auto c = RydbergCoupling::calibrated(50);
    const double s = pair_shift(c, Vec3::Zero(), Vec3(5e-6, 0, 0));
    EXPECT_LT(s, 0.0);
    EXPECT_NEAR(std::abs(s) / (constants::two_pi * 1e8), 1.0, 1e-10);
}

TEST(PairShift, HalfDistanceIsEightTimesLarger)
{
    const auto c = RydbergCoupling::calibrated(50);
    EXPECT_NEAR(std::abs(pair_shift(c, Vec3::Zero(), Vec3(0, 2.5e-6, 0))) / mhz, 800.0, 1e-8);
}

TEST(PairShift, CalibratedCoefficientMatchesHandValue)
{
    // hbar 2pi 1e8 (5 um)^3 / (e^2/(4 pi eps0) a0^2) evaluated by hand: 1.28e7
    const auto c = RydbergCoupling::calibrated(50);
    EXPECT_NEAR(c.f_of_n() / 1.28e7, 1.0, 0.01);
}

TEST(PairShift, ZeroSeparationThrows)
{
    const auto c = RydbergCoupling::calibrated(50);
    EXPECT_THROW(pair_shift(c, Vec3(1e-6, 0, 0), Vec3(1e-6, 0, 0)), std::invalid_argument);
}

TEST(PairShift, InverseCubeLawIsExact)
{
    const auto c = RydbergCoupling::calibrated(50);
    const double ref = pair_shift(c, Vec3::Zero(), Vec3(1e-6, 0, 0)) * 1e-18;
    for (double r : {0.3e-6, 0.77e-6, 2.0e-6, 4.9e-6, 12.0e-6})
    {
        const double v = pair_shift(c, Vec3::Zero(), Vec3(0, 0, r)) * r * r * r;
        EXPECT_NEAR(v / ref, 1.0, 1e-12);
    }
}

TEST(PairShift, ScalesAsNToTheSixth)
{
    const auto c50 = RydbergCoupling::calibrated(50);
    const double s50 = pair_shift(c50, Vec3::Zero(), Vec3(3e-6, 0, 0));
    for (int n = 30; n <= 80; n += 5)
    {
        const auto c = RydbergCoupling::calibrated(n);
        const double ratio = pair_shift(c, Vec3::Zero(), Vec3(3e-6, 0, 0)) / s50;
        EXPECT_NEAR(ratio / std::pow(n / 50.0, 6), 1.0, 1e-12) << "n = " << n;
    }
}

TEST(MeanBlockadeShift, TwoAtomsGiveThePairShift)
{
    const auto c = RydbergCoupling::calibrated(50);
    const auto cloud = make_cloud({Vec3::Zero(), Vec3(4e-6, 0, 0)});
    EXPECT_DOUBLE_EQ(mean_blockade_shift(cloud, c), std::abs(pair_shift(c, Vec3::Zero(), Vec3(4e-6, 0, 0))));
}

TEST(MeanBlockadeShift, EquilateralTriangleGivesAnyPair)
{
    const auto c = RydbergCoupling::calibrated(50);
    const auto cloud = make_cloud(oracle::equal_distance_geometry(3, 3e-6));
    EXPECT_NEAR(mean_blockade_shift(cloud, c) / std::abs(pair_shift(c, cloud.positions[0], cloud.positions[1])),
                1.0, 1e-12);
}

TEST(MeanBlockadeShift, HarmonicMeanOfHundredTwoHundredFourHundred)
{
    const auto c = RydbergCoupling::calibrated(50);
    // sides giving pair shifts of 100, 200 and 400 MHz
    const double r100 = 5e-6, r200 = 5e-6 / std::cbrt(2.0), r400 = 5e-6 / std::cbrt(4.0);
    const auto cloud = make_cloud(oracle::triangle(r400, r200, r100));
    EXPECT_NEAR(mean_blockade_shift(cloud, c) / mhz, 171.42857142857, 1e-6);
}

TEST(MeanBlockadeShift, LiesBetweenExtremePairShifts)
{
    const auto c = RydbergCoupling::calibrated(50);
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        const auto cloud = sample_cloud(12, 5e-6, seed);
        double lo = 1e300, hi = 0.0;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            for (std::size_t j = i + 1; j < cloud.size(); ++j)
            {
                const double s = std::abs(pair_shift(c, cloud.positions[i], cloud.positions[j]));
                lo = std::min(lo, s);
                hi = std::max(hi, s);
            }
        const double m = mean_blockade_shift(cloud, c);
        EXPECT_GE(m, lo);
        EXPECT_LE(m, hi);
        EXPECT_DOUBLE_EQ(min_pair_shift(cloud, c), lo);
    }
}

TEST(MeanBlockadeShift, NeedsTwoAtoms)
{
    const auto c = RydbergCoupling::calibrated(50);
    EXPECT_THROW(mean_blockade_shift(sample_cloud(1, 5e-6, 1), c), std::invalid_argument);
}

TEST(AtomicSpecies, RubidiumDefaultsAreValid)
{
    const auto s = AtomicSpecies::rubidium87();
    EXPECT_NO_THROW(s.validate());
    EXPECT_DOUBLE_EQ(s.mass, 1.443e-25);
    EXPECT_NEAR(s.linewidth / constants::two_pi, 6.07e6, 1.0);
    AtomicSpecies bad = s;
    bad.saturation_intensity = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "constants.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace rydberg
{
    /// Excitation wavevectors k1, k2 (up to |r>), k3 (down to |e>) and the
    /// emitted wavelength. The emitted photon picks up the phase
    /// (k4 - k1 - k2 + k3) . r_j from atom j.
    struct EmissionGeometry
    {
        Vec3 k1 = Vec3::Zero();
        Vec3 k2 = Vec3::Zero();
        Vec3 k3 = Vec3::Zero();
        double lambda4 = 0.78e-6;
        double tilt = 0.0;               // angle of k3 from the k1 + k2 axis, informational

        double k4() const { return constants::two_pi / lambda4; }

        /// k1 + k2 - k3: the emitted wavevector that cancels every atom phase.
        Vec3 matched_wavevector() const { return k1 + k2 - k3; }

        void validate() const
        {
            if (!(lambda4 > 0))
                throw std::invalid_argument("EmissionGeometry: emitted wavelength must be positive");
        }

        /// Beams given as (wavelength, direction) pairs.
        static EmissionGeometry from_beams(double lambda1, const Vec3& d1, double lambda2, const Vec3& d2,
                                           double lambda3, const Vec3& d3, double lambda4)
        {
            auto wavevector = [](double lambda, const Vec3& d) -> Vec3 {
                if (!(lambda > 0))
                    throw std::invalid_argument("EmissionGeometry: wavelengths must be positive");
                if (!(d.norm() > 0))
                    throw std::invalid_argument("EmissionGeometry: beam directions must be nonzero");
                return constants::two_pi / lambda * d.normalized();
            };
            EmissionGeometry g;
            g.k1 = wavevector(lambda1, d1);
            g.k2 = wavevector(lambda2, d2);
            g.k3 = wavevector(lambda3, d3);
            g.lambda4 = lambda4;
            const Vec3 up = g.k1 + g.k2;
            if (up.norm() > 0 && g.k3.norm() > 0)
                g.tilt = std::acos(std::clamp(up.normalized().dot(g.k3.normalized()), -1.0, 1.0));
            g.validate();
            return g;
        }

        /// k1 = k2 along z, k3 tilted by `tilt` in the x-z plane with lambda3 =
        /// lambda4, and |k1| = |k2| = k4 cos(tilt) so that |k1 + k2 - k3| = k4
        /// exactly. The photon leaves at polar angle `tilt` on the -x side.
        static EmissionGeometry phase_matched(double tilt, double lambda4)
        {
            if (!(lambda4 > 0))
                throw std::invalid_argument("EmissionGeometry: emitted wavelength must be positive");
            if (!(std::abs(tilt) < 0.5 * constants::pi))
                throw std::invalid_argument("EmissionGeometry: tilt must be below 90 degrees");
            EmissionGeometry g;
            const double k = constants::two_pi / lambda4;
            g.k1 = Vec3(0.0, 0.0, k * std::cos(tilt));
            g.k2 = g.k1;
            g.k3 = k * Vec3(std::sin(tilt), 0.0, std::cos(tilt));
            g.lambda4 = lambda4;
            g.tilt = tilt;
            return g;
        }

        /// k2 = -k1; the matched direction is -k3 when |k3| = k4.
        static EmissionGeometry counter_propagating(const Vec3& k1_direction, double lambda1, const Vec3& k3_direction,
                                                    double lambda4)
        {
            return from_beams(lambda1, k1_direction, lambda1, -k1_direction, lambda4, k3_direction, lambda4);
        }
    };

    struct PeakDirection
    {
        Vec3 direction = Vec3::UnitZ();
        double mismatch = 0.0;           // | |k1 + k2 - k3| - k4 |, rad/m
    };

    inline PeakDirection expected_peak_direction(const EmissionGeometry& g)
    {
        const Vec3 k = g.matched_wavevector();
        const double norm = k.norm();
        if (!(norm > 0))
            throw std::invalid_argument("expected_peak_direction: k1 + k2 - k3 is zero, no preferred direction");
        return {k / norm, std::abs(norm - g.k4())};
    }

    /// Direction grid. `tangent_plane` samples a square in the gnomonic
    /// projection about `center`, so every grid row and column is a great
    /// circle. `sphere` covers all directions with cells of equal solid angle
    /// (uniform in cos theta and in azimuth).
    struct AngularGrid
    {
        enum class Kind
        {
            tangent_plane,
            sphere,
        };

        Kind kind = Kind::tangent_plane;
        Vec3 center = Vec3::UnitZ();
        double half_width = 0.8;         // tangent-plane coordinate extent (tan of the edge angle)
        std::size_t points = 201;        // per side
        std::size_t polar_points = 180;
        std::size_t azimuth_points = 360;

        static AngularGrid around(const Vec3& center, double half_width = 0.8, std::size_t points = 201)
        {
            AngularGrid g;
            g.kind = Kind::tangent_plane;
            g.center = center;
            g.half_width = half_width;
            g.points = points;
            g.validate();
            return g;
        }

        static AngularGrid full_sphere(std::size_t polar_points = 180, std::size_t azimuth_points = 360)
        {
            AngularGrid g;
            g.kind = Kind::sphere;
            g.polar_points = polar_points;
            g.azimuth_points = azimuth_points;
            g.validate();
            return g;
        }

        void validate() const
        {
            if (kind == Kind::tangent_plane)
            {
                if (!(center.norm() > 0))
                    throw std::invalid_argument("AngularGrid: center direction must be nonzero");
                if (!(half_width > 0) || points < 3)
                    throw std::invalid_argument("AngularGrid: need half_width > 0 and at least 3 points per side");
            }
            else if (polar_points < 2 || azimuth_points < 3)
                throw std::invalid_argument("AngularGrid: sphere grid needs >= 2 polar and >= 3 azimuth points");
        }

        std::size_t rows() const { return kind == Kind::tangent_plane ? points : polar_points; }
        std::size_t cols() const { return kind == Kind::tangent_plane ? points : azimuth_points; }

        /// Orthonormal tangent basis (e1, e2) at the center.
        std::pair<Vec3, Vec3> tangent_basis() const
        {
            const Vec3 c = center.normalized();
            const Vec3 helper = std::abs(c.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
            const Vec3 e1 = (helper - helper.dot(c) * c).normalized();
            return {e1, c.cross(e1)};
        }

        double tangent_coordinate(std::size_t i) const
        {
            return -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(points - 1);
        }

        Vec3 direction(std::size_t row, std::size_t col) const
        {
            if (kind == Kind::tangent_plane)
            {
                const auto [e1, e2] = tangent_basis();
                const Vec3 d = center.normalized() + tangent_coordinate(col) * e1 + tangent_coordinate(row) * e2;
                return d.normalized();
            }
            const double cos_t =
                1.0 - 2.0 * (static_cast<double>(row) + 0.5) / static_cast<double>(polar_points);
            const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
            const double az = constants::two_pi * static_cast<double>(col) / static_cast<double>(azimuth_points);
            return Vec3(sin_t * std::cos(az), sin_t * std::sin(az), cos_t);
        }
    };

    /// Pattern values P over an AngularGrid, row-major. Normalized so that a
    /// fully phase-matched direction gives N and random phases average to 1.
    struct AngularPattern
    {
        AngularGrid grid;
        std::size_t atoms = 0;
        std::vector<Vec3> directions;
        std::vector<double> values;

        std::size_t rows() const { return grid.rows(); }
        std::size_t cols() const { return grid.cols(); }
        double at(std::size_t row, std::size_t col) const { return values[row * cols() + col]; }

        /// Polar angle from +z and azimuth of a grid direction, rad.
        static double polar_angle(const Vec3& d) { return std::acos(std::clamp(d.z(), -1.0, 1.0)); }
        static double azimuth(const Vec3& d) { return std::atan2(d.y(), d.x()); }

        std::size_t argmax() const
        {
            return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
        }
    };

    namespace detail
    {
        using PositionMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;

        inline PositionMatrix position_matrix(const AtomCloud& cloud)
        {
            PositionMatrix m(3, static_cast<Eigen::Index>(cloud.size()));
            for (std::size_t j = 0; j < cloud.size(); ++j)
                m.col(static_cast<Eigen::Index>(j)) = cloud.positions[j];
            return m;
        }

        /// (1/N) |sum_j exp(i q . r_j)|^2
        inline double phase_sum_intensity(const PositionMatrix& r, const Vec3& q)
        {
            const Eigen::RowVectorXd phase = q.transpose() * r;
            const double re = phase.array().cos().sum();
            const double im = phase.array().sin().sum();
            return (re * re + im * im) / static_cast<double>(r.cols());
        }

        /// (1/N) |sum_j exp(i (k4 d . r'_j - offset . r_j))|^2 with the atoms written
        /// at r and emitting from r'.
        inline double displaced_phase_sum_intensity(const PositionMatrix& written, const Eigen::RowVectorXd& write_phase,
                                                    const PositionMatrix& emitting, const Vec3& k_out)
        {
            const Eigen::RowVectorXd phase = k_out.transpose() * emitting - write_phase;
            const double re = phase.array().cos().sum();
            const double im = phase.array().sin().sum();
            return (re * re + im * im) / static_cast<double>(written.cols());
        }

        inline AngularPattern empty_pattern(std::size_t atoms, const AngularGrid& grid)
        {
            if (atoms < 1)
                throw std::invalid_argument("emission pattern: need at least one atom");
            grid.validate();
            AngularPattern p;
            p.grid = grid;
            p.atoms = atoms;
            p.directions.resize(grid.rows() * grid.cols());
            p.values.resize(grid.rows() * grid.cols());
            return p;
        }

        /// Pattern for q(d) = k4 d - offset.
        inline AngularPattern evaluate_pattern(const AtomCloud& cloud, double k4, const Vec3& offset,
                                               const AngularGrid& grid, std::size_t workers)
        {
            AngularPattern p = empty_pattern(cloud.size(), grid);
            const std::size_t rows = grid.rows(), cols = grid.cols();
            const PositionMatrix r = position_matrix(cloud);
            parallel_for(rows, workers, [&](std::size_t i) {
                for (std::size_t j = 0; j < cols; ++j)
                {
                    const Vec3 d = grid.direction(i, j);
                    p.directions[i * cols + j] = d;
                    p.values[i * cols + j] = phase_sum_intensity(r, k4 * d - offset);
                }
            });
            return p;
        }

        /// Pattern when the write phases come from `written` and the photon is
        /// emitted from `emitting` (same atom order).
        inline AngularPattern evaluate_displaced_pattern(const PositionMatrix& written, const PositionMatrix& emitting,
                                                         double k4, const Vec3& offset, const AngularGrid& grid,
                                                         std::size_t workers)
        {
            AngularPattern p = empty_pattern(static_cast<std::size_t>(written.cols()), grid);
            const std::size_t rows = grid.rows(), cols = grid.cols();
            const Eigen::RowVectorXd write_phase = offset.transpose() * written;
            parallel_for(rows, workers, [&](std::size_t i) {
                for (std::size_t j = 0; j < cols; ++j)
                {
                    const Vec3 d = grid.direction(i, j);
                    p.directions[i * cols + j] = d;
                    p.values[i * cols + j] = displaced_phase_sum_intensity(written, write_phase, emitting, k4 * d);
                }
            });
            return p;
        }
    }

    /// P(k4) = (1/N) |sum_j exp(i (k4 - k1 - k2 + k3) . r_j)|^2 with an
    /// isotropic single-atom factor.
    inline AngularPattern single_photon_pattern(const AtomCloud& cloud, const EmissionGeometry& geometry,
                                                const AngularGrid& grid, std::size_t workers = 1)
    {
        geometry.validate();
        return detail::evaluate_pattern(cloud, geometry.k4(), geometry.matched_wavevector(), grid, workers);
    }

    /// Single-photon pattern value in one direction.
    inline double single_photon_value(const AtomCloud& cloud, const EmissionGeometry& geometry, const Vec3& direction)
    {
        return detail::phase_sum_intensity(detail::position_matrix(cloud),
                                           geometry.k4() * direction.normalized() - geometry.matched_wavevector());
    }

    /// Emission from the doubly excited channel, phase (k4 - 2(k1 + k2) + k3) . r_j.
    inline AngularPattern double_excitation_pattern(const AtomCloud& cloud, const EmissionGeometry& geometry,
                                                    const AngularGrid& grid, std::size_t workers = 1)
    {
        geometry.validate();
        const Vec3 offset = 2.0 * (geometry.k1 + geometry.k2) - geometry.k3;
        return detail::evaluate_pattern(cloud, geometry.k4(), offset, grid, workers);
    }

    inline double double_excitation_value(const AtomCloud& cloud, const EmissionGeometry& geometry,
                                          const Vec3& direction)
    {
        const Vec3 offset = 2.0 * (geometry.k1 + geometry.k2) - geometry.k3;
        return detail::phase_sum_intensity(detail::position_matrix(cloud),
                                           geometry.k4() * direction.normalized() - offset);
    }

    /// True when the doubly excited channel is itself phase matched somewhere,
    /// which defeats its angular suppression.
    inline bool double_channel_phase_matched(const EmissionGeometry& geometry, double relative_tolerance = 1e-9)
    {
        const Vec3 offset = 2.0 * (geometry.k1 + geometry.k2) - geometry.k3;
        return std::abs(offset.norm() - geometry.k4()) <= relative_tolerance * geometry.k4();
    }

    struct PatternMetrics
    {
        Vec3 peak_direction = Vec3::UnitZ();
        double peak_value = 0.0;
        double fwhm_first = 0.0;              // rad, along the grid row through the peak
        double fwhm_second = 0.0;             // rad, along the grid column
        std::size_t samples_first = 0;        // grid points inside the half maximum
        std::size_t samples_second = 0;
        double fwhm = 0.0;                    // mean of the two cuts
        double background = 0.0;              // mean over grid points beyond 3 FWHM from the peak
        std::size_t background_samples = 0;
        double peak_to_background = 0.0;
    };

    inline constexpr std::size_t min_points_per_fwhm = 8;

    namespace detail
    {
        struct CutWidth
        {
            double width = 0.0;
            std::size_t inside = 0;
        };

        // Walks out from the peak along a grid line; half-max crossings are
        // linearly interpolated in the great-circle angle from the peak.
        inline CutWidth cut_width(const AngularPattern& p, std::size_t row, std::size_t col, bool along_row)
        {
            const std::size_t n = along_row ? p.cols() : p.rows();
            const std::size_t i0 = along_row ? col : row;
            auto value = [&](std::size_t i) { return along_row ? p.at(row, i) : p.at(i, col); };
            auto dir = [&](std::size_t i) {
                return along_row ? p.directions[row * p.cols() + i] : p.directions[i * p.cols() + col];
            };
            const Vec3 peak = dir(i0);
            const double half = 0.5 * value(i0);
            auto angle_to_peak = [&](std::size_t i) { return std::acos(std::clamp(dir(i).dot(peak), -1.0, 1.0)); };

            CutWidth out;
            out.inside = 1;
            double total = 0.0;
            for (int sign : {-1, 1})
            {
                std::size_t i = i0;
                bool found = false;
                while (true)
                {
                    if ((sign < 0 && i == 0) || (sign > 0 && i + 1 >= n))
                        break;
                    const std::size_t next = sign < 0 ? i - 1 : i + 1;
                    if (value(next) < half)
                    {
                        const double a0 = angle_to_peak(i), a1 = angle_to_peak(next);
                        const double f = (value(i) - half) / (value(i) - value(next));
                        total += a0 + f * (a1 - a0);
                        found = true;
                        break;
                    }
                    ++out.inside;
                    i = next;
                }
                if (!found)
                    throw NumericalError("pattern_metrics: central lobe reaches the grid edge; widen the grid");
            }
            out.width = total;
            return out;
        }
    }

    /// Peak, FWHM along two orthogonal great-circle cuts and the background
    /// level. Requires at least 8 grid points across the FWHM on each cut.
    inline PatternMetrics pattern_metrics(const AngularPattern& pattern)
    {
        if (pattern.values.empty())
            throw std::invalid_argument("pattern_metrics: empty pattern");
        if (pattern.grid.kind != AngularGrid::Kind::tangent_plane)
            throw std::invalid_argument("pattern_metrics: FWHM cuts need a tangent-plane grid");

        PatternMetrics m;
        const std::size_t idx = pattern.argmax();
        const std::size_t row = idx / pattern.cols(), col = idx % pattern.cols();
        m.peak_direction = pattern.directions[idx];
        m.peak_value = pattern.values[idx];

        const auto first = detail::cut_width(pattern, row, col, true);
        const auto second = detail::cut_width(pattern, row, col, false);
        m.fwhm_first = first.width;
        m.fwhm_second = second.width;
        m.samples_first = first.inside;
        m.samples_second = second.inside;
        if (first.inside < min_points_per_fwhm || second.inside < min_points_per_fwhm)
            throw NumericalError("pattern_metrics: lobe under-resolved (" + std::to_string(first.inside) + " and " +
                                 std::to_string(second.inside) + " points across the FWHM, need " +
                                 std::to_string(min_points_per_fwhm) + "); refine the grid");
        m.fwhm = 0.5 * (m.fwhm_first + m.fwhm_second);

        const double exclusion = 3.0 * m.fwhm;
        double sum = 0.0;
        for (std::size_t i = 0; i < pattern.values.size(); ++i)
        {
            const double ang = std::acos(std::clamp(pattern.directions[i].dot(m.peak_direction), -1.0, 1.0));
            if (ang > exclusion)
            {
                sum += pattern.values[i];
                ++m.background_samples;
            }
        }
        if (m.background_samples > 0)
        {
            m.background = sum / static_cast<double>(m.background_samples);
            m.peak_to_background = m.peak_value / m.background;
        }
        else
        {
            m.background = std::numeric_limits<double>::quiet_NaN();
            m.peak_to_background = std::numeric_limits<double>::quiet_NaN();
        }
        return m;
    }

    /// Evaluates the single-photon pattern about the expected peak, halving
    /// the grid extent until the lobe is resolved or `max_refinements` is hit.
    inline std::pair<AngularPattern, PatternMetrics> resolved_single_photon_metrics(
        const AtomCloud& cloud, const EmissionGeometry& geometry, AngularGrid grid, std::size_t workers = 1,
        int max_refinements = 4)
    {
        for (int attempt = 0;; ++attempt)
        {
            auto pattern = single_photon_pattern(cloud, geometry, grid, workers);
            try
            {
                auto metrics = pattern_metrics(pattern);
                return {std::move(pattern), metrics};
            }
            catch (const NumericalError&)
            {
                if (attempt >= max_refinements)
                    throw;
                grid.half_width *= 0.5;
            }
        }
    }

    /// Mean of the single-photon pattern over random directions at least
    /// `exclusion` rad away from `avoid`.
    inline double background_mean(const AtomCloud& cloud, const EmissionGeometry& geometry, std::size_t samples,
                                   std::uint64_t seed, const Vec3& avoid, double exclusion)
    {
        if (samples == 0)
            throw std::invalid_argument("background_mean: need at least one sample");
        Rng rng(seed);
        const auto r = detail::position_matrix(cloud);
        const Vec3 a = avoid.normalized();
        const double cos_limit = std::cos(exclusion);
        double sum = 0.0;
        for (std::size_t s = 0; s < samples; ++s)
        {
            Vec3 d;
            do
                d = random_unit_vector(rng);
            while (d.dot(a) > cos_limit);
            sum += detail::phase_sum_intensity(r, geometry.k4() * d - geometry.matched_wavevector());
        }
        return sum / static_cast<double>(samples);
    }

    /// Single-photon pattern averaged over random displacements between
    /// preparation and emission: the phases are written at r_j and the photon
    /// leaves from r_j + delta_j, with independent Gaussian delta_j of rms
    /// `sigma` per axis.
    inline AngularPattern jittered_pattern(const AtomCloud& cloud, const EmissionGeometry& geometry,
                                           const AngularGrid& grid, double sigma, std::size_t trials,
                                           std::uint64_t seed, std::size_t workers = 1)
    {
        if (sigma < 0)
            throw std::invalid_argument("jittered_pattern: sigma must be >= 0");
        if (trials == 0)
            throw std::invalid_argument("jittered_pattern: need at least one trial");
        if (sigma == 0)
            return single_photon_pattern(cloud, geometry, grid, workers);
        geometry.validate();
        Rng rng(seed);
        std::normal_distribution<double> gauss(0.0, sigma);
        const auto written = detail::position_matrix(cloud);
        AngularPattern mean;
        for (std::size_t t = 0; t < trials; ++t)
        {
            detail::PositionMatrix emitting = written;
            for (Eigen::Index j = 0; j < emitting.cols(); ++j)
                emitting.col(j) += Vec3(gauss(rng), gauss(rng), gauss(rng));
            auto p = detail::evaluate_displaced_pattern(written, emitting, geometry.k4(),
                                                        geometry.matched_wavevector(), grid, workers);
            if (t == 0)
                mean = std::move(p);
            else
                for (std::size_t i = 0; i < mean.values.size(); ++i)
                    mean.values[i] += p.values[i];
        }
        for (auto& v : mean.values)
            v /= static_cast<double>(trials);
        return mean;
    }

    enum class ThermalSpeed
    {
        axis_rms,     // sqrt(kB T / m), motion projected on one axis
        mean_speed,   // sqrt(8 kB T / (pi m)), Maxwell-Boltzmann mean of |v|
    };

    inline double thermal_speed(double temperature, const AtomicSpecies& species,
                                ThermalSpeed kind = ThermalSpeed::axis_rms)
    {
        if (temperature < 0)
            throw std::invalid_argument("thermal_speed: temperature must be >= 0");
        const double kt_m = constants::boltzmann * temperature / species.mass;
        return kind == ThermalSpeed::axis_rms ? std::sqrt(kt_m) : std::sqrt(8.0 * kt_m / constants::pi);
    }

    struct MotionalBlur
    {
        double displacement = 0.0;       // m
        double fraction_of_wavelength = 0.0;
        double speed = 0.0;              // m/s
    };

    /// Distance moved at the thermal speed during the preparation pulses.
    inline MotionalBlur motional_blur(double temperature, double t_prep, const AtomicSpecies& species,
                                      double lambda4 = 0.78e-6, ThermalSpeed kind = ThermalSpeed::axis_rms)
    {
        if (t_prep < 0)
            throw std::invalid_argument("motional_blur: preparation time must be >= 0");
        if (!(lambda4 > 0))
            throw std::invalid_argument("motional_blur: wavelength must be positive");
        MotionalBlur b;
        b.speed = thermal_speed(temperature, species, kind);
        b.displacement = b.speed * t_prep;
        b.fraction_of_wavelength = b.displacement / lambda4;
        return b;
    }
}

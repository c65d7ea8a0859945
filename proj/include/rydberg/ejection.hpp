// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>

#include "constants.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "optics.hpp"
#include "random.hpp"
#include "statistics.hpp"

namespace rydberg
{
    /// FORT plus state-selective eject beam. Defaults:
    /// 87Rb, 100 mW / 5 um FORT at 1.06 um, 9 uW / 10 um eject beam 3 um to
    /// the left, blue of omega_eb by 1 GHz.
    struct EjectGeometry
    {
        double fort_power = 0.1;
        double fort_waist = 5.0e-6;
        double fort_wavelength = 1.06e-6;
        Vec3 fort_center = Vec3::Zero();

        double eject_power = 9.0e-6;
        double eject_waist = 10.0e-6;
        Vec3 eject_offset = Vec3(-3.0e-6, 0.0, 0.0);   // relative to the FORT centre
        double eject_detuning_b = constants::two_pi * 1.0e9;

        Vec3 beam_axis = Vec3::UnitZ();

        /// FORT light is detuned from the same line for both ground states.
        double fort_detuning(const AtomicSpecies& s) const { return detuning_from_line(fort_wavelength, s); }

        /// Eject wavelength implied by its detuning from omega_eb.
        double eject_wavelength(const AtomicSpecies& s) const
        {
            const double f = s.line_angular_frequency() + eject_detuning_b;
            return constants::two_pi * constants::speed_of_light / f;
        }

        /// Unit vector from the eject beam centre towards the FORT centre.
        Vec3 push_direction() const
        {
            const Vec3 d = -eject_offset;
            return d.norm() > 0 ? Vec3(d.normalized()) : Vec3::UnitX();
        }
    };

    inline StatePotentialField make_eject_field(const EjectGeometry& g, const AtomicSpecies& species)
    {
        GaussianBeam fort;
        fort.power = g.fort_power;
        fort.waist = g.fort_waist;
        fort.wavelength = g.fort_wavelength;
        fort.axis = g.beam_axis;
        fort.focus = g.fort_center;

        GaussianBeam eject;
        eject.power = g.eject_power;
        eject.waist = g.eject_waist;
        eject.wavelength = g.eject_wavelength(species);
        eject.axis = g.beam_axis;
        eject.focus = g.fort_center + g.eject_offset;

        std::vector<BeamDrive> beams;
        beams.push_back({fort, StateDetunings::common(g.fort_detuning(species))});
        if (g.eject_power > 0)
            beams.push_back({eject, StateDetunings::from_b(g.eject_detuning_b, species)});
        return state_potentials(std::move(beams), species);
    }

    /// t1 from (1/2) a t1^2 = w_FORT.
    inline double characteristic_eject_time(double net_acceleration, double fort_waist)
    {
        if (!(net_acceleration > 0))
            throw std::invalid_argument(
                "characteristic_eject_time: net acceleration must be positive (atom is not ejected)");
        if (!(fort_waist > 0))
            throw std::invalid_argument("characteristic_eject_time: waist must be positive");
        return std::sqrt(2.0 * fort_waist / net_acceleration);
    }

    struct InitialCondition
    {
        Vec3 position = Vec3::Zero();
        Vec3 velocity = Vec3::Zero();
    };

    /// Maxwell-Boltzmann velocities at T and positions uniform in the cloud sphere.
    inline std::vector<InitialCondition> sample_thermal_initial(double temperature, const AtomicSpecies& species,
                                                                double cloud_diameter, std::size_t count,
                                                                std::uint64_t seed, const Vec3& center = Vec3::Zero())
    {
        if (temperature < 0)
            throw std::invalid_argument("sample_thermal_initial: temperature must be >= 0");
        if (cloud_diameter < 0)
            throw std::invalid_argument("sample_thermal_initial: diameter must be >= 0");
        Rng rng(seed);
        const double sigma_v = std::sqrt(constants::boltzmann * temperature / species.mass);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<InitialCondition> out(count);
        for (auto& ic : out)
        {
            ic.position = center + uniform_in_ball(rng, 0.5 * cloud_diameter);
            if (sigma_v > 0)
                ic.velocity = sigma_v * Vec3(gauss(rng), gauss(rng), gauss(rng));
        }
        return out;
    }

    struct EjectConfig
    {
        double temperature = 30.0e-6;       // K, for initial-condition sampling
        double duration = 200.0e-6;         // s
        double tolerance = 1e-10;           // local error in um / us units
        bool include_recoil_kicks = false;
        bool gravity = false;               // along -y; beams propagate along z
        bool stop_on_exit = true;

        Vec3 fort_center = Vec3::Zero();
        double fort_waist = 5.0e-6;
        double exit_radius_factor = 3.0;     // exit when |r - centre| > factor * w_FORT
        double region_radius = 100.0e-6;     // field treated as defined inside this radius
        double kick_interval = 0.1e-6;       // recoil kicks are applied at this cadence
        double sample_interval = 1.0e-6;
    };

    struct TrajectoryResult
    {
        std::vector<double> times;
        std::vector<Vec3> positions;
        std::vector<Vec3> velocities;
        std::vector<double> photons;         // cumulative expected scattering count at each sample

        double photons_expected = 0.0;
        std::size_t photons_sampled = 0;     // recoil events applied (kicks enabled)

        bool escaped = false;
        Vec3 exit_direction = Vec3::Zero();
        double exit_time = std::numeric_limits<double>::quiet_NaN();
        Vec3 exit_velocity = Vec3::Zero();

        // First time the displacement from the start reaches w_FORT: the
        // trajectory counterpart of t1.
        double escape_time = std::numeric_limits<double>::quiet_NaN();
        double photons_at_escape = std::numeric_limits<double>::quiet_NaN();

        bool truncated = false;
        Vec3 initial_acceleration = Vec3::Zero();
        double energy_initial = 0.0;
        double energy_final = 0.0;
        double max_energy_drift = 0.0;       // max |E(t) - E(0)| over samples, J

        /// Interpolated cumulative expected photons at time t.
        double photons_at(double t) const
        {
            if (times.empty())
                return 0.0;
            if (t <= times.front())
                return photons.front();
            for (std::size_t i = 1; i < times.size(); ++i)
            {
                if (t <= times[i])
                {
                    const double f = (t - times[i - 1]) / (times[i] - times[i - 1]);
                    return photons[i - 1] + f * (photons[i] - photons[i - 1]);
                }
            }
            return photons.back();
        }
    };

    namespace detail
    {
        // Integration units: um, us, m/s.
        inline constexpr double length_unit = 1.0e-6;
        inline constexpr double time_unit = 1.0e-6;
        using PhaseState = std::array<double, 7>;  // x y z vx vy vz photons

        inline Vec3 gravity_acceleration(bool on)
        {
            return on ? Vec3(0.0, -constants::standard_gravity, 0.0) : Vec3::Zero();
        }

        inline double total_energy(const StatePotentialField& field, GroundState g, const Vec3& r, const Vec3& v,
                                   bool gravity)
        {
            const double m = field.species().mass;
            double e = 0.5 * m * v.squaredNorm() + field.potential(g, r);
            if (gravity)
                e += m * constants::standard_gravity * r.y();
            return e;
        }
    }

    /// m r'' = F_state(r) (+ gravity), with the expected photon count integrated
    /// alongside. With kicks enabled, Poisson-sampled scattering events apply one
    /// absorbed photon impulse along the scattering beam's axis and one
    /// isotropic emission impulse each.
    inline TrajectoryResult simulate_trajectory(const InitialCondition& initial, const StatePotentialField& field,
                                                GroundState state, const EjectConfig& config,
                                                std::uint64_t seed = 0)
    {
        namespace odeint = boost::numeric::odeint;
        using detail::length_unit;
        using detail::PhaseState;
        using detail::time_unit;

        if (!(config.duration > 0))
            throw std::invalid_argument("simulate_trajectory: duration must be positive");
        if (!(config.kick_interval > 0) || !(config.sample_interval > 0))
            throw std::invalid_argument("simulate_trajectory: intervals must be positive");

        const auto& species = field.species();
        const double m = species.mass;
        const double vel_unit = length_unit / time_unit;
        const double acc_unit = length_unit / (time_unit * time_unit);
        const Vec3 g_acc = detail::gravity_acceleration(config.gravity);

        auto rhs = [&](const PhaseState& x, PhaseState& dxdt, double /*t*/) {
            const Vec3 r(x[0] * length_unit, x[1] * length_unit, x[2] * length_unit);
            const Vec3 a = field.force(state, r) / m + g_acc;
            dxdt[0] = x[3];
            dxdt[1] = x[4];
            dxdt[2] = x[5];
            dxdt[3] = a.x() / acc_unit;
            dxdt[4] = a.y() / acc_unit;
            dxdt[5] = a.z() / acc_unit;
            dxdt[6] = field.scattering_rate(state, r) * time_unit;
        };

        PhaseState x{initial.position.x() / length_unit, initial.position.y() / length_unit,
                     initial.position.z() / length_unit, initial.velocity.x() / vel_unit,
                     initial.velocity.y() / vel_unit,    initial.velocity.z() / vel_unit, 0.0};
        auto pos = [&](const PhaseState& s) -> Vec3 { return Vec3(s[0], s[1], s[2]) * length_unit; };
        auto vel = [&](const PhaseState& s) -> Vec3 { return Vec3(s[3], s[4], s[5]) * vel_unit; };

        TrajectoryResult res;
        res.initial_acceleration = field.acceleration(state, initial.position) + g_acc;
        res.energy_initial = detail::total_energy(field, state, initial.position, initial.velocity, config.gravity);
        auto record = [&](double t, const PhaseState& s) {
            res.times.push_back(t);
            res.positions.push_back(pos(s));
            res.velocities.push_back(vel(s));
            res.photons.push_back(s[6]);
            if (!config.include_recoil_kicks)
            {
                const double e = detail::total_energy(field, state, pos(s), vel(s), config.gravity);
                res.max_energy_drift = std::max(res.max_energy_drift, std::abs(e - res.energy_initial));
            }
        };
        record(0.0, x);

        Rng rng(seed);
        auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<PhaseState>>(config.tolerance,
                                                                                     config.tolerance);
        const double chunk = config.kick_interval / time_unit;
        const double t_end = config.duration / time_unit;
        const auto sample_every =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.sample_interval / config.kick_interval)));
        const double exit_radius = config.exit_radius_factor * config.fort_waist;
        const double k_line = species.line_wavenumber();

        double t = 0.0;
        double dt = std::min(chunk, 0.01);
        std::size_t chunk_index = 0;
        while (t < t_end - 1e-12)
        {
            const double t_prev = t;
            const double t_next = std::min(t + chunk, t_end);
            const PhaseState before = x;
            odeint::integrate_adaptive(stepper, rhs, x, t, t_next, dt);
            t = t_next;
            ++chunk_index;

            if (config.include_recoil_kicks)
            {
                const double expected = x[6] - before[6];
                std::poisson_distribution<std::size_t> poisson(std::max(expected, 0.0));
                const std::size_t events = expected > 0 ? poisson(rng) : 0;
                if (events > 0)
                {
                    const auto rates = field.scattering_rates(state, pos(x));
                    std::discrete_distribution<std::size_t> pick(rates.begin(), rates.end());
                    Vec3 dv = Vec3::Zero();
                    for (std::size_t e = 0; e < events; ++e)
                    {
                        const auto& beam = field.beams()[pick(rng)].beam;
                        dv += constants::hbar * beam.wavenumber() / m * beam.unit_axis();
                        dv += constants::hbar * k_line / m * random_unit_vector(rng);
                    }
                    for (int i = 0; i < 3; ++i)
                        x[3 + i] += dv[i] / vel_unit;
                    res.photons_sampled += events;
                }
            }

            const Vec3 r = pos(x);
            const Vec3 v = vel(x);
            if (std::isnan(res.escape_time))
            {
                const double d_before = (pos(before) - initial.position).norm();
                const double d_after = (r - initial.position).norm();
                if (d_after >= config.fort_waist)
                {
                    const double f = d_after > d_before ? (config.fort_waist - d_before) / (d_after - d_before) : 1.0;
                    res.escape_time = (t_prev + f * (t_next - t_prev)) * time_unit;
                    res.photons_at_escape = before[6] + f * (x[6] - before[6]);
                }
            }

            const bool last = t >= t_end - 1e-12;
            const Vec3 rel = r - config.fort_center;
            bool stop = false;
            if (!res.escaped && rel.norm() > exit_radius && rel.dot(v) > 0)
            {
                const double e = detail::total_energy(field, state, r, v, config.gravity);
                if (e > 0)
                {
                    res.escaped = true;
                    res.exit_time = t * time_unit;
                    res.exit_velocity = v;
                    res.exit_direction = v.norm() > 0 ? Vec3(v.normalized()) : Vec3(rel.normalized());
                    stop = config.stop_on_exit;
                }
            }
            if (rel.norm() > config.region_radius)
            {
                res.truncated = true;
                stop = true;
            }
            if (stop || last || chunk_index % sample_every == 0)
                record(t * time_unit, x);
            if (stop)
                break;
        }

        res.photons_expected = x[6];
        res.energy_final = detail::total_energy(field, state, pos(x), vel(x), config.gravity);
        return res;
    }

    struct CollimationStats
    {
        std::size_t trajectories = 0;
        std::size_t escaped = 0;
        double escape_fraction = 0.0;
        Vec3 mean_exit_direction = Vec3::Zero();
        double mean_exit_speed = 0.0;
        double rms_transverse_velocity = 0.0;    // m/s, about the mean exit direction
        double median_escape_time = std::numeric_limits<double>::quiet_NaN();
        double mean_acceleration = 0.0;          // initial acceleration along the exit direction
        double t1 = std::numeric_limits<double>::quiet_NaN();
        double photons_over_t1 = 0.0;            // mean expected scattering count in [0, t1]
        double recoil_impulse = 0.0;             // sqrt(n) hbar k
        double coherent_impulse = 0.0;           // m a t1
        double impulse_ratio = 0.0;
    };

    /// Beam statistics over escaped trajectories. The impulse ratio compares the
    /// rms spontaneous-emission momentum sqrt(n_scat) hbar k with m a t1, where a
    /// is the mean initial acceleration along the exit direction and n_scat the
    /// mean expected scattering count during t1.
    inline CollimationStats collimation_stats(std::span<const TrajectoryResult> trajectories,
                                              const AtomicSpecies& species, double fort_waist)
    {
        CollimationStats st;
        st.trajectories = trajectories.size();
        Vec3 dir_sum = Vec3::Zero();
        std::vector<double> escape_times;
        for (const auto& tr : trajectories)
        {
            if (!tr.escaped)
                continue;
            ++st.escaped;
            dir_sum += tr.exit_direction;
            if (!std::isnan(tr.escape_time))
                escape_times.push_back(tr.escape_time);
        }
        if (st.escaped == 0)
            throw std::invalid_argument("collimation_stats: no escaped trajectories");
        st.escape_fraction = static_cast<double>(st.escaped) / static_cast<double>(st.trajectories);
        st.mean_exit_direction = dir_sum.norm() > 0 ? Vec3(dir_sum.normalized()) : Vec3::Zero();
        st.median_escape_time = stats::median(escape_times);

        double speed = 0.0, transverse_sq = 0.0, acc = 0.0;
        for (const auto& tr : trajectories)
        {
            if (!tr.escaped)
                continue;
            const Vec3& v = tr.exit_velocity;
            speed += v.norm();
            const Vec3 vt = v - v.dot(st.mean_exit_direction) * st.mean_exit_direction;
            transverse_sq += vt.squaredNorm();
            acc += tr.initial_acceleration.dot(st.mean_exit_direction);
        }
        const double ne = static_cast<double>(st.escaped);
        st.mean_exit_speed = speed / ne;
        st.rms_transverse_velocity = std::sqrt(transverse_sq / ne);
        st.mean_acceleration = acc / ne;

        if (st.mean_acceleration > 0)
        {
            st.t1 = characteristic_eject_time(st.mean_acceleration, fort_waist);
            double photons = 0.0;
            for (const auto& tr : trajectories)
                if (tr.escaped)
                    photons += tr.photons_at(st.t1);
            st.photons_over_t1 = photons / ne;
            st.recoil_impulse = std::sqrt(st.photons_over_t1) * constants::hbar * species.line_wavenumber();
            st.coherent_impulse = species.mass * st.mean_acceleration * st.t1;
            st.impulse_ratio = st.recoil_impulse / st.coherent_impulse;
        }
        return st;
    }

    struct ProfileRow
    {
        double x = 0.0;        // m, along the scan direction from the origin
        double u_a = 0.0;      // U_a / k_B, K
        double u_b = 0.0;      // U_b / k_B, K
        double accel_a = 0.0;  // m/s^2 along the scan direction
        double accel_b = 0.0;
    };

    /// Potentials and accelerations along origin + x * direction for x in [x_min, x_max].
    inline std::vector<ProfileRow> scan_fig2(const StatePotentialField& field, const Vec3& origin, const Vec3& direction,
                                             double x_min, double x_max, std::size_t samples)
    {
        if (samples < 2)
            throw std::invalid_argument("scan_fig2: need at least two samples");
        if (!(direction.norm() > 0))
            throw std::invalid_argument("scan_fig2: direction must be nonzero");
        const Vec3 u = direction.normalized();
        std::vector<ProfileRow> rows(samples);
        for (std::size_t i = 0; i < samples; ++i)
        {
            const double x = x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(samples - 1);
            const Vec3 r = origin + x * u;
            auto& row = rows[i];
            row.x = x;
            row.u_a = field.potential(GroundState::a, r) / constants::boltzmann;
            row.u_b = field.potential(GroundState::b, r) / constants::boltzmann;
            row.accel_a = field.acceleration(GroundState::a, r).dot(u);
            row.accel_b = field.acceleration(GroundState::b, r).dot(u);
        }
        return rows;
    }
}

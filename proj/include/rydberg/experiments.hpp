// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------
//
// Config loading and the four experiment drivers behind the command line
// tool. Each driver writes plain CSV / JSON files; every file carries a
// provenance block with the resolved config, the library version and the
// master seed, and no wall-clock data, so identical inputs give identical
// bytes.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "blockade.hpp"
#include "config.hpp"
#include "ejection.hpp"
#include "emission.hpp"
#include "ensemble.hpp"
#include "optics.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "statistics.hpp"

#ifndef RYDBERG_VERSION
#define RYDBERG_VERSION "0.0.0"
#endif

namespace rydberg
{
    inline constexpr const char* version = RYDBERG_VERSION;
    inline constexpr int output_schema_version = 1;

    struct RunOptions
    {
        std::filesystem::path out_dir = ".";
        std::optional<std::uint64_t> seed;   // overrides the config's seed
        unsigned workers = 0;                // 0: one per hardware thread
        bool strict = true;
    };

    namespace io
    {
        using json = config::json;

        inline json provenance(const std::string& command, std::uint64_t seed, const json& resolved)
        {
            json p = json::object();
            p["artifact"] = "rydberg-sources";
            p["version"] = version;
            p["schema"] = output_schema_version;
            p["command"] = command;
            p["master_seed"] = seed;
            p["config"] = resolved;
            return p;
        }

        inline void write_file(const std::filesystem::path& path, const std::string& content)
        {
            if (path.has_parent_path())
                std::filesystem::create_directories(path.parent_path());
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
                throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
            out << content;
            if (!out)
                throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
        }

        inline void write_json(const std::filesystem::path& path, const json& provenance, json body)
        {
            json doc = json::object();
            doc["provenance"] = provenance;
            for (auto it = body.begin(); it != body.end(); ++it)
                doc[it.key()] = it.value();
            write_file(path, doc.dump(2) + "\n");
        }

        /// CSV with a leading "# provenance: {...}" comment line.
        class CsvWriter
        {
        public:
            CsvWriter(const json& provenance, const std::vector<std::string>& columns)
            {
                m_text = "# provenance: " + provenance.dump() + "\n";
                m_text += fmt::format("{}\n", fmt::join(columns, ","));
            }

            template <class... Ts>
            void row(const Ts&... values)
            {
                std::string line;
                bool first = true;
                ((line += (first ? "" : ","), line += cell(values), first = false), ...);
                m_text += line;
                m_text += '\n';
            }

            const std::string& text() const { return m_text; }

        private:
            static std::string cell(double v)
            {
                if (std::isnan(v))
                    return "";
                return fmt::format("{:.12g}", v);
            }
            static std::string cell(std::size_t v) { return std::to_string(v); }
            static std::string cell(int v) { return std::to_string(v); }
            static std::string cell(const std::string& v) { return v; }
            static std::string cell(const char* v) { return v; }

            std::string m_text;
        };

        inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

        inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
    }

    // ------------------------------------------------------------------
    // fig1: blockade leakage versus atom number
    // ------------------------------------------------------------------

    struct Fig1Config
    {
        std::uint64_t seed = 1;
        AtomicSpecies species;
        RydbergCoupling coupling = RydbergCoupling::calibrated(50);
        double diameter = 5.0e-6;
        std::vector<std::size_t> atoms;
        std::size_t trials = 20;
        double rabi = constants::two_pi * 1e6;
        bool integrator = true;
        std::size_t integrator_cap = 12;
        double tolerance = 1e-10;
        std::size_t fit_min = 10;
        std::size_t fit_max = 100;
        std::size_t reference_atoms = 500;
        double reference_level = 3e-5;
        config::json resolved;
    };

    inline std::vector<std::size_t> default_fig1_atoms()
    {
        std::vector<std::size_t> n{1, 2, 3, 4, 6, 8, 10, 12};
        for (std::size_t v = 20; v <= 100; v += 10)
            n.push_back(v);
        for (std::size_t v = 150; v <= 500; v += 50)
            n.push_back(v);
        return n;
    }

    inline Fig1Config load_fig1(config::Document& doc, const RunOptions& opt)
    {
        using config::Dimension;
        auto root = config::Section::root(doc);
        Fig1Config c;
        c.seed = root.integer("seed", 1);
        if (opt.seed)
            c.seed = *opt.seed;
        c.species = config::read_species(root.section("species"));
        c.coupling = config::read_coupling(root.section("coupling"));

        auto cloud = root.section("cloud");
        c.diameter = cloud.positive_quantity("diameter", Dimension::length, 5.0e-6);
        c.atoms = cloud.integer_list("atoms", default_fig1_atoms(), 1);
        c.trials = cloud.integer("trials", 20, 1);
        cloud.finish();

        auto pulse = root.section("pulse");
        c.rabi = pulse.positive_quantity("rabi", Dimension::angular_frequency, constants::two_pi * 1e6);
        pulse.finish();

        auto integ = root.section("integrator");
        c.integrator = integ.boolean("enabled", true);
        c.integrator_cap = integ.integer("max_atoms", 12, 1);
        c.tolerance = integ.number("tolerance", 1e-10);
        if (!(c.tolerance > 0))
            throw integ.error("tolerance", "must be positive");
        integ.finish();

        auto fit = root.section("fit");
        c.fit_min = fit.integer("min_atoms", 10, 1);
        c.fit_max = fit.integer("max_atoms", 100, 1);
        if (c.fit_max < c.fit_min)
            throw fit.error("max_atoms", "must be >= min_atoms");
        fit.finish();

        auto ref = root.section("reference");
        c.reference_atoms = ref.integer("atoms", 500, 1);
        c.reference_level = ref.number("level", 3e-5);
        ref.finish();

        root.finish();
        doc.resolved["seed"] = c.seed;
        c.resolved = doc.resolved;
        return c;
    }

    struct Fig1Result
    {
        std::vector<ScanRow> rows;
        stats::LinearFit fit;
        std::size_t fit_points = 0;
        config::json summary;
    };

    inline Fig1Result run_fig1(const Fig1Config& c, const RunOptions& opt)
    {
        ScanParams p;
        p.diameter = c.diameter;
        p.coupling = c.coupling;
        p.rabi = c.rabi;
        p.master_seed = c.seed;
        p.full_integrator = c.integrator;
        p.integrator_cap = c.integrator_cap;
        p.evolve.tolerance = c.tolerance;
        p.workers = opt.workers;
        p.species = c.species;

        Fig1Result res;
        res.rows = fig1_scan(c.atoms, c.trials, p);
        const auto prov = io::provenance("fig1", c.seed, c.resolved);

        io::CsvWriter csv(prov, {"N", "P_zero_mean", "P_zero_stderr", "P_double_mean", "P_double_stderr",
                                 "Delta_bar_mean_rad_s", "P_zero_full_mean", "P_zero_full_stderr",
                                 "P_double_full_mean", "P_double_full_stderr"});
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const auto& r : res.rows)
            csv.row(r.atoms, r.p_zero_mean, r.p_zero_stderr, r.p_double_mean, r.p_double_stderr, r.delta_bar_mean,
                    r.has_full ? r.p_zero_full_mean : nan, r.has_full ? r.p_zero_full_stderr : nan,
                    r.has_full ? r.p_double_full_mean : nan, r.has_full ? r.p_double_full_stderr : nan);
        io::write_file(opt.out_dir / "fig1.csv", csv.text());

        std::vector<double> xs, ys, shifts;
        for (const auto& r : res.rows)
        {
            if (r.atoms >= c.fit_min && r.atoms <= c.fit_max)
            {
                xs.push_back(static_cast<double>(r.atoms));
                ys.push_back(r.p_zero_mean + r.p_double_mean);
            }
            if (r.atoms >= 2)
                shifts.push_back(r.delta_bar_mean);
        }
        using json = config::json;
        json body = json::object();
        json fit = json::object();
        fit["min_atoms"] = c.fit_min;
        fit["max_atoms"] = c.fit_max;
        fit["points"] = xs.size();
        res.fit_points = xs.size();
        if (xs.size() >= 2)
        {
            res.fit = stats::linear_fit(xs, ys);
            fit["slope_per_atom"] = res.fit.slope;
            fit["intercept"] = res.fit.intercept;
            fit["r_squared"] = io::number_or_null(res.fit.r_squared);
        }
        body["linear_fit_p_zero_plus_p_double"] = fit;

        json db = json::object();
        if (!shifts.empty())
        {
            db["mean_rad_s"] = stats::mean(shifts);
            db["min_rad_s"] = *std::min_element(shifts.begin(), shifts.end());
            db["max_rad_s"] = *std::max_element(shifts.begin(), shifts.end());
            db["mean_MHz"] = stats::mean(shifts) / constants::two_pi / 1e6;
        }
        body["delta_bar"] = db;

        json cmp = json::array();
        for (const auto& r : res.rows)
        {
            if (!r.has_full)
                continue;
            json e = json::object();
            e["N"] = r.atoms;
            e["p_zero_closed_form"] = r.p_zero_mean;
            e["p_zero_integrator"] = r.p_zero_full_mean;
            e["p_double_closed_form"] = r.p_double_mean;
            e["p_double_integrator"] = r.p_double_full_mean;
            e["p_double_ratio_integrator_over_estimate"] =
                r.p_double_mean > 0 ? io::number_or_null(r.p_double_full_mean / r.p_double_mean) : json(nullptr);
            cmp.push_back(e);
        }
        body["closed_form_vs_integrator"] = cmp;

        // The quoted reference level is reported next to what the formulas give.
        json disc = json::object();
        disc["atoms"] = c.reference_atoms;
        disc["reference_level"] = c.reference_level;
        const auto it = std::find_if(res.rows.begin(), res.rows.end(),
                                     [&](const ScanRow& r) { return r.atoms == c.reference_atoms; });
        if (it != res.rows.end())
        {
            const double v = it->p_zero_mean + it->p_double_mean;
            disc["p_zero_plus_p_double"] = v;
            disc["ratio_to_reference"] = v / c.reference_level;
            disc["below_reference"] = v < c.reference_level;
            disc["spontaneous_correction"] =
                it->atoms >= 2 ? spontaneous_correction(it->atoms, c.species.rydberg_decay, it->delta_bar_mean) : 0.0;
        }
        else
        {
            disc["p_zero_plus_p_double"] = nullptr;
            disc["note"] = "reference atom number not in the scan";
        }
        body["reference_level_comparison"] = disc;
        res.summary = body;
        io::write_json(opt.out_dir / "fig1_summary.json", prov, body);
        return res;
    }

    // ------------------------------------------------------------------
    // eject: state-selective ejection from the dipole trap
    // ------------------------------------------------------------------

    struct EjectRunConfig
    {
        std::uint64_t seed = 1;
        AtomicSpecies species;
        EjectGeometry geometry;
        EjectConfig sim;
        std::size_t trajectories = 100;
        double cloud_diameter = 5.0e-6;
        double profile_min = -10.0e-6;
        double profile_max = 20.0e-6;
        std::size_t profile_samples = 301;
        config::json resolved;
    };

    inline EjectRunConfig load_eject(config::Document& doc, const RunOptions& opt)
    {
        using config::Dimension;
        auto root = config::Section::root(doc);
        EjectRunConfig c;
        c.seed = root.integer("seed", 1);
        if (opt.seed)
            c.seed = *opt.seed;
        c.species = config::read_species(root.section("species"));

        const EjectGeometry d;
        auto g = root.section("geometry");
        c.geometry.fort_power = g.nonnegative_quantity("fort_power", Dimension::power, d.fort_power);
        c.geometry.fort_waist = g.positive_quantity("fort_waist", Dimension::length, d.fort_waist);
        c.geometry.fort_wavelength = g.positive_quantity("fort_wavelength", Dimension::length, d.fort_wavelength);
        c.geometry.eject_power = g.nonnegative_quantity("eject_power", Dimension::power, d.eject_power);
        c.geometry.eject_waist = g.positive_quantity("eject_waist", Dimension::length, d.eject_waist);
        c.geometry.eject_offset = g.vector("eject_offset", Dimension::length, d.eject_offset);
        c.geometry.eject_detuning_b = g.quantity("eject_detuning_b", Dimension::angular_frequency, d.eject_detuning_b);
        if (c.geometry.eject_detuning_b == 0.0)
            throw g.error("eject_detuning_b", "resonant eject light is not supported");
        c.geometry.beam_axis = g.direction("beam_axis", d.beam_axis);
        g.finish();

        const EjectConfig s;
        auto sim = root.section("simulation");
        c.sim.temperature = sim.nonnegative_quantity("temperature", Dimension::temperature, s.temperature);
        c.sim.duration = sim.positive_quantity("duration", Dimension::time, s.duration);
        c.sim.tolerance = sim.number("tolerance", s.tolerance);
        if (!(c.sim.tolerance > 0))
            throw sim.error("tolerance", "must be positive");
        c.sim.include_recoil_kicks = sim.boolean("recoil_kicks", true);
        c.sim.gravity = sim.boolean("gravity", false);
        c.sim.kick_interval = sim.positive_quantity("kick_interval", Dimension::time, s.kick_interval);
        c.sim.sample_interval = sim.positive_quantity("sample_interval", Dimension::time, 2.0e-6);
        c.sim.exit_radius_factor = sim.number("exit_radius_factor", s.exit_radius_factor);
        if (!(c.sim.exit_radius_factor > 0))
            throw sim.error("exit_radius_factor", "must be positive");
        c.sim.region_radius = sim.positive_quantity("region_radius", Dimension::length, s.region_radius);
        c.trajectories = sim.integer("trajectories", 100, 1);
        c.cloud_diameter = sim.nonnegative_quantity("cloud_diameter", Dimension::length, 5.0e-6);
        sim.finish();
        c.sim.fort_center = c.geometry.fort_center;
        c.sim.fort_waist = c.geometry.fort_waist;

        auto prof = root.section("profile");
        c.profile_min = prof.quantity("x_min", Dimension::length, -10.0e-6);
        c.profile_max = prof.quantity("x_max", Dimension::length, 20.0e-6);
        c.profile_samples = prof.integer("samples", 301, 2);
        if (!(c.profile_max > c.profile_min))
            throw prof.error("x_max", "must exceed x_min");
        prof.finish();

        root.finish();
        doc.resolved["seed"] = c.seed;
        c.resolved = doc.resolved;
        return c;
    }

    struct EnsembleRun
    {
        std::string label;
        GroundState state = GroundState::b;
        std::vector<TrajectoryResult> trajectories;

        std::size_t escaped() const
        {
            return static_cast<std::size_t>(std::count_if(trajectories.begin(), trajectories.end(),
                                                           [](const TrajectoryResult& t) { return t.escaped; }));
        }

        double escape_fraction() const
        {
            return trajectories.empty() ? 0.0
                                        : static_cast<double>(escaped()) / static_cast<double>(trajectories.size());
        }

        /// Median first time at which the displacement reaches w_FORT, over
        /// trajectories that got that far.
        double median_escape_time() const
        {
            std::vector<double> t;
            for (const auto& tr : trajectories)
                if (!std::isnan(tr.escape_time))
                    t.push_back(tr.escape_time);
            return t.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::median(t);
        }
    };

    inline EnsembleRun run_ensemble(const std::string& label, const StatePotentialField& field, GroundState state,
                                    const std::vector<InitialCondition>& initial, const EjectConfig& sim,
                                    std::uint64_t seed, unsigned workers)
    {
        EnsembleRun run;
        run.label = label;
        run.state = state;
        run.trajectories.resize(initial.size());
        parallel_for(initial.size(), workers, [&](std::size_t i) {
            run.trajectories[i] = simulate_trajectory(initial[i], field, state, sim, derive_seed(seed, {i}));
        });
        return run;
    }

    struct EjectResult
    {
        double acceleration_b = 0.0;     // at the FORT centre, along the push direction
        double t1 = 0.0;
        double eject_peak_intensity = 0.0;
        double n_scat_b = 0.0;
        double n_scat_a = 0.0;
        EnsembleRun b_cold;               // T = 0, positions across the cloud, kicks off
        EnsembleRun b_thermal;
        EnsembleRun a_thermal;
        std::optional<CollimationStats> collimation;
        config::json summary;
    };

    inline EjectResult run_eject(const EjectRunConfig& c, const RunOptions& opt)
    {
        const auto field = make_eject_field(c.geometry, c.species);
        const Vec3 center = c.geometry.fort_center;
        const Vec3 push = c.geometry.push_direction();
        EjectResult res;

        res.acceleration_b = field.acceleration(GroundState::b, center).dot(push);
        if (res.acceleration_b > 0)
            res.t1 = characteristic_eject_time(res.acceleration_b, c.geometry.fort_waist);
        else
            res.t1 = std::numeric_limits<double>::quiet_NaN();
        if (c.geometry.eject_power > 0)
        {
            GaussianBeam eject;
            eject.power = c.geometry.eject_power;
            eject.waist = c.geometry.eject_waist;
            res.eject_peak_intensity = eject.peak_intensity();
            const auto det = StateDetunings::from_b(c.geometry.eject_detuning_b, c.species);
            if (std::isfinite(res.t1))
            {
                res.n_scat_b = scattering_rate(res.eject_peak_intensity, det.detuning_b, c.species) * res.t1;
                res.n_scat_a = scattering_rate(res.eject_peak_intensity, det.detuning_a, c.species) * res.t1;
            }
        }

        const auto cold_ic = sample_thermal_initial(0.0, c.species, c.cloud_diameter, c.trajectories,
                                                    derive_seed(c.seed, {1}), center);
        const auto warm_ic = sample_thermal_initial(c.sim.temperature, c.species, c.cloud_diameter, c.trajectories,
                                                    derive_seed(c.seed, {2}), center);
        EjectConfig cold_sim = c.sim;
        cold_sim.include_recoil_kicks = false;
        res.b_cold = run_ensemble("b_zero_temperature", field, GroundState::b, cold_ic, cold_sim,
                                  derive_seed(c.seed, {3}), opt.workers);
        res.b_thermal =
            run_ensemble("b_thermal", field, GroundState::b, warm_ic, c.sim, derive_seed(c.seed, {4}), opt.workers);
        res.a_thermal =
            run_ensemble("a_thermal", field, GroundState::a, warm_ic, c.sim, derive_seed(c.seed, {5}), opt.workers);

        const auto prov = io::provenance("eject", c.seed, c.resolved);

        io::CsvWriter profile(prov, {"x_m", "U_a_uK", "U_b_uK", "a_a_m_s2", "a_b_m_s2"});
        for (const auto& r : scan_fig2(field, center, push, c.profile_min, c.profile_max, c.profile_samples))
            profile.row(r.x, r.u_a * 1e6, r.u_b * 1e6, r.accel_a, r.accel_b);
        io::write_file(opt.out_dir / "eject_profile.csv", profile.text());

        io::CsvWriter traj(prov, {"ensemble", "state", "index", "t_s", "x_m", "y_m", "z_m", "vx_m_s", "vy_m_s",
                                  "vz_m_s", "photons_expected"});
        for (const auto* run : {&res.b_cold, &res.b_thermal, &res.a_thermal})
            for (std::size_t i = 0; i < run->trajectories.size(); ++i)
            {
                const auto& tr = run->trajectories[i];
                for (std::size_t k = 0; k < tr.times.size(); ++k)
                    traj.row(run->label, std::string(to_string(run->state)), i, tr.times[k], tr.positions[k].x(),
                             tr.positions[k].y(), tr.positions[k].z(), tr.velocities[k].x(), tr.velocities[k].y(),
                             tr.velocities[k].z(), tr.photons[k]);
            }
        io::write_file(opt.out_dir / "trajectories.csv", traj.text());

        using json = config::json;
        json body = json::object();
        json est = json::object();
        est["acceleration_b_at_center_m_s2"] = res.acceleration_b;
        est["t1_s"] = io::number_or_null(res.t1);
        est["eject_peak_intensity_W_m2"] = res.eject_peak_intensity;
        est["n_scat_b_over_t1"] = res.n_scat_b;
        est["n_scat_a_over_t1"] = res.n_scat_a;
        est["U_b_at_center_uK"] = field.potential(GroundState::b, center) / constants::boltzmann * 1e6;
        est["U_a_at_center_uK"] = field.potential(GroundState::a, center) / constants::boltzmann * 1e6;
        body["estimates"] = est;

        json ens = json::object();
        for (const auto* run : {&res.b_cold, &res.b_thermal, &res.a_thermal})
        {
            json e = json::object();
            e["state"] = to_string(run->state);
            e["trajectories"] = run->trajectories.size();
            e["escape_fraction"] = run->escape_fraction();
            e["median_waist_crossing_time_s"] = io::number_or_null(run->median_escape_time());
            std::vector<double> photons;
            double drift = 0.0;
            for (const auto& tr : run->trajectories)
            {
                photons.push_back(tr.photons_expected);
                drift = std::max(drift, tr.max_energy_drift / std::max(std::abs(tr.energy_initial), 1e-300));
            }
            e["mean_photons_expected"] = stats::mean(photons);
            if (run == &res.b_cold)
                e["max_relative_energy_drift"] = drift;
            ens[run->label] = e;
        }
        body["ensembles"] = ens;

        if (res.b_thermal.escaped() > 0)
        {
            res.collimation = collimation_stats(res.b_thermal.trajectories, c.species, c.geometry.fort_waist);
            const auto& st = *res.collimation;
            json col = json::object();
            col["escaped"] = st.escaped;
            col["mean_exit_direction"] = io::vec_json(st.mean_exit_direction);
            col["mean_exit_speed_m_s"] = st.mean_exit_speed;
            col["rms_transverse_velocity_m_s"] = st.rms_transverse_velocity;
            col["mean_acceleration_m_s2"] = st.mean_acceleration;
            col["t1_s"] = io::number_or_null(st.t1);
            col["photons_over_t1"] = st.photons_over_t1;
            col["recoil_impulse_kg_m_s"] = st.recoil_impulse;
            col["coherent_impulse_kg_m_s"] = st.coherent_impulse;
            col["impulse_ratio"] = st.impulse_ratio;
            body["collimation"] = col;
        }
        else
            body["collimation"] = nullptr;
        res.summary = body;
        io::write_json(opt.out_dir / "eject_summary.json", prov, body);
        return res;
    }

    // ------------------------------------------------------------------
    // emission: phased-array single-photon patterns
    // ------------------------------------------------------------------

    struct EmissionRunConfig
    {
        std::uint64_t seed = 1;
        AtomicSpecies species;
        double diameter = 5.0e-6;
        std::vector<std::size_t> atoms{10, 20, 50};
        std::size_t trials = 20;
        EmissionGeometry geometry = EmissionGeometry::phase_matched(0.0, 0.78e-6);
        double grid_half_width = 0.8;
        std::size_t grid_points = 201;
        std::size_t background_samples = 2000;
        double temperature = 30.0e-6;
        double prep_time = 3.0e-6;
        ThermalSpeed speed = ThermalSpeed::axis_rms;
        std::size_t jitter_trials = 20;
        bool write_patterns = true;
        config::json resolved;
    };

    inline EmissionRunConfig load_emission(config::Document& doc, const RunOptions& opt)
    {
        using config::Dimension;
        auto root = config::Section::root(doc);
        EmissionRunConfig c;
        c.seed = root.integer("seed", 1);
        if (opt.seed)
            c.seed = *opt.seed;
        c.species = config::read_species(root.section("species"));

        auto cloud = root.section("cloud");
        c.diameter = cloud.positive_quantity("diameter", Dimension::length, 5.0e-6);
        c.atoms = cloud.integer_list("atoms", std::vector<std::size_t>{10, 20, 50}, 1);
        c.trials = cloud.integer("trials", 20, 1);
        cloud.finish();

        auto g = root.section("geometry");
        const auto mode = g.choice("mode", {"phase_matched", "beams"}, std::string("phase_matched"));
        const double lambda4 = g.positive_quantity("lambda4", Dimension::length, 0.78e-6);
        if (mode == "phase_matched")
        {
            const double tilt = g.quantity("tilt", Dimension::angle, 0.0);
            if (!(std::abs(tilt) < 0.5 * constants::pi))
                throw g.error("tilt", "must be below 90 degrees");
            c.geometry = EmissionGeometry::phase_matched(tilt, lambda4);
        }
        else
        {
            const double l1 = g.positive_quantity("lambda1", Dimension::length);
            const Vec3 d1 = g.direction("k1_direction");
            const double l2 = g.positive_quantity("lambda2", Dimension::length);
            const Vec3 d2 = g.direction("k2_direction");
            const double l3 = g.positive_quantity("lambda3", Dimension::length);
            const Vec3 d3 = g.direction("k3_direction");
            c.geometry = EmissionGeometry::from_beams(l1, d1, l2, d2, l3, d3, lambda4);
            if (!(c.geometry.matched_wavevector().norm() > 0))
                throw g.error("k3_direction", "k1 + k2 - k3 vanishes; no emission direction is selected");
        }
        g.finish();

        auto grid = root.section("grid");
        c.grid_half_width = grid.number("half_width", 0.8);
        c.grid_points = grid.integer("points", 201, 3);
        if (!(c.grid_half_width > 0))
            throw grid.error("half_width", "must be positive");
        grid.finish();

        auto bg = root.section("background");
        c.background_samples = bg.integer("samples", 2000, 1);
        bg.finish();

        auto blur = root.section("motion");
        c.temperature = blur.nonnegative_quantity("temperature", Dimension::temperature, 30.0e-6);
        c.prep_time = blur.nonnegative_quantity("preparation_time", Dimension::time, 3.0e-6);
        c.speed = blur.choice("speed", {"axis_rms", "mean_speed"}, std::string("axis_rms")) == "axis_rms"
                      ? ThermalSpeed::axis_rms
                      : ThermalSpeed::mean_speed;
        c.jitter_trials = blur.integer("jitter_trials", 20, 1);
        blur.finish();

        auto out = root.section("output");
        c.write_patterns = out.boolean("patterns", true);
        out.finish();

        root.finish();
        doc.resolved["seed"] = c.seed;
        c.resolved = doc.resolved;
        return c;
    }

    struct EmissionRow
    {
        std::size_t atoms = 0;
        double fwhm_mean = 0.0;
        double fwhm_stderr = 0.0;
        double peak_mean = 0.0;
        double background_mean = 0.0;        // random directions outside 3 FWHM
        double background_stderr = 0.0;
        double peak_to_background = 0.0;
        double double_channel_at_peak = 0.0;
        double realized_diameter_mean = 0.0; // largest pair distance in the sampled clouds
        double jittered_peak_to_background = std::numeric_limits<double>::quiet_NaN();
    };

    struct EmissionResult
    {
        std::vector<EmissionRow> rows;
        PeakDirection expected;
        MotionalBlur blur;
        config::json summary;
    };

    inline double largest_pair_distance(const AtomCloud& cloud)
    {
        double d = 0.0;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            for (std::size_t j = i + 1; j < cloud.size(); ++j)
                d = std::max(d, (cloud.positions[i] - cloud.positions[j]).norm());
        return d;
    }

    inline EmissionResult run_emission(const EmissionRunConfig& c, const RunOptions& opt)
    {
        EmissionResult res;
        res.expected = expected_peak_direction(c.geometry);
        res.blur = motional_blur(c.temperature, c.prep_time, c.species, c.geometry.lambda4, c.speed);
        const auto grid = AngularGrid::around(res.expected.direction, c.grid_half_width, c.grid_points);
        const auto prov = io::provenance("emission", c.seed, c.resolved);
        const double lambda_over_d = c.geometry.lambda4 / c.diameter;

        for (std::size_t n : c.atoms)
        {
            EmissionRow row;
            row.atoms = n;
            std::vector<double> fwhm(c.trials), peak(c.trials), bg(c.trials), dbl(c.trials), span(c.trials);
            std::vector<AtomCloud> clouds(c.trials);
            parallel_for(c.trials, opt.workers, [&](std::size_t t) {
                clouds[t] = sample_cloud(n, c.diameter, derive_seed(c.seed, {n, t}), c.species);
                const auto& cloud = clouds[t];
                span[t] = n > 1 ? largest_pair_distance(cloud) : 0.0;
                peak[t] = single_photon_value(cloud, c.geometry, res.expected.direction);
                dbl[t] = double_excitation_value(cloud, c.geometry, res.expected.direction);
                if (n > 1)
                {
                    const auto pattern = single_photon_pattern(cloud, c.geometry, grid);
                    fwhm[t] = pattern_metrics(pattern).fwhm;
                }
                else
                    fwhm[t] = std::numeric_limits<double>::quiet_NaN();
                const double exclusion = n > 1 ? 3.0 * fwhm[t] : 0.0;
                bg[t] = background_mean(cloud, c.geometry, c.background_samples, derive_seed(c.seed, {n, t, 1}),
                                        res.expected.direction, exclusion);
            });
            row.fwhm_mean = stats::mean(fwhm);
            row.fwhm_stderr = stats::standard_error(fwhm);
            row.peak_mean = stats::mean(peak);
            row.background_mean = stats::mean(bg);
            row.background_stderr = stats::standard_error(bg);
            row.peak_to_background = row.peak_mean / row.background_mean;
            row.double_channel_at_peak = stats::mean(dbl);
            row.realized_diameter_mean = stats::mean(span);

            if (c.write_patterns)
            {
                const auto pattern = single_photon_pattern(clouds.front(), c.geometry, grid, opt.workers);
                io::CsvWriter csv(prov, {"theta_rad", "phi_az_rad", "P"});
                for (std::size_t i = 0; i < pattern.values.size(); ++i)
                    csv.row(AngularPattern::polar_angle(pattern.directions[i]),
                            AngularPattern::azimuth(pattern.directions[i]), pattern.values[i]);
                io::write_file(opt.out_dir / fmt::format("pattern_N{}.csv", n), csv.text());
            }
            if (n > 1 && res.blur.displacement > 0)
            {
                const auto jp = jittered_pattern(clouds.front(), c.geometry, grid, res.blur.displacement,
                                                 c.jitter_trials, derive_seed(c.seed, {n, 2}), opt.workers);
                // the dephased lobe sits on a raised floor, so compare against the
                // region outside the unjittered lobe instead of refitting a width
                const double cos_limit = std::cos(3.0 * fwhm.front());
                double sum = 0.0;
                std::size_t count = 0;
                for (std::size_t i = 0; i < jp.values.size(); ++i)
                    if (jp.directions[i].dot(res.expected.direction) < cos_limit)
                    {
                        sum += jp.values[i];
                        ++count;
                    }
                if (count > 0)
                    row.jittered_peak_to_background = jp.values[jp.argmax()] / (sum / static_cast<double>(count));
            }
            res.rows.push_back(row);
        }

        using json = config::json;
        json body = json::object();
        json geo = json::object();
        geo["k1_rad_m"] = io::vec_json(c.geometry.k1);
        geo["k2_rad_m"] = io::vec_json(c.geometry.k2);
        geo["k3_rad_m"] = io::vec_json(c.geometry.k3);
        geo["lambda4_m"] = c.geometry.lambda4;
        geo["expected_peak_direction"] = io::vec_json(res.expected.direction);
        geo["expected_peak_polar_angle_rad"] = AngularPattern::polar_angle(res.expected.direction);
        geo["mismatch_rad_m"] = res.expected.mismatch;
        geo["double_channel_phase_matched"] = double_channel_phase_matched(c.geometry);
        body["geometry"] = geo;
        body["lambda_over_D_rad"] = lambda_over_d;

        json rows = json::array();
        for (const auto& r : res.rows)
        {
            json e = json::object();
            e["N"] = r.atoms;
            e["clouds"] = c.trials;
            e["fwhm_rad_mean"] = io::number_or_null(r.fwhm_mean);
            e["fwhm_rad_stderr"] = io::number_or_null(r.fwhm_stderr);
            e["fwhm_over_lambda_over_D"] = io::number_or_null(r.fwhm_mean / lambda_over_d);
            e["realized_diameter_m_mean"] = r.realized_diameter_mean;
            e["peak_value_mean"] = r.peak_mean;
            e["background_mean"] = r.background_mean;
            e["background_stderr"] = io::number_or_null(r.background_stderr);
            e["peak_to_background"] = r.peak_to_background;
            e["double_channel_at_peak_mean"] = r.double_channel_at_peak;
            e["jittered_peak_to_background"] = io::number_or_null(r.jittered_peak_to_background);
            rows.push_back(e);
        }
        body["patterns"] = rows;

        json mb = json::object();
        mb["temperature_K"] = c.temperature;
        mb["preparation_time_s"] = c.prep_time;
        mb["speed_definition"] = c.speed == ThermalSpeed::axis_rms ? "axis_rms" : "mean_speed";
        mb["speed_m_s"] = res.blur.speed;
        mb["displacement_m"] = res.blur.displacement;
        mb["fraction_of_lambda4"] = res.blur.fraction_of_wavelength;
        body["motional_blur"] = mb;
        res.summary = body;
        io::write_json(opt.out_dir / "emission_metrics.json", prov, body);
        return res;
    }

    // ------------------------------------------------------------------
    // schedule: m-excitation atom pulses
    // ------------------------------------------------------------------

    struct ScheduleRunConfig
    {
        std::uint64_t seed = 1;
        std::size_t atoms = 100;
        std::size_t excitations = 1;
        double rabi = constants::two_pi * 1e6;
        double eject_time = 40.0e-6;
        config::json resolved;
    };

    inline ScheduleRunConfig load_schedule(config::Document& doc, const RunOptions& opt)
    {
        using config::Dimension;
        auto root = config::Section::root(doc);
        ScheduleRunConfig c;
        c.seed = root.integer("seed", 1);
        if (opt.seed)
            c.seed = *opt.seed;
        c.atoms = root.integer("atoms", 100, 1);
        c.excitations = root.integer("excitations", 1, 1);
        if (c.excitations > c.atoms)
            throw root.error("excitations", fmt::format("m = {} exceeds N = {}", c.excitations, c.atoms));
        c.rabi = root.positive_quantity("rabi", Dimension::angular_frequency, constants::two_pi * 1e6);
        c.eject_time = root.nonnegative_quantity("eject_time", Dimension::time, 40.0e-6);
        root.finish();
        doc.resolved["seed"] = c.seed;
        c.resolved = doc.resolved;
        return c;
    }

    inline ScheduleReport run_schedule(const ScheduleRunConfig& c, const RunOptions& opt)
    {
        const auto r = m_excitation_schedule(c.atoms, c.excitations, c.rabi, c.eject_time);
        using json = config::json;
        json body = json::object();
        body["atoms"] = r.atoms;
        body["excitations"] = r.excitations;
        body["preparation_time_s"] = r.preparation_time;
        body["cycle_time_s"] = r.cycle_time;
        body["repetitions"] = r.repetitions;
        body["pulse_rate_Hz"] = r.pulse_rate;
        io::write_json(opt.out_dir / "schedule.json", io::provenance("schedule", c.seed, c.resolved), body);
        return r;
    }
}

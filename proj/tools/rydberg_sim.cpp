// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sim: command line front end for the fig1, eject, emission and
// schedule experiments.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <rydberg/experiments.hpp>

namespace
{
    enum ExitCode
    {
        ok = 0,
        config_error = 2,
        numerical_error = 3,
    };

    struct Flags
    {
        std::string config;
        std::string out = ".";
        std::uint64_t seed = 0;
        unsigned workers = 0;
        bool strict = true;
    };

    void add_common(CLI::App* sub, Flags& f)
    {
        sub->add_option("--config", f.config, "JSON config file (unit-suffixed values); defaults apply when omitted");
        sub->add_option("--out", f.out, "output directory")->capture_default_str();
        sub->add_option("--seed", f.seed, "master seed, overrides the config");
        sub->add_option("--workers", f.workers, "worker threads (0: one per processor)")->capture_default_str();
        sub->add_flag("--strict,!--no-strict", f.strict, "reject unknown config keys")->capture_default_str();
    }

    rydberg::config::Document read_config(const Flags& f)
    {
        if (f.config.empty())
            return rydberg::config::Document::parse("{}", "<defaults>", f.strict);
        return rydberg::config::Document::load(f.config, f.strict);
    }

    template <class Load, class Run>
    int execute(const Flags& f, bool seed_given, Load load, Run run)
    {
        rydberg::RunOptions opt;
        opt.out_dir = f.out;
        opt.workers = f.workers;
        opt.strict = f.strict;
        if (seed_given)
            opt.seed = f.seed;
        auto doc = read_config(f);
        // Everything is validated before any computation starts.
        const auto cfg = load(doc, opt);
        for (const auto& w : doc.warnings)
            fmt::print(stderr, "warning: {}\n", w);
        run(cfg, opt);
        return ok;
    }
}

int main(int argc, char** argv)
{
    CLI::App app{"Rydberg dipole blockade single-atom and single-photon source simulations"};
    app.set_version_flag("--version", std::string(rydberg::version));
    app.require_subcommand(1);

    Flags flags;
    auto* fig1 = app.add_subcommand("fig1", "blockade leakage P_zero + P_double versus atom number");
    auto* eject = app.add_subcommand("eject", "state-selective ejection potentials and trajectories");
    auto* emission = app.add_subcommand("emission", "phased-array single-photon emission patterns");
    auto* schedule = app.add_subcommand("schedule", "m-excitation atom pulse timing");
    for (auto* s : {fig1, eject, emission, schedule})
        add_common(s, flags);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    auto* active = app.get_subcommands().front();
    const bool seed_given = active->count("--seed") > 0;
    try
    {
        if (active == fig1)
            return execute(flags, seed_given, rydberg::load_fig1, [](const auto& c, const auto& o) {
                const auto r = rydberg::run_fig1(c, o);
                fmt::print("fig1: {} rows, fit R^2 = {:.4f}\n", r.rows.size(), r.fit.r_squared);
            });
        if (active == eject)
            return execute(flags, seed_given, rydberg::load_eject, [](const auto& c, const auto& o) {
                const auto r = rydberg::run_eject(c, o);
                fmt::print("eject: t1 = {:.1f} us, n_scat b/a = {:.2f}/{:.2f}, escape fraction b = {:.2f}\n",
                           r.t1 * 1e6, r.n_scat_b, r.n_scat_a, r.b_thermal.escape_fraction());
            });
        if (active == emission)
            return execute(flags, seed_given, rydberg::load_emission, [](const auto& c, const auto& o) {
                const auto r = rydberg::run_emission(c, o);
                for (const auto& row : r.rows)
                    fmt::print("emission: N = {:4d}  FWHM = {:.4f} rad  peak/background = {:.1f}\n", row.atoms,
                               row.fwhm_mean, row.peak_to_background);
            });
        return execute(flags, seed_given, rydberg::load_schedule, [](const auto& c, const auto& o) {
            const auto r = rydberg::run_schedule(c, o);
            fmt::print("schedule: t_prep = {:.4g} s, rate = {:.4g} Hz, repetitions = {}\n", r.preparation_time,
                       r.pulse_rate, r.repetitions);
        });
    }
    catch (const rydberg::ConfigError& e)
    {
        fmt::print(stderr, "config error: {}\n", e.what());
        return config_error;
    }
    catch (const std::invalid_argument& e)
    {
        fmt::print(stderr, "invalid input: {}\n", e.what());
        return config_error;
    }
    catch (const std::exception& e)
    {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return numerical_error;
    }
}

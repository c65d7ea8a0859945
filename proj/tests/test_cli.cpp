// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace
{
    fs::path scratch(const std::string& name)
    {
        const auto p = fs::temp_directory_path() / ("rydberg_cli_" + name);
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }

    int run(const std::string& args)
    {
        const std::string cmd = std::string("\"") + RYDBERG_SIM_PATH + "\" " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path write_config(const fs::path& dir, const std::string& name, const json& j)
    {
        const auto p = dir / name;
        std::ofstream(p) << j.dump(2);
        return p;
    }

    std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }
}

TEST(Cli, VersionAndUsage)
{
    EXPECT_EQ(run("--version"), 0);
    EXPECT_EQ(run("no-such-command"), 2);
    EXPECT_EQ(run("fig1 --config /nonexistent/fig1.json"), 2);
}

TEST(Cli, ScheduleIsReproducibleAndCorrect)
{
    const auto dir = scratch("schedule");
    const auto cfg = write_config(dir, "s.json", {{"atoms", 10}, {"excitations", 10}});
    ASSERT_EQ(run("schedule --config " + quoted(cfg) + " --out " + quoted(dir / "a")), 0);
    ASSERT_EQ(run("schedule --config " + quoted(cfg) + " --out " + quoted(dir / "b")), 0);
    const auto a = slurp(dir / "a" / "schedule.json");
    EXPECT_EQ(a, slurp(dir / "b" / "schedule.json"));
    const auto j = json::parse(a);
    EXPECT_EQ(j["repetitions"].get<int>(), 1);
    EXPECT_EQ(j["provenance"]["command"], "schedule");
}

TEST(Cli, ExcitationsAboveAtomsIsUsageError)
{
    const auto dir = scratch("schedule_bad");
    const auto cfg = write_config(dir, "s.json", {{"atoms", 3}, {"excitations", 4}});
    EXPECT_EQ(run("schedule --config " + quoted(cfg) + " --out " + quoted(dir)), 2);
}

TEST(Cli, UnknownKeyStrictAndLenient)
{
    const auto dir = scratch("strict");
    const auto cfg = write_config(dir, "s.json", {{"atoms", 10}, {"atomz", 1}});
    EXPECT_EQ(run("schedule --config " + quoted(cfg) + " --out " + quoted(dir)), 2);
    EXPECT_EQ(run("schedule --no-strict --config " + quoted(cfg) + " --out " + quoted(dir)), 0);
}

TEST(Cli, Fig1SingleAtomHasNoDoubleExcitation)
{
    const auto dir = scratch("fig1_single");
    const json cfg = {{"cloud", {{"atoms", {1}}, {"trials", 2}}}, {"fit", {{"min_atoms", 1}, {"max_atoms", 1}}}};
    const auto path = write_config(dir, "f.json", cfg);
    ASSERT_EQ(run("fig1 --config " + quoted(path) + " --out " + quoted(dir)), 0);
    std::ifstream in(dir / "fig1.csv");
    std::string line;
    std::getline(in, line);
    ASSERT_EQ(line.rfind("# provenance:", 0), 0u);
    std::getline(in, line);
    ASSERT_EQ(line.rfind("N,", 0), 0u);
    std::getline(in, line);
    std::stringstream ss(line);
    std::string n, pz, pzs, pd;
    std::getline(ss, n, ',');
    std::getline(ss, pz, ',');
    std::getline(ss, pzs, ',');
    std::getline(ss, pd, ',');
    EXPECT_EQ(n, "1");
    EXPECT_EQ(std::stod(pd), 0.0);
}

TEST(Cli, Fig1IsByteIdenticalAcrossRunsAndWorkers)
{
    const auto dir = scratch("fig1_repeat");
    const json cfg = {{"seed", 11}, {"cloud", {{"atoms", {2, 5, 10, 20}}, {"trials", 3}}},
                      {"fit", {{"min_atoms", 2}, {"max_atoms", 20}}}};
    const auto path = write_config(dir, "f.json", cfg);
    ASSERT_EQ(run("fig1 --workers 1 --config " + quoted(path) + " --out " + quoted(dir / "a")), 0);
    ASSERT_EQ(run("fig1 --workers 3 --config " + quoted(path) + " --out " + quoted(dir / "b")), 0);
    EXPECT_EQ(slurp(dir / "a" / "fig1.csv"), slurp(dir / "b" / "fig1.csv"));
    EXPECT_EQ(slurp(dir / "a" / "fig1_summary.json"), slurp(dir / "b" / "fig1_summary.json"));

    ASSERT_EQ(run("fig1 --seed 12 --config " + quoted(path) + " --out " + quoted(dir / "c")), 0);
    EXPECT_NE(slurp(dir / "a" / "fig1.csv"), slurp(dir / "c" / "fig1.csv"));
    const auto j = json::parse(slurp(dir / "c" / "fig1_summary.json"));
    EXPECT_EQ(j["provenance"]["master_seed"].get<int>(), 12);
}

TEST(Cli, EjectWithoutEjectBeamKeepsAtoms)
{
    const auto dir = scratch("eject_off");
    const json cfg = {{"geometry", {{"eject_power", "0 W"}}},
                      {"simulation", {{"trajectories", 6}, {"duration", "100 us"}}},
                      {"profile", {{"samples", 11}}}};
    const auto path = write_config(dir, "e.json", cfg);
    ASSERT_EQ(run("eject --config " + quoted(path) + " --out " + quoted(dir)), 0);
    const auto j = json::parse(slurp(dir / "eject_summary.json"));
    for (const char* e : {"b_zero_temperature", "b_thermal", "a_thermal"})
        EXPECT_EQ(j["ensembles"][e]["escape_fraction"].get<double>(), 0.0) << e;
    EXPECT_TRUE(j["collimation"].is_null());
}

TEST(Cli, EjectSeparatesStates)
{
    const auto dir = scratch("eject_on");
    const json cfg = {{"simulation", {{"trajectories", 20}, {"duration", "150 us"}}}, {"profile", {{"samples", 11}}}};
    const auto path = write_config(dir, "e.json", cfg);
    ASSERT_EQ(run("eject --config " + quoted(path) + " --out " + quoted(dir)), 0);
    const auto j = json::parse(slurp(dir / "eject_summary.json"));
    EXPECT_LT(j["ensembles"]["a_thermal"]["escape_fraction"].get<double>(), 0.05);
    EXPECT_GT(j["ensembles"]["b_thermal"]["escape_fraction"].get<double>(), 0.9);
    EXPECT_TRUE(fs::exists(dir / "eject_profile.csv"));
    EXPECT_TRUE(fs::exists(dir / "trajectories.csv"));
}

TEST(Cli, EmissionWritesPatternsAndMetrics)
{
    const auto dir = scratch("emission");
    const json cfg = {{"cloud", {{"atoms", {1, 20}}, {"trials", 2}}},
                      {"background", {{"samples", 100}}},
                      {"motion", {{"jitter_trials", 2}}}};
    const auto path = write_config(dir, "m.json", cfg);
    ASSERT_EQ(run("emission --config " + quoted(path) + " --out " + quoted(dir)), 0);
    EXPECT_TRUE(fs::exists(dir / "emission_metrics.json"));
    std::ifstream in(dir / "pattern_N1.csv");
    ASSERT_TRUE(in);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    EXPECT_EQ(line, "theta_rad,phi_az_rad,P");
    int rows = 0;
    while (std::getline(in, line))
    {
        const double p = std::stod(line.substr(line.rfind(',') + 1));
        EXPECT_NEAR(p, 1.0, 1e-9);
        ++rows;
    }
    EXPECT_GT(rows, 0);
}

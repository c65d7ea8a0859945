// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include <rydberg/config.hpp>
#include <rydberg/experiments.hpp>

using namespace rydberg;
using config::Dimension;

TEST(Quantity, ParsesCommonUnits)
{
    EXPECT_DOUBLE_EQ(config::parse_quantity("5 um", Dimension::length), 5e-6);
    EXPECT_DOUBLE_EQ(config::parse_quantity("5 µm", Dimension::length), 5e-6);
    EXPECT_DOUBLE_EQ(config::parse_quantity("1 MHz", Dimension::angular_frequency), constants::two_pi * 1e6);
    EXPECT_DOUBLE_EQ(config::parse_quantity("2e3 rad/s", Dimension::angular_frequency), 2e3);
    EXPECT_DOUBLE_EQ(config::parse_quantity("30 uK", Dimension::temperature), 30e-6);
    EXPECT_DOUBLE_EQ(config::parse_quantity("9 uW", Dimension::power), 9e-6);
    EXPECT_DOUBLE_EQ(config::parse_quantity("40 us", Dimension::time), 40e-6);
    EXPECT_NEAR(config::parse_quantity("20 deg", Dimension::angle), 20.0 * constants::pi / 180.0, 1e-15);
    EXPECT_DOUBLE_EQ(config::parse_quantity("  -3 um ", Dimension::length), -3e-6);
}

TEST(Quantity, RejectsMalformedInput)
{
    EXPECT_THROW(config::parse_quantity("5", Dimension::length), ConfigError);
    EXPECT_THROW(config::parse_quantity("um", Dimension::length), ConfigError);
    EXPECT_THROW(config::parse_quantity("5 furlongs", Dimension::length), ConfigError);
    EXPECT_THROW(config::parse_quantity("5 MHz", Dimension::length), ConfigError);
}

TEST(Quantity, ErrorNamesTheDimension)
{
    try
    {
        config::parse_quantity("5 MHz", Dimension::length, "cfg.json:3: /cloud/diameter");
        FAIL();
    }
    catch (const ConfigError& e)
    {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("cfg.json:3"), std::string::npos);
        EXPECT_NE(msg.find("length"), std::string::npos);
    }
}

TEST(Document, InvalidJsonReportsLine)
{
    try
    {
        config::Document::parse("{\n  \"atoms\": 10,\n  oops\n}", "bad.json");
        FAIL();
    }
    catch (const ConfigError& e)
    {
        EXPECT_NE(std::string(e.what()).find("bad.json:3"), std::string::npos) << e.what();
    }
}

TEST(Document, TopLevelMustBeObject)
{
    EXPECT_THROW(config::Document::parse("[1, 2]"), ConfigError);
}

TEST(Section, BadValueReportsLineOfKey)
{
    auto doc = config::Document::parse("{\n  \"atoms\": 10,\n  \"rabi\": \"1 um\"\n}", "s.json");
    try
    {
        load_schedule(doc, {});
        FAIL();
    }
    catch (const ConfigError& e)
    {
        EXPECT_NE(std::string(e.what()).find("s.json:3"), std::string::npos) << e.what();
    }
}

TEST(Section, UnknownKeyStrictVersusLenient)
{
    const std::string text = "{\"atoms\": 10, \"atomz\": 3}";
    auto strict = config::Document::parse(text, "x.json", true);
    EXPECT_THROW(load_schedule(strict, {}), ConfigError);
    auto lenient = config::Document::parse(text, "x.json", false);
    EXPECT_NO_THROW(load_schedule(lenient, {}));
    ASSERT_EQ(lenient.warnings.size(), 1u);
    EXPECT_NE(lenient.warnings[0].find("atomz"), std::string::npos);
}

TEST(Section, ResolvedConfigIncludesDefaults)
{
    auto doc = config::Document::parse("{\"atoms\": 10}");
    const auto c = load_schedule(doc, {});
    EXPECT_EQ(c.atoms, 10u);
    EXPECT_EQ(c.excitations, 1u);
    ASSERT_TRUE(c.resolved.contains("rabi"));
    ASSERT_TRUE(c.resolved.contains("eject_time"));
    EXPECT_DOUBLE_EQ(config::parse_quantity(c.resolved["eject_time"].get<std::string>(), Dimension::time), 40e-6);
}

TEST(Section, SeedOverrideWins)
{
    auto doc = config::Document::parse("{\"seed\": 5}");
    RunOptions opt;
    opt.seed = 9;
    EXPECT_EQ(load_schedule(doc, opt).seed, 9u);
}

TEST(Section, ExcitationsAboveAtomsRejected)
{
    auto doc = config::Document::parse("{\"atoms\": 4, \"excitations\": 5}");
    EXPECT_THROW(load_schedule(doc, {}), ConfigError);
}

TEST(Section, EjectVectorsNeedUnits)
{
    auto doc = config::Document::parse("{\"geometry\": {\"eject_offset\": [-3, 0, 0]}}");
    EXPECT_THROW(load_eject(doc, {}), ConfigError);
    auto ok = config::Document::parse("{\"geometry\": {\"eject_offset\": [\"3 um\", \"0 um\", \"0 um\"]}}");
    EXPECT_DOUBLE_EQ(load_eject(ok, {}).geometry.eject_offset.x(), 3e-6);
}

TEST(Section, WrongTypeIsReported)
{
    auto doc = config::Document::parse("{\"cloud\": {\"trials\": \"many\"}}");
    EXPECT_THROW(load_fig1(doc, {}), ConfigError);
    auto neg = config::Document::parse("{\"cloud\": {\"diameter\": \"-5 um\"}}");
    EXPECT_THROW(load_fig1(neg, {}), ConfigError);
}

TEST(BundledConfigs, AllLoad)
{
    const std::string dir = RYDBERG_CONFIG_DIR;
    auto fig1 = config::Document::load(dir + "/fig1.json");
    EXPECT_NO_THROW(load_fig1(fig1, {}));
    auto eject = config::Document::load(dir + "/eject.json");
    EXPECT_NO_THROW(load_eject(eject, {}));
    for (const char* name : {"/emission.json", "/emission_tilted.json", "/emission_conjugate.json"})
    {
        auto em = config::Document::load(dir + name);
        EXPECT_NO_THROW(load_emission(em, {})) << name;
    }
    auto sched = config::Document::load(dir + "/schedule.json");
    EXPECT_NO_THROW(load_schedule(sched, {}));
    EXPECT_THROW(config::Document::load(dir + "/missing.json"), ConfigError);
}

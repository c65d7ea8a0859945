// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "constants.hpp"
#include "ensemble.hpp"
#include "errors.hpp"

namespace rydberg::config
{
    using json = nlohmann::ordered_json;

    enum class Dimension
    {
        length,
        time,
        angular_frequency,  // "MHz" means 2 pi x 1e6 rad/s
        power,
        temperature,
        angle,
        mass,
        intensity,
        acceleration,
    };

    inline const char* to_string(Dimension d)
    {
        switch (d)
        {
        case Dimension::length: return "length";
        case Dimension::time: return "time";
        case Dimension::angular_frequency: return "frequency";
        case Dimension::power: return "power";
        case Dimension::temperature: return "temperature";
        case Dimension::angle: return "angle";
        case Dimension::mass: return "mass";
        case Dimension::intensity: return "intensity";
        case Dimension::acceleration: return "acceleration";
        }
        return "?";
    }

    /// SI unit written back into resolved configs.
    inline const char* canonical_unit(Dimension d)
    {
        switch (d)
        {
        case Dimension::length: return "m";
        case Dimension::time: return "s";
        case Dimension::angular_frequency: return "rad/s";
        case Dimension::power: return "W";
        case Dimension::temperature: return "K";
        case Dimension::angle: return "rad";
        case Dimension::mass: return "kg";
        case Dimension::intensity: return "W/m^2";
        case Dimension::acceleration: return "m/s^2";
        }
        return "?";
    }

    struct UnitEntry
    {
        std::string_view symbol;
        Dimension dimension;
        double factor;  // SI value of one unit
    };

    inline constexpr std::array<UnitEntry, 36> unit_table{{
        {"m", Dimension::length, 1.0},
        {"mm", Dimension::length, 1e-3},
        {"um", Dimension::length, 1e-6},
        {"\xC2\xB5m", Dimension::length, 1e-6},
        {"nm", Dimension::length, 1e-9},
        {"s", Dimension::time, 1.0},
        {"ms", Dimension::time, 1e-3},
        {"us", Dimension::time, 1e-6},
        {"\xC2\xB5s", Dimension::time, 1e-6},
        {"ns", Dimension::time, 1e-9},
        {"rad/s", Dimension::angular_frequency, 1.0},
        {"Hz", Dimension::angular_frequency, constants::two_pi},
        {"kHz", Dimension::angular_frequency, constants::two_pi * 1e3},
        {"MHz", Dimension::angular_frequency, constants::two_pi * 1e6},
        {"GHz", Dimension::angular_frequency, constants::two_pi * 1e9},
        {"THz", Dimension::angular_frequency, constants::two_pi * 1e12},
        {"W", Dimension::power, 1.0},
        {"mW", Dimension::power, 1e-3},
        {"uW", Dimension::power, 1e-6},
        {"\xC2\xB5W", Dimension::power, 1e-6},
        {"nW", Dimension::power, 1e-9},
        {"K", Dimension::temperature, 1.0},
        {"mK", Dimension::temperature, 1e-3},
        {"uK", Dimension::temperature, 1e-6},
        {"\xC2\xB5K", Dimension::temperature, 1e-6},
        {"nK", Dimension::temperature, 1e-9},
        {"rad", Dimension::angle, 1.0},
        {"mrad", Dimension::angle, 1e-3},
        {"deg", Dimension::angle, constants::pi / 180.0},
        {"kg", Dimension::mass, 1.0},
        {"u", Dimension::mass, constants::atomic_mass_unit},
        {"amu", Dimension::mass, constants::atomic_mass_unit},
        {"W/m^2", Dimension::intensity, 1.0},
        {"mW/cm^2", Dimension::intensity, 10.0},
        {"W/cm^2", Dimension::intensity, 1e4},
        {"m/s^2", Dimension::acceleration, 1.0},
    }};

    inline std::optional<UnitEntry> find_unit(std::string_view symbol)
    {
        for (const auto& u : unit_table)
            if (u.symbol == symbol)
                return u;
        return std::nullopt;
    }

    /// Parses "<number> <unit>" (whitespace optional) into SI. Throws
    /// ConfigError with `where` as context on malformed input or a unit of
    /// the wrong dimension.
    inline double parse_quantity(std::string_view text, Dimension expected, std::string_view where = {})
    {
        auto fail = [&](const std::string& why) -> ConfigError {
            return ConfigError(fmt::format("{}{}\"{}\": {}", where, where.empty() ? "" : ": ", text, why));
        };
        std::size_t i = 0;
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        const char* begin = text.data() + i;
        const char* end = text.data() + text.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr == begin)
            throw fail("expected a number followed by a unit, e.g. \"5 um\"");
        std::string_view rest(ptr, static_cast<std::size_t>(end - ptr));
        while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front())))
            rest.remove_prefix(1);
        while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back())))
            rest.remove_suffix(1);
        if (rest.empty())
            throw fail(fmt::format("missing unit (expected a {}, e.g. \"{}\")", to_string(expected),
                                   canonical_unit(expected)));
        const auto unit = find_unit(rest);
        if (!unit)
            throw fail(fmt::format("unknown unit '{}'", rest));
        if (unit->dimension != expected)
            throw fail(fmt::format("unit '{}' is a {}, expected a {}", rest, to_string(unit->dimension),
                                   to_string(expected)));
        if (!std::isfinite(value))
            throw fail("value is not finite");
        return value * unit->factor;
    }

    inline std::string format_quantity(double si, Dimension d)
    {
        return fmt::format("{} {}", si, canonical_unit(d));
    }

    /// Best-effort 1-based line of the member addressed by a JSON pointer in
    /// the source text; 0 when it cannot be located.
    inline std::size_t locate_line(std::string_view source, std::string_view pointer)
    {
        std::size_t pos = 0;
        std::size_t start = 1;
        while (start <= pointer.size())
        {
            const auto next = pointer.find('/', start);
            const auto token = pointer.substr(start, next == std::string_view::npos ? std::string_view::npos
                                                                                     : next - start);
            const bool index = !token.empty() && std::all_of(token.begin(), token.end(), [](char c) {
                return std::isdigit(static_cast<unsigned char>(c));
            });
            if (!index)
            {
                const auto found = source.find(fmt::format("\"{}\"", token), pos);
                if (found == std::string_view::npos)
                    return 0;
                pos = found;
            }
            if (next == std::string_view::npos)
                break;
            start = next + 1;
        }
        if (pointer.empty() || pointer == "/")
            return 0;
        return 1 + static_cast<std::size_t>(std::count(source.begin(), source.begin() + static_cast<long>(pos), '\n'));
    }

    /// Shared state for one config document: the source (for line numbers),
    /// strictness, the resolved output and accumulated warnings.
    struct Document
    {
        std::string source;
        std::string origin = "<config>";
        json root = json::object();
        json resolved = json::object();
        bool strict = true;
        std::vector<std::string> warnings;

        static Document parse(std::string text, std::string origin = "<config>", bool strict = true)
        {
            Document d;
            d.source = std::move(text);
            d.origin = std::move(origin);
            d.strict = strict;
            try
            {
                d.root = json::parse(d.source);
            }
            catch (const json::parse_error& e)
            {
                const auto byte = std::min<std::size_t>(e.byte, d.source.size());
                const auto line =
                    1 + std::count(d.source.begin(), d.source.begin() + static_cast<long>(byte > 0 ? byte - 1 : 0), '\n');
                throw ConfigError(fmt::format("{}:{}: invalid JSON: {}", d.origin, line, e.what()));
            }
            if (!d.root.is_object())
                throw ConfigError(fmt::format("{}: top level must be a JSON object", d.origin));
            return d;
        }

        static Document load(const std::string& path, bool strict = true)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw ConfigError(fmt::format("cannot open config file '{}'", path));
            std::ostringstream ss;
            ss << in.rdbuf();
            return parse(ss.str(), path, strict);
        }

        std::string where(const std::string& pointer) const
        {
            const auto line = locate_line(source, pointer);
            if (line > 0)
                return fmt::format("{}:{}: {}", origin, line, pointer);
            return fmt::format("{}: {}", origin, pointer);
        }
    };

    /// Reads one JSON object. Every accessor marks its key as used and writes
    /// the value (defaults included) into the resolved document; finish()
    /// rejects unused keys.
    class Section
    {
    public:
        Section(Document& doc, const json* node, std::string pointer)
            : m_doc(&doc), m_node(node), m_pointer(std::move(pointer))
        {
            if (m_node && !m_node->is_object())
                throw ConfigError(fmt::format("{}: expected an object", m_doc->where(m_pointer)));
            resolved() = json::object();
        }

        static Section root(Document& doc) { return Section(doc, &doc.root, ""); }

        const std::string& pointer() const { return m_pointer; }
        bool has(const std::string& key) const { return m_node && m_node->contains(key); }

        Section section(const std::string& key)
        {
            mark(key);
            const json* child = has(key) ? &(*m_node)[key] : nullptr;
            return Section(*m_doc, child, child_pointer(key));
        }

        double quantity(const std::string& key, Dimension dim, std::optional<double> fallback = std::nullopt)
        {
            const json* v = value(key, fallback.has_value());
            double si = 0.0;
            if (!v)
                si = *fallback;
            else
            {
                if (!v->is_string())
                    throw error(key, fmt::format("expected a string with a unit, e.g. \"1 {}\"", canonical_unit(dim)));
                si = parse_quantity(v->get<std::string>(), dim, m_doc->where(child_pointer(key)));
            }
            resolved()[key] = format_quantity(si, dim);
            return si;
        }

        double positive_quantity(const std::string& key, Dimension dim, std::optional<double> fallback = std::nullopt)
        {
            const double v = quantity(key, dim, fallback);
            if (!(v > 0))
                throw error(key, "must be positive");
            return v;
        }

        double nonnegative_quantity(const std::string& key, Dimension dim,
                                    std::optional<double> fallback = std::nullopt)
        {
            const double v = quantity(key, dim, fallback);
            if (v < 0)
                throw error(key, "must be >= 0");
            return v;
        }

        Vec3 vector(const std::string& key, Dimension dim, std::optional<Vec3> fallback = std::nullopt)
        {
            const json* v = value(key, fallback.has_value());
            Vec3 out = fallback.value_or(Vec3::Zero());
            if (v)
            {
                if (!v->is_array() || v->size() != 3)
                    throw error(key, "expected an array of three quantities");
                for (std::size_t i = 0; i < 3; ++i)
                {
                    if (!(*v)[i].is_string())
                        throw error(key, "vector components need units, e.g. [\"-3 um\", \"0 um\", \"0 um\"]");
                    out[static_cast<Eigen::Index>(i)] = parse_quantity(
                        (*v)[i].get<std::string>(), dim, m_doc->where(child_pointer(key) + "/" + std::to_string(i)));
                }
            }
            resolved()[key] = json::array(
                {format_quantity(out.x(), dim), format_quantity(out.y(), dim), format_quantity(out.z(), dim)});
            return out;
        }

        /// Unitless direction; normalized on return.
        Vec3 direction(const std::string& key, std::optional<Vec3> fallback = std::nullopt)
        {
            const json* v = value(key, fallback.has_value());
            Vec3 out = fallback.value_or(Vec3::UnitZ());
            if (v)
            {
                if (!v->is_array() || v->size() != 3 ||
                    !std::all_of(v->begin(), v->end(), [](const json& c) { return c.is_number(); }))
                    throw error(key, "expected an array of three numbers");
                out = Vec3((*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>());
            }
            if (!(out.norm() > 0))
                throw error(key, "direction must be nonzero");
            out.normalize();
            resolved()[key] = json::array({out.x(), out.y(), out.z()});
            return out;
        }

        std::uint64_t integer(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt,
                              std::uint64_t minimum = 0)
        {
            const json* v = value(key, fallback.has_value());
            std::uint64_t out = fallback.value_or(0);
            if (v)
                out = as_integer(*v, key);
            if (out < minimum)
                throw error(key, fmt::format("must be >= {}", minimum));
            resolved()[key] = out;
            return out;
        }

        std::vector<std::size_t> integer_list(const std::string& key,
                                              std::optional<std::vector<std::size_t>> fallback = std::nullopt,
                                              std::uint64_t minimum = 0)
        {
            const json* v = value(key, fallback.has_value());
            std::vector<std::size_t> out = fallback.value_or(std::vector<std::size_t>{});
            if (v)
            {
                if (!v->is_array() || v->empty())
                    throw error(key, "expected a non-empty array of integers");
                out.clear();
                for (const auto& e : *v)
                    out.push_back(static_cast<std::size_t>(as_integer(e, key)));
            }
            for (auto n : out)
                if (n < minimum)
                    throw error(key, fmt::format("entries must be >= {}", minimum));
            resolved()[key] = out;
            return out;
        }

        double number(const std::string& key, std::optional<double> fallback = std::nullopt)
        {
            const json* v = value(key, fallback.has_value());
            double out = fallback.value_or(0.0);
            if (v)
            {
                if (!v->is_number())
                    throw error(key, "expected a plain number");
                out = v->get<double>();
            }
            resolved()[key] = out;
            return out;
        }

        bool boolean(const std::string& key, std::optional<bool> fallback = std::nullopt)
        {
            const json* v = value(key, fallback.has_value());
            bool out = fallback.value_or(false);
            if (v)
            {
                if (!v->is_boolean())
                    throw error(key, "expected true or false");
                out = v->get<bool>();
            }
            resolved()[key] = out;
            return out;
        }

        std::string choice(const std::string& key, const std::vector<std::string>& allowed,
                           std::optional<std::string> fallback = std::nullopt)
        {
            const json* v = value(key, fallback.has_value());
            std::string out = fallback.value_or("");
            if (v)
            {
                if (!v->is_string())
                    throw error(key, "expected a string");
                out = v->get<std::string>();
            }
            if (std::find(allowed.begin(), allowed.end(), out) == allowed.end())
                throw error(key, fmt::format("must be one of: {}", fmt::join(allowed, ", ")));
            resolved()[key] = out;
            return out;
        }

        /// Unknown keys: an error in strict mode, a warning otherwise.
        void finish()
        {
            if (!m_node)
                return;
            for (auto it = m_node->begin(); it != m_node->end(); ++it)
            {
                if (std::find(m_used.begin(), m_used.end(), it.key()) != m_used.end())
                    continue;
                const auto msg = fmt::format("{}: unknown key", m_doc->where(child_pointer(it.key())));
                if (m_doc->strict)
                    throw ConfigError(msg);
                m_doc->warnings.push_back(msg + " (ignored)");
            }
        }

        ConfigError error(const std::string& key, const std::string& why) const
        {
            return ConfigError(fmt::format("{}: {}", m_doc->where(child_pointer(key)), why));
        }

    private:
        std::string child_pointer(const std::string& key) const { return m_pointer + "/" + key; }

        json& resolved()
        {
            return m_pointer.empty() ? m_doc->resolved : m_doc->resolved[json::json_pointer(m_pointer)];
        }

        void mark(const std::string& key)
        {
            if (std::find(m_used.begin(), m_used.end(), key) == m_used.end())
                m_used.push_back(key);
        }

        const json* value(const std::string& key, bool optional)
        {
            mark(key);
            if (has(key))
                return &(*m_node)[key];
            if (!optional)
                throw ConfigError(fmt::format("{}: required key is missing", m_doc->where(child_pointer(key))));
            return nullptr;
        }

        std::uint64_t as_integer(const json& v, const std::string& key) const
        {
            if (v.is_number_unsigned())
                return v.get<std::uint64_t>();
            if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
                return static_cast<std::uint64_t>(v.get<std::int64_t>());
            throw error(key, "expected a non-negative integer");
        }

        Document* m_doc;
        const json* m_node;
        std::string m_pointer;
        std::vector<std::string> m_used;
    };

    /// Species block: every field optional, defaults are 87Rb.
    inline AtomicSpecies read_species(Section s)
    {
        const AtomicSpecies d = AtomicSpecies::rubidium87();
        AtomicSpecies sp;
        sp.mass = s.positive_quantity("mass", Dimension::mass, d.mass);
        sp.linewidth = s.positive_quantity("linewidth", Dimension::angular_frequency, d.linewidth);
        sp.saturation_intensity =
            s.positive_quantity("saturation_intensity", Dimension::intensity, d.saturation_intensity);
        sp.line_wavelength = s.positive_quantity("line_wavelength", Dimension::length, d.line_wavelength);
        sp.ground_hyperfine_splitting =
            s.positive_quantity("ground_hyperfine_splitting", Dimension::angular_frequency, d.ground_hyperfine_splitting);
        sp.rydberg_decay = s.positive_quantity("rydberg_decay", Dimension::angular_frequency, d.rydberg_decay);
        s.finish();
        return sp;
    }

    inline RydbergCoupling read_coupling(Section s)
    {
        const auto n = s.integer("n", 50, 1);
        const auto anchor_n = s.integer("anchor_n", 50, 1);
        const double sep = s.positive_quantity("anchor_separation", Dimension::length, 5.0e-6);
        const double shift = s.positive_quantity("anchor_shift", Dimension::angular_frequency, constants::two_pi * 1e8);
        s.finish();
        return RydbergCoupling::calibrated(static_cast<int>(n), static_cast<int>(anchor_n), sep, shift);
    }
}

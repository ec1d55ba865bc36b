#include "ltm/config_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "ltm/errors.hpp"

namespace ltm {

namespace {

enum class Dim { rate, volume, length, ratio, frequency, action, moment, speed, field, dimensionless };

struct UnitEntry {
    std::string_view name;
    double factor;
};

std::vector<UnitEntry> units_of(Dim dim) {
    switch (dim) {
        case Dim::rate:
            return {{"rad/s", 1}, {"1/s", 1}, {"krad/s", 1e3}, {"Mrad/s", 1e6}, {"Grad/s", 1e9}, {"Trad/s", 1e12}};
        case Dim::volume:
            return {{"m^3", 1}, {"cm^3", 1e-6}, {"mm^3", 1e-9}, {"um^3", 1e-18}};
        case Dim::length:
            return {{"m", 1}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}};
        case Dim::ratio:
            return {{"1", 1}, {"ppm", 1e-6}, {"ppb", 1e-9}};
        case Dim::frequency:
            return {{"Hz", 1}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}, {"THz", 1e12}};
        case Dim::action:
            return {{"J*s", 1}};
        case Dim::moment:
            return {{"J/T", 1}};
        case Dim::speed:
            return {{"m/s", 1}};
        case Dim::field:
            return {{"T", 1}, {"mT", 1e-3}, {"uT", 1e-6}, {"nT", 1e-9}};
        case Dim::dimensionless:
            return {{"1", 1}};
    }
    return {};
}

struct Param {
    std::string_view path;
    Dim dim;
    std::function<double&(ModelConfig&)> ref;
};

// Stored fields, in canonical order. Virtual paths (drive.lambda, drive.field,
// overrides.g_rate) are handled separately.
const std::vector<Param>& registry() {
    static const std::vector<Param> table = {
        {"constants.hbar", Dim::action, [](ModelConfig& c) -> double& { return c.constants.hbar; }},
        {"constants.g_e", Dim::dimensionless, [](ModelConfig& c) -> double& { return c.constants.g_e; }},
        {"constants.mu_B", Dim::moment, [](ModelConfig& c) -> double& { return c.constants.mu_B; }},
        {"constants.c", Dim::speed, [](ModelConfig& c) -> double& { return c.constants.c; }},
        {"rates.L21", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L21; }},
        {"rates.L23", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L23; }},
        {"rates.L31", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L31; }},
        {"rates.L54", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L54; }},
        {"rates.L56", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L56; }},
        {"rates.L64", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L64; }},
        {"rates.L57", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L57; }},
        {"rates.L71", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L71; }},
        {"rates.L74", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L74; }},
        {"rates.L27", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.L27; }},
        {"rates.gamma14", Dim::rate, [](ModelConfig& c) -> double& { return c.rates.gamma14; }},
        {"geometry.medium_volume", Dim::volume, [](ModelConfig& c) -> double& { return c.geometry.medium_volume; }},
        {"geometry.cavity_volume", Dim::volume, [](ModelConfig& c) -> double& { return c.geometry.cavity_volume; }},
        {"geometry.nv_concentration", Dim::ratio,
         [](ModelConfig& c) -> double& { return c.geometry.nv_concentration; }},
        {"geometry.nv_fraction", Dim::ratio, [](ModelConfig& c) -> double& { return c.geometry.nv_fraction; }},
        {"geometry.vacuum_wavelength", Dim::length,
         [](ModelConfig& c) -> double& { return c.geometry.vacuum_wavelength; }},
        {"geometry.refractive_index", Dim::dimensionless,
         [](ModelConfig& c) -> double& { return c.geometry.refractive_index; }},
        {"geometry.sideband_width", Dim::frequency,
         [](ModelConfig& c) -> double& { return c.geometry.sideband_width; }},
        {"geometry.kappa", Dim::rate, [](ModelConfig& c) -> double& { return c.geometry.kappa; }},
        {"drive.omega", Dim::rate, [](ModelConfig& c) -> double& { return c.drive.omega; }},
        {"drive.delta", Dim::rate, [](ModelConfig& c) -> double& { return c.drive.delta; }},
        {"drive.lambda12", Dim::rate, [](ModelConfig& c) -> double& { return c.drive.lambda12; }},
        {"drive.lambda45", Dim::rate, [](ModelConfig& c) -> double& { return c.drive.lambda45; }},
        {"orientation.aligned_fraction", Dim::ratio,
         [](ModelConfig& c) -> double& { return c.orientation.aligned_fraction; }},
        {"orientation.off_axis_detuning", Dim::rate,
         [](ModelConfig& c) -> double& { return c.orientation.off_axis_detuning; }},
    };
    return table;
}

const Param* find_param(std::string_view path) {
    for (const auto& p : registry())
        if (p.path == path) return &p;
    return nullptr;
}

Dim dim_of(std::string_view path) {
    if (const auto* p = find_param(path)) return p->dim;
    if (path == "drive.lambda" || path == "overrides.g_rate") return Dim::rate;
    if (path == "drive.field") return Dim::field;
    throw UsageError("unknown parameter path '" + std::string(path) + "'");
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(std::string_view token) {
    double v = 0.0;
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw UsageError("not a number: '" + std::string(token) + "'");
    return v;
}

std::string_view mode_name(OrientationMode m) {
    return m == OrientationMode::single_orientation ? "single_orientation" : "four_orientation";
}

OrientationMode parse_mode(std::string_view s) {
    if (s == "single_orientation" || s == "single") return OrientationMode::single_orientation;
    if (s == "four_orientation" || s == "four") return OrientationMode::four_orientation;
    throw UsageError("unknown orientation mode '" + std::string(s) + "'");
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf.data(), ptr);
}

std::string canonical_unit(std::string_view path) { return std::string(units_of(dim_of(path)).front().name); }

const std::vector<std::string>& parameter_paths() {
    static const std::vector<std::string> paths = [] {
        std::vector<std::string> out;
        for (const auto& p : registry()) out.emplace_back(p.path);
        out.emplace_back("drive.lambda");
        out.emplace_back("drive.field");
        out.emplace_back("overrides.g_rate");
        return out;
    }();
    return paths;
}

double get_parameter(const ModelConfig& config, std::string_view path) {
    if (const auto* p = find_param(path)) {
        ModelConfig copy = config;
        return p->ref(copy);
    }
    if (path == "drive.lambda") {
        if (config.drive.lambda12 != config.drive.lambda45)
            throw UsageError("drive.lambda is ambiguous: lambda12 != lambda45");
        return config.drive.lambda12;
    }
    if (path == "drive.field") return detuning_to_b_field(config.drive.delta, config.constants);
    if (path == "overrides.g_rate") return config.g_rate_override.value_or(derive_constants(config).g_rate);
    throw UsageError("unknown parameter path '" + std::string(path) + "'");
}

void set_parameter(ModelConfig& config, std::string_view path, double value) {
    if (const auto* p = find_param(path)) {
        p->ref(config) = value;
        return;
    }
    if (path == "drive.lambda") {
        config.drive.lambda12 = config.drive.lambda45 = value;
    } else if (path == "drive.field") {
        config.drive.delta = b_field_to_detuning(value, config.constants);
    } else if (path == "overrides.g_rate") {
        config.g_rate_override = value;
    } else {
        throw UsageError("unknown parameter path '" + std::string(path) + "'");
    }
}

double to_canonical(std::string_view path, double value, std::string_view unit) {
    for (const auto& u : units_of(dim_of(path)))
        if (u.name == unit) return value * u.factor;
    std::string allowed;
    for (const auto& u : units_of(dim_of(path))) allowed += (allowed.empty() ? "" : ", ") + std::string(u.name);
    throw UsageError("unit '" + std::string(unit) + "' not valid for " + std::string(path) + " (allowed: " + allowed +
                     ")");
}

void set_parameter(ModelConfig& config, std::string_view path, std::string_view text) {
    text = trim(text);
    if (path == "orientation.mode") {
        config.orientation.mode = parse_mode(text);
        return;
    }
    const auto space = text.find_first_of(" \t");
    const auto number = parse_number(trim(text.substr(0, space)));
    const auto unit = space == std::string_view::npos ? std::string_view{} : trim(text.substr(space));
    set_parameter(config, path, unit.empty() ? number : to_canonical(path, number, unit));
}

ModelConfig parse_config_text(std::string_view text) {
    struct Entry {
        std::string path;
        std::string value;
        int line;
    };
    std::vector<Entry> entries;
    std::string section;
    std::string preset_text;
    int line_no = 0;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw UsageError("line " + std::to_string(line_no) + ": unterminated section");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw UsageError("line " + std::to_string(line_no) + ": expected key = value");
        const auto key = std::string(trim(line.substr(0, eq)));
        const auto value = std::string(trim(line.substr(eq + 1)));
        if (section.empty()) {
            if (key != "preset") throw UsageError("line " + std::to_string(line_no) + ": key '" + key +
                                                  "' outside a section");
            preset_text = value;
            continue;
        }
        entries.push_back({section + "." + key, value, line_no});
    }

    ModelConfig config = preset_text.empty() ? ModelConfig{} : preset(preset_from_name(preset_text));
    for (const auto& e : entries) {
        try {
            if (e.path != "orientation.mode") {
                // File entries must state their unit.
                const auto v = trim(e.value);
                const auto space = v.find_first_of(" \t");
                if (space == std::string_view::npos)
                    throw UsageError("missing unit for " + e.path + " (expected e.g. '" + canonical_unit(e.path) +
                                     "')");
            }
            set_parameter(config, e.path, std::string_view(e.value));
        } catch (const UsageError& err) {
            throw UsageError("line " + std::to_string(e.line) + ": " + err.what());
        }
    }
    return config;
}

ModelConfig parse_config_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("invalid JSON config: ") + e.what());
    }
    if (!doc.is_object()) throw UsageError("JSON config must be an object");

    ModelConfig config = doc.contains("preset") ? preset(preset_from_name(doc["preset"].get<std::string>()))
                                                : ModelConfig{};
    for (const auto& [section, body] : doc.items()) {
        if (section == "preset") continue;
        if (!body.is_object()) throw UsageError("JSON section '" + section + "' must be an object");
        for (const auto& [key, entry] : body.items()) {
            const auto path = section + "." + key;
            if (path == "orientation.mode") {
                config.orientation.mode = parse_mode(entry.get<std::string>());
                continue;
            }
            if (!entry.is_object() || !entry.contains("value") || !entry.contains("unit"))
                throw UsageError("JSON entry " + path + " must be {\"value\": ..., \"unit\": ...}");
            set_parameter(config, path,
                          to_canonical(path, entry["value"].get<double>(), entry["unit"].get<std::string>()));
        }
    }
    return config;
}

ModelConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
    return is_json ? parse_config_json(ss.str()) : parse_config_text(ss.str());
}

std::string to_config_text(const ModelConfig& config) {
    std::ostringstream out;
    std::string section;
    ModelConfig c = config;
    for (const auto& p : registry()) {
        const auto dot = p.path.find('.');
        const auto sec = p.path.substr(0, dot);
        if (sec != section) {
            section = std::string(sec);
            out << (out.tellp() > 0 ? "\n" : "") << "[" << section << "]\n";
            if (section == "orientation") out << "mode = " << mode_name(config.orientation.mode) << "\n";
        }
        out << p.path.substr(dot + 1) << " = " << format_double(p.ref(c)) << " " << units_of(p.dim).front().name
            << "\n";
    }
    if (config.g_rate_override) out << "\n[overrides]\ng_rate = " << format_double(*config.g_rate_override) << " rad/s\n";
    return out.str();
}

std::string to_config_json(const ModelConfig& config) {
    nlohmann::ordered_json doc;
    ModelConfig c = config;
    for (const auto& p : registry()) {
        const auto dot = p.path.find('.');
        const auto sec = std::string(p.path.substr(0, dot));
        const auto key = std::string(p.path.substr(dot + 1));
        if (sec == "orientation" && !doc.contains("orientation"))
            doc["orientation"]["mode"] = std::string(mode_name(config.orientation.mode));
        doc[sec][key] = {{"value", p.ref(c)}, {"unit", std::string(units_of(p.dim).front().name)}};
    }
    if (config.g_rate_override) doc["overrides"]["g_rate"] = {{"value", *config.g_rate_override}, {"unit", "rad/s"}};
    return doc.dump(2);
}

std::uint64_t config_hash(const ModelConfig& config) {
    std::uint64_t h = 14695981039346656037ull;
    for (const unsigned char ch : to_config_text(config)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace ltm

#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nvscope::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && quoted) {
            ++i;
        } else if (line[i] == '"') {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string unquote(const std::string& v, std::size_t lineno) {
    if (v.size() < 2 || v.back() != '"') throw ConfigError("line " + std::to_string(lineno) + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (v[i] != '\\') {
            out += v[i];
            continue;
        }
        if (++i + 1 > v.size() - 1) throw ConfigError("line " + std::to_string(lineno) + ": dangling escape");
        switch (v[i]) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            default: throw ConfigError("line " + std::to_string(lineno) + ": unsupported escape \\" + v[i]);
        }
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
    return out;
}

unsigned long long to_uint(const std::string& key, const std::string& v, unsigned long long max) {
    unsigned long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size() || out > max)
        throw ConfigError("invalid integer for " + key + ": '" + v + "' (0.." + std::to_string(max) + ")");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

}  // namespace

const std::map<std::string, std::string>& known_keys() {
    static const std::map<std::string, std::string> keys = {
        {"pll.ref_mhz", "reference oscillator (MHz)"},
        {"pll.r_counter", "reference divider R (1..1023)"},
        {"pll.doubler", "reference doubler"},
        {"pll.rdiv2", "reference divide-by-2"},
        {"nv.d_mhz", "zero-field splitting D (MHz)"},
        {"nv.e_mhz", "strain E (MHz)"},
        {"nv.gamma_mhz_per_mt", "gyromagnetic ratio (MHz/mT)"},
        {"nv.linewidth_mhz", "dip HWHM (MHz)"},
        {"nv.contrast", "dip contrast (0..1)"},
        {"nv.baseline_mv", "off-resonance signal (mV)"},
        {"sweep.start_mhz", "first frequency (MHz)"},
        {"sweep.stop_mhz", "last frequency (MHz)"},
        {"sweep.step_mhz", "step (MHz)"},
        {"sweep.n_avg", "ADC samples averaged per point"},
        {"sweep.settle_ms", "settling time per point (ms)"},
        {"serial.port", "serial device path"},
        {"serial.baud", "baud rate"},
        {"serial.timeout_ms", "per-frame response timeout (ms)"},
    };
    return keys;
}

void CliConfig::validate() const {
    try {
        pll.validate();
        nv.validate();
        sweep.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    if (timeout.count() <= 0) throw ConfigError("invalid configuration: serial.timeout_ms must be > 0");
}

Settings parse_toml(const std::string& text) {
    Settings out;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' outside a section");
        if (value.front() == '"') value = unquote(value, lineno);
        out[section + "." + key] = value;
    }
    return out;
}

Settings load_toml_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return parse_toml(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

Settings settings_from_env(const EnvLookup& env) {
    Settings out;
    if (auto v = env("NVSCOPE_PORT")) out["serial.port"] = *v;
    for (const auto& [key, _] : known_keys()) {
        std::string name = "NVSCOPE_" + upper(key);
        std::replace(name.begin(), name.end(), '.', '_');
        if (auto v = env(name)) out[key] = *v;
    }
    return out;
}

void apply_settings(CliConfig& cfg, const Settings& settings) {
    for (const auto& [key, raw] : settings) {
        const std::string v = trim(raw);
        if (key == "pll.ref_mhz") cfg.pll.ref_mhz = to_double(key, v);
        else if (key == "pll.r_counter") cfg.pll.r_counter = static_cast<std::uint32_t>(to_uint(key, v, 1023));
        else if (key == "pll.doubler") cfg.pll.doubler = to_bool(key, v);
        else if (key == "pll.rdiv2") cfg.pll.rdiv2 = to_bool(key, v);
        else if (key == "nv.d_mhz") cfg.nv.d_mhz = to_double(key, v);
        else if (key == "nv.e_mhz") cfg.nv.e_mhz = to_double(key, v);
        else if (key == "nv.gamma_mhz_per_mt") cfg.nv.gamma_mhz_per_mt = to_double(key, v);
        else if (key == "nv.linewidth_mhz") cfg.nv.linewidth_mhz = to_double(key, v);
        else if (key == "nv.contrast") cfg.nv.contrast = to_double(key, v);
        else if (key == "nv.baseline_mv") cfg.nv.baseline_mv = to_double(key, v);
        else if (key == "sweep.start_mhz") cfg.sweep.start_mhz = to_double(key, v);
        else if (key == "sweep.stop_mhz") cfg.sweep.stop_mhz = to_double(key, v);
        else if (key == "sweep.step_mhz") cfg.sweep.step_mhz = to_double(key, v);
        else if (key == "sweep.n_avg") cfg.sweep.n_avg = static_cast<std::uint16_t>(to_uint(key, v, 65535));
        else if (key == "sweep.settle_ms") cfg.sweep.settle_ms = static_cast<std::uint16_t>(to_uint(key, v, 65535));
        else if (key == "serial.port") cfg.serial.port = v;
        else if (key == "serial.baud") cfg.serial.baud = static_cast<unsigned>(to_uint(key, v, 4'000'000));
        else if (key == "serial.timeout_ms") cfg.timeout = std::chrono::milliseconds(to_uint(key, v, 3'600'000));
        else throw ConfigError("unknown configuration key '" + key + "'");
    }
}

}  // namespace nvscope::cli

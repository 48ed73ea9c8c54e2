#include "nvscope/spectrum_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace nvscope {

namespace {

std::string format_khz_as_mhz(std::uint32_t khz, bool fixed3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%u.%03u", khz / 1000, khz % 1000);
    std::string s(buf);
    if (!fixed3) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, std::size_t line, const std::string& what) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
        throw ParseError(line, "invalid number for " + what + ": '" + t + "'");
    return v;
}

unsigned long parse_uint(const std::string& s, std::size_t line, const std::string& what, unsigned long max) {
    const std::string t = trim(s);
    unsigned long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty() || v > max)
        throw ParseError(line, "invalid integer for " + what + ": '" + t + "'");
    return v;
}

std::uint32_t parse_mhz_to_khz(const std::string& s, std::size_t line, const std::string& what) {
    const double mhz = parse_double(s, line, what);
    if (!(mhz >= 0.0) || mhz > 4.0e6) throw ParseError(line, what + " out of range");
    return static_cast<std::uint32_t>(std::llround(mhz * 1000.0));
}

}  // namespace

std::string format_signal(double mv) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", mv);
    return buf;
}

void write_spectrum_csv(const Spectrum& spec, std::ostream& os) {
    const SweepPlan& p = spec.meta.plan;
    os << "# version=" << kSpectrumCsvVersion << '\n';
    os << "# start_mhz=" << format_khz_as_mhz(p.start_khz(), false) << '\n';
    os << "# stop_mhz=" << format_khz_as_mhz(p.stop_khz(), false) << '\n';
    os << "# step_mhz=" << format_khz_as_mhz(p.step_khz(), false) << '\n';
    os << "# n_avg=" << p.n_avg << '\n';
    os << "# settle_ms=" << p.settle_ms << '\n';
    os << "# source=" << to_string(spec.meta.source) << '\n';
    os << "# baseline_applied=" << (spec.meta.baseline_applied ? "true" : "false") << '\n';
    os << "# timestamp=" << spec.meta.timestamp << '\n';
    if (!spec.meta.device.empty()) os << "# device=" << spec.meta.device << '\n';
    os << "f_mhz,signal_mv,n_avg\n";
    for (const auto& pt : spec.points) {
        os << format_khz_as_mhz(pt.f_khz, true) << ',' << format_signal(pt.signal_mv) << ',' << pt.n_avg << '\n';
    }
}

std::string spectrum_to_csv(const Spectrum& spec) {
    std::ostringstream os;
    write_spectrum_csv(spec, os);
    return os.str();
}

Spectrum read_spectrum_csv(std::istream& is) {
    std::map<std::string, std::pair<std::string, std::size_t>> header;
    std::string line;
    std::size_t lineno = 0;
    bool saw_columns = false;
    Spectrum spec;

    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!saw_columns) {
            if (line.rfind('#', 0) == 0) {
                const std::string body = trim(line.substr(1));
                const auto eq = body.find('=');
                if (eq == std::string::npos) throw ParseError(lineno, "header line without key=value");
                header[trim(body.substr(0, eq))] = {trim(body.substr(eq + 1)), lineno};
                continue;
            }
            if (trim(line) != "f_mhz,signal_mv,n_avg")
                throw ParseError(lineno, "expected column header 'f_mhz,signal_mv,n_avg'");
            saw_columns = true;

            auto require = [&](const char* key) -> std::pair<std::string, std::size_t> {
                const auto it = header.find(key);
                if (it == header.end()) throw ParseError(lineno, std::string("missing header key '") + key + "'");
                return it->second;
            };
            const auto [version, vline] = require("version");
            if (parse_uint(version, vline, "version", 1000) != static_cast<unsigned long>(kSpectrumCsvVersion))
                throw ParseError(vline, "unsupported version " + version);
            const auto [start, sline] = require("start_mhz");
            const auto [stop, tline] = require("stop_mhz");
            const auto [step, pline] = require("step_mhz");
            const auto [navg, nline] = require("n_avg");
            const auto [source, oline] = require("source");
            const auto [baseline, bline] = require("baseline_applied");
            const auto [stamp, mline] = require("timestamp");
            (void)mline;

            SweepPlan& plan = spec.meta.plan;
            plan.start_mhz = parse_mhz_to_khz(start, sline, "start_mhz") / 1000.0;
            plan.stop_mhz = parse_mhz_to_khz(stop, tline, "stop_mhz") / 1000.0;
            plan.step_mhz = parse_mhz_to_khz(step, pline, "step_mhz") / 1000.0;
            plan.n_avg = static_cast<std::uint16_t>(parse_uint(navg, nline, "n_avg", 65535));
            if (const auto it = header.find("settle_ms"); it != header.end())
                plan.settle_ms = static_cast<std::uint16_t>(parse_uint(it->second.first, it->second.second, "settle_ms", 65535));
            try {
                spec.meta.source = source_from_string(source);
            } catch (const InvariantViolation& e) {
                throw ParseError(oline, e.what());
            }
            if (baseline != "true" && baseline != "false") throw ParseError(bline, "baseline_applied must be true|false");
            spec.meta.baseline_applied = baseline == "true";
            spec.meta.timestamp = stamp;
            if (const auto it = header.find("device"); it != header.end()) spec.meta.device = it->second.first;
            continue;
        }

        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (cols.size() != 3) throw ParseError(lineno, "expected 3 columns, found " + std::to_string(cols.size()));
        SpectrumPoint pt;
        pt.f_khz = parse_mhz_to_khz(cols[0], lineno, "f_mhz");
        pt.signal_mv = parse_double(cols[1], lineno, "signal_mv");
        pt.n_avg = static_cast<std::uint16_t>(parse_uint(cols[2], lineno, "n_avg", 65535));
        spec.points.push_back(pt);
    }
    if (!saw_columns) throw ParseError(lineno, "missing column header 'f_mhz,signal_mv,n_avg'");
    spec.meta.plan.validate();
    spec.validate();
    return spec;
}

Spectrum spectrum_from_csv(const std::string& text) {
    std::istringstream is(text);
    return read_spectrum_csv(is);
}

void save_spectrum(const Spectrum& spec, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_spectrum_csv(spec, os);
    os.flush();
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

Spectrum load_spectrum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
    return read_spectrum_csv(is);
}

}  // namespace nvscope

#include "cli.hpp"

#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "nvscope/analysis.hpp"
#include "nvscope/controller.hpp"
#include "nvscope/report_json.hpp"
#include "nvscope/simulator.hpp"
#include "nvscope/spectrum_io.hpp"
#include "nvscope/svg_plot.hpp"
#include "nvscope/transport.hpp"

namespace nvscope::cli {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string hex32(std::uint32_t w) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", w);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Options shared by every subcommand, collected before configuration is merged.
struct Invocation {
    Settings flags;
    std::string config_path;

    double freq_mhz = 0.0;
    double b_mt = 0.0;
    double noise_mv = 1.0;
    std::uint64_t seed = 1;
    std::string out_path;
    std::string timestamp;
    bool serve_pty = false;
    int serve_idle_ms = 0;
    std::vector<std::string> in_paths;
    std::vector<std::string> labels;
    std::string report_path;
    std::string title = "ODMR spectrum";
};

void add_setting(CLI::App* sub, Invocation& inv, const std::string& flag, const std::string& key) {
    sub->add_option_function<std::string>(
        flag, [&inv, key](const std::string& v) { inv.flags[key] = v; }, known_keys().at(key));
}

void add_switch(CLI::App* sub, Invocation& inv, const std::string& flag, const std::string& key) {
    sub->add_flag_function(
        flag, [&inv, key](std::int64_t) { inv.flags[key] = "true"; }, known_keys().at(key));
}

void add_pll_flags(CLI::App* sub, Invocation& inv) {
    add_setting(sub, inv, "--ref-mhz", "pll.ref_mhz");
    add_setting(sub, inv, "--r-counter", "pll.r_counter");
    add_switch(sub, inv, "--doubler", "pll.doubler");
    add_switch(sub, inv, "--rdiv2", "pll.rdiv2");
}

void add_sweep_flags(CLI::App* sub, Invocation& inv) {
    add_setting(sub, inv, "--start-mhz", "sweep.start_mhz");
    add_setting(sub, inv, "--stop-mhz", "sweep.stop_mhz");
    add_setting(sub, inv, "--step-mhz", "sweep.step_mhz");
    add_setting(sub, inv, "--avg", "sweep.n_avg");
    add_setting(sub, inv, "--settle-ms", "sweep.settle_ms");
}

void add_nv_flags(CLI::App* sub, Invocation& inv) {
    add_setting(sub, inv, "--d-mhz", "nv.d_mhz");
    add_setting(sub, inv, "--e-mhz", "nv.e_mhz");
    add_setting(sub, inv, "--gamma", "nv.gamma_mhz_per_mt");
    add_setting(sub, inv, "--linewidth-mhz", "nv.linewidth_mhz");
    add_setting(sub, inv, "--contrast", "nv.contrast");
    add_setting(sub, inv, "--baseline-mv", "nv.baseline_mv");
}

void add_serial_flags(CLI::App* sub, Invocation& inv) {
    add_setting(sub, inv, "--port", "serial.port");
    add_setting(sub, inv, "--baud", "serial.baud");
    add_setting(sub, inv, "--timeout-ms", "serial.timeout_ms");
}

CliConfig merge_config(const Invocation& inv, const EnvLookup& env) {
    CliConfig cfg;
    std::string path = inv.config_path;
    if (path.empty()) {
        if (auto p = env("NVSCOPE_CONFIG")) path = *p;
    }
    if (!path.empty()) apply_settings(cfg, load_toml_file(path));
    apply_settings(cfg, settings_from_env(env));
    apply_settings(cfg, inv.flags);
    cfg.validate();
    return cfg;
}

int cmd_registers(const Invocation& inv, const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    pll::FrequencyPlan plan;
    try {
        plan = pll::plan_frequency(cfg.pll, inv.freq_mhz * 1000.0);
    } catch (const pll::PllError& e) {
        err << "error: " << e.what() << '\n';
        return e.kind() == pll::PllErrorKind::OutOfRange ? kExitOutOfRange : kExitConfig;
    }
    const pll::RegisterSet regs = pll::encode_registers(plan, cfg.pll);
    out << "f_target_mhz=" << fixed(plan.f_target_khz / 1000.0, 6) << '\n';
    out << "f_actual_mhz=" << fixed(plan.f_actual_khz / 1000.0, 6) << '\n';
    out << "error_hz=" << fixed(pll::exact_error_hz(cfg.pll, plan), 3) << '\n';
    out << "f_pfd_mhz=" << fixed(plan.f_pfd_khz / 1000.0, 6) << '\n';
    out << "f_vco_mhz=" << fixed(plan.f_vco_khz() / 1000.0, 6) << '\n';
    out << "RF_DIV=" << plan.rf_divider() << '\n';
    out << "INT=" << plan.int_n << " FRAC=" << plan.frac << " MOD=" << plan.mod << '\n';
    for (std::size_t i = 0; i < regs.words.size(); ++i) out << 'R' << i << '=' << hex32(regs.words[i]) << '\n';
    return kExitOk;
}

int cmd_sweep_table(const Invocation& inv, const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    std::vector<pll::SweepTableEntry> table;
    try {
        table = pll::build_sweep_table(cfg.pll, cfg.sweep);
    } catch (const pll::PllError& e) {
        err << "error: " << e.what() << '\n';
        return e.kind() == pll::PllErrorKind::OutOfRange ? kExitOutOfRange : kExitConfig;
    }
    if (inv.out_path.empty()) {
        for (const auto& e : table) {
            out << e.f_khz;
            for (const auto w : e.regs.words) out << ' ' << hex32(w);
            out << '\n';
        }
        return kExitOk;
    }
    const auto bytes = pll::serialize_sweep_table(table);
    try {
        write_file(inv.out_path, bytes);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    out << "wrote " << table.size() << " entries (" << pll::kSweepEntryBytes << " bytes each, " << bytes.size()
        << " bytes total) to " << inv.out_path << '\n';
    return kExitOk;
}

sim::SimConfig sim_config(const Invocation& inv, const CliConfig& cfg) {
    sim::SimConfig sc;
    sc.params = cfg.nv;
    sc.field = physics::MagneticField::axial(inv.b_mt);
    sc.field.validate();
    sc.noise_sigma_mv = inv.noise_mv;
    sc.seed = inv.seed;
    return sc;
}

void print_dip_hints(const Spectrum& spec, const CliConfig& cfg, std::ostream& out) {
    try {
        const auto report = analysis::analyze(spec, cfg.nv);
        out << "dips near";
        for (double c : report.candidates_mhz) out << ' ' << fixed(c, 1) << " MHz";
        out << '\n';
    } catch (const analysis::AnalyzeError& e) {
        if (!e.partial().candidates_mhz.empty()) {
            out << "dips near";
            for (double c : e.partial().candidates_mhz) out << ' ' << fixed(c, 1) << " MHz";
            out << '\n';
        } else {
            out << "no dips detected\n";
        }
    }
}

int cmd_simulate(const Invocation& inv, const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!(inv.noise_mv >= 0.0) || !std::isfinite(inv.noise_mv)) {
        err << "error: --noise-mv must be >= 0\n";
        return kExitConfig;
    }
    sim::SimConfig sc;
    try {
        sc = sim_config(inv, cfg);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    sim::SimDevice device(sc);

    if (inv.serve_pty) {
        try {
            PtyPair pty;
            g_stop.store(false);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            out << "serving simulator on " << pty.slave_path() << std::endl;
            sim::serve(device, pty.master_fd(), pty.master_fd(), g_stop, std::chrono::milliseconds(inv.serve_idle_ms));
        } catch (const TransportError& e) {
            err << "error: " << e.what() << '\n';
            return kExitIo;
        }
        return kExitOk;
    }

    if (inv.out_path.empty()) {
        err << "error: --out is required\n";
        return kExitUsage;
    }
    SimTransport transport(device);
    Spectrum spec;
    try {
        spec = controller::run_sweep(transport, cfg.sweep, cfg.timeout);
    } catch (const controller::AcquisitionError& e) {
        err << "error: simulated acquisition failed at stage '" << e.stage() << "': " << e.what() << '\n';
        return kExitAcquire;
    }
    if (!inv.timestamp.empty()) spec.meta.timestamp = inv.timestamp;
    try {
        save_spectrum(spec, inv.out_path);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    out << "wrote " << spec.size() << " points to " << inv.out_path << '\n';
    print_dip_hints(spec, cfg, out);
    return kExitOk;
}

int cmd_acquire(const Invocation& inv, const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    if (inv.out_path.empty()) {
        err << "error: --out is required\n";
        return kExitUsage;
    }
    if (cfg.serial.port.empty()) {
        err << "error: no serial port configured (--port, NVSCOPE_PORT or [serial] port)\n";
        return kExitAcquire;
    }
    std::unique_ptr<FdTransport> transport;
    try {
        transport = open_serial(cfg.serial);
    } catch (const TransportError& e) {
        err << "error: " << e.what() << '\n';
        return kExitAcquire;
    }
    Spectrum spec;
    controller::SweepControl control;
    try {
        spec = controller::run_sweep(*transport, cfg.sweep, cfg.timeout, &control);
    } catch (const controller::AcquisitionError& e) {
        err << "error: acquisition on '" << cfg.serial.port << "' failed at stage '" << e.stage() << "' ("
            << controller::to_string(e.kind()) << ", " << e.points_received() << " of " << cfg.sweep.point_count()
            << " points received): " << e.what() << '\n';
        return kExitAcquire;
    } catch (const TransportError& e) {
        err << "error: '" << cfg.serial.port << "': " << e.what() << '\n';
        return kExitAcquire;
    }
    if (!inv.timestamp.empty()) spec.meta.timestamp = inv.timestamp;
    try {
        save_spectrum(spec, inv.out_path);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    out << "acquired " << spec.size() << " points from " << cfg.serial.port << " (" << spec.meta.device << ") to "
        << inv.out_path << '\n';
    return kExitOk;
}

int cmd_analyze(const Invocation& inv, const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    Spectrum spec;
    try {
        spec = load_spectrum(inv.in_paths.front());
    } catch (const std::exception& e) {
        err << "error: " << inv.in_paths.front() << ": " << e.what() << '\n';
        return kExitIo;
    }

    auto save_report = [&](const std::string& json) {
        if (inv.report_path.empty()) return true;
        try {
            write_file(inv.report_path, json);
            return true;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            return false;
        }
    };

    analysis::Report report;
    try {
        report = analysis::analyze(spec, cfg.nv);
    } catch (const analysis::AnalyzeError& e) {
        err << "error: analysis failed in stage '" << e.stage() << "' (" << analysis::to_string(e.kind())
            << "): " << e.what() << '\n';
        analysis::Report partial = e.partial();
        partial.fit.converged = false;
        const ReportFailure failure{e.stage(), analysis::to_string(e.kind()), e.what()};
        save_report(report_to_json(partial, failure, false));
        return kExitFit;
    }

    const auto& f = report.field;
    out << "B∥ = " << fixed(f.b_parallel_mt, 3) << " mT ± " << fixed(f.sigma_b_mt, 3) << " (splitting "
        << fixed(f.splitting_mhz, 1) << " MHz)\n";
    if (f.clamped) out << "note: splitting is below 2E; field reported as 0 (upper bound from sigma)\n";
    if (!save_report(report_to_json(report))) return kExitIo;
    return kExitOk;
}

int cmd_plot(const Invocation& inv, std::ostream& out, std::ostream& err) {
    std::vector<PlotTrace> traces;
    for (std::size_t i = 0; i < inv.in_paths.size(); ++i) {
        const std::string& path = inv.in_paths[i];
        Spectrum spec;
        try {
            spec = load_spectrum(path);
        } catch (const std::exception& e) {
            err << "error: " << path << ": " << e.what() << '\n';
            return kExitIo;
        }
        if (!spec.meta.baseline_applied) {
            try {
                spec = controller::baseline_adjust(spec);
            } catch (const std::exception& e) {
                err << "error: " << path << ": " << e.what() << '\n';
                return kExitIo;
            }
        }
        PlotTrace t;
        t.label = i < inv.labels.size() ? inv.labels[i] : std::filesystem::path(path).stem().string();
        t.f_mhz = spec.frequencies_mhz();
        t.y_mv = spec.signals_mv();
        traces.push_back(std::move(t));
    }

    std::vector<double> centers;
    if (!inv.report_path.empty()) {
        try {
            centers = report_centers(read_file(inv.report_path));
        } catch (const std::exception& e) {
            err << "error: " << inv.report_path << ": " << e.what() << '\n';
            return kExitIo;
        }
    }

    PlotOptions opt;
    opt.title = inv.title;
    try {
        write_file(inv.out_path, render_svg(traces, centers, opt));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    out << "wrote " << inv.out_path << " (" << traces.size() << " trace" << (traces.size() == 1 ? "" : "s") << ")\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    CLI::App app{"nvscope: ODMR sweep planning, acquisition and field analysis", "nvscope"};
    app.require_subcommand(1);
    app.fallthrough();
    Invocation inv;
    app.add_option("--config", inv.config_path, "TOML config file (default: $NVSCOPE_CONFIG)");

    auto* reg = app.add_subcommand("registers", "plan one frequency and print the six ADF4351 register words");
    reg->add_option("--freq-mhz", inv.freq_mhz, "output frequency (MHz)")->required();
    add_pll_flags(reg, inv);

    auto* table = app.add_subcommand("sweep-table", "build the per-frequency register table for a sweep");
    table->add_option("--out", inv.out_path, "binary output file (hex text on stdout when omitted)");
    add_pll_flags(table, inv);
    add_sweep_flags(table, inv);

    auto* simulate = app.add_subcommand("simulate", "acquire a spectrum from the built-in device simulator");
    simulate->add_option("--b-mt", inv.b_mt, "axial magnetic field (mT)");
    simulate->add_option("--noise-mv", inv.noise_mv, "Gaussian noise per ADC sample (mV)");
    simulate->add_option("--seed", inv.seed, "noise seed");
    simulate->add_option("--out", inv.out_path, "spectrum CSV");
    simulate->add_option("--timestamp", inv.timestamp, "timestamp recorded in the CSV (default: now)");
    simulate->add_flag("--serve-pty", inv.serve_pty, "serve the simulator on a pseudo-terminal instead");
    simulate->add_option("--serve-idle-ms", inv.serve_idle_ms, "with --serve-pty: exit after this much silence");
    add_nv_flags(simulate, inv);
    add_sweep_flags(simulate, inv);
    add_setting(simulate, inv, "--timeout-ms", "serial.timeout_ms");

    auto* acquire = app.add_subcommand("acquire", "run a sweep on a device over a serial port");
    acquire->add_option("--out", inv.out_path, "spectrum CSV");
    acquire->add_option("--timestamp", inv.timestamp, "timestamp recorded in the CSV (default: now)");
    add_serial_flags(acquire, inv);
    add_sweep_flags(acquire, inv);

    auto* analyze = app.add_subcommand("analyze", "fit a spectrum and estimate the axial field");
    analyze->add_option("--in", inv.in_paths, "spectrum CSV")->required()->expected(1);
    analyze->add_option("--report", inv.report_path, "JSON report output");
    add_nv_flags(analyze, inv);

    auto* plot = app.add_subcommand("plot", "render one or more spectra as an SVG line chart");
    plot->add_option("--in", inv.in_paths, "spectrum CSV (repeat to overlay)")->required()->expected(1, 4);
    plot->add_option("--label", inv.labels, "legend label per input, in order");
    plot->add_option("--report", inv.report_path, "analysis report whose fitted centers are marked");
    plot->add_option("--out", inv.out_path, "SVG output")->required();
    plot->add_option("--title", inv.title, "chart title");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    CliConfig cfg;
    try {
        cfg = merge_config(inv, env);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    if (reg->parsed()) return cmd_registers(inv, cfg, out, err);
    if (table->parsed()) return cmd_sweep_table(inv, cfg, out, err);
    if (simulate->parsed()) return cmd_simulate(inv, cfg, out, err);
    if (acquire->parsed()) return cmd_acquire(inv, cfg, out, err);
    if (analyze->parsed()) return cmd_analyze(inv, cfg, out, err);
    if (plot->parsed()) return cmd_plot(inv, out, err);
    return kExitUsage;
}

}  // namespace nvscope::cli

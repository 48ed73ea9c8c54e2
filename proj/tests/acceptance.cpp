// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "nvscope/analysis.hpp"
#include "nvscope/controller.hpp"
#include "nvscope/physics.hpp"
#include "nvscope/pll.hpp"
#include "nvscope/protocol.hpp"
#include "nvscope/report_json.hpp"
#include "nvscope/simulator.hpp"
#include "nvscope/spectrum_io.hpp"
#include "nvscope/transport.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nvscope;
using namespace std::chrono_literals;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int run_cli_quiet(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::ostringstream o, e;
    const int code = cli::run_cli(args, o, e, [](const std::string&) { return std::optional<std::string>{}; });
    if (out) *out = o.str();
    if (code != 0) std::fprintf(stderr, "  nvscope %s -> %d: %s", args.front().c_str(), code, e.str().c_str());
    return code;
}

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Outcome resonance_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int points = 0;
    for (int bi = 0; bi <= 20; ++bi) {
        for (int e = 0; e <= 10; ++e) {
            physics::NvParameters p;
            p.e_mhz = e;
            const double b = 0.5 * bi;
            const auto closed = physics::resonance_pair(p, b);
            const auto eig = physics::hamiltonian_resonances(p, physics::MagneticField::axial(b));
            worst = std::max({worst, std::abs(closed.nu_minus_mhz - eig.nu_minus_mhz),
                              std::abs(closed.nu_plus_mhz - eig.nu_plus_mhz)});
            ++points;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {points == 231 && worst < 1e-6 && secs < 1.0,
            std::to_string(points) + " points, max deviation " + fmt("%.2e MHz", worst) + ", " + fmt("%.3f s", secs)};
}

Outcome sweep_representable() {
    const pll::PllConfig cfg;
    const SweepPlan sweep;
    int exact = 0;
    double worst_hz = 0.0;
    for (std::size_t i = 0; i < sweep.point_count(); ++i) {
        const double target_khz = sweep.start_khz() + static_cast<double>(i * sweep.step_khz());
        const auto plan = pll::plan_frequency(cfg, target_khz);
        const double decoded = pll::decode_frequency(pll::encode_registers(plan, cfg), cfg);
        const double err = std::abs(pll::exact_error_hz(cfg, plan));
        worst_hz = std::max(worst_hz, err);
        if (decoded == target_khz && err == 0.0) ++exact;
    }
    return {exact == 129 && sweep.point_count() == 129,
            std::to_string(exact) + "/129 frequencies exact, max error " + fmt("%.0f Hz", worst_hz)};
}

Outcome table_budget() {
    const pll::PllConfig cfg;
    const auto table = pll::build_sweep_table(cfg, SweepPlan{});
    const auto bytes = pll::serialize_sweep_table(table);
    const std::size_t per_entry = (bytes.size() - pll::kSweepHeaderBytes) / table.size();
    return {per_entry == 28 && per_entry <= 30 && bytes.size() == pll::kSweepHeaderBytes + 28 * table.size(),
            std::to_string(per_entry) + " bytes per entry, " + std::to_string(bytes.size()) + " bytes for " +
                std::to_string(table.size()) + " entries"};
}

Spectrum simulate(double b_mt, std::uint64_t seed) {
    sim::SimConfig c;
    c.field = physics::MagneticField::axial(b_mt);
    c.noise_sigma_mv = 1.0;
    c.seed = seed;
    sim::SimDevice dev(c);
    SimTransport t(dev);
    return controller::run_sweep(t, SweepPlan{}, 500ms);
}

Outcome magnet_end_to_end() {
    const auto t0 = std::chrono::steady_clock::now();
    const physics::NvParameters params;
    int passed = 0;
    double worst_b = 0.0, worst_split = 0.0, worst_b0 = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        try {
            const auto magnet = analysis::analyze(simulate(7.5, seed), params);
            const auto none = analysis::analyze(simulate(0.0, seed), params);
            const double db = std::abs(magnet.field.b_parallel_mt - 7.5);
            const double ds = std::abs(magnet.field.splitting_mhz - 420.0);
            worst_b = std::max(worst_b, db);
            worst_split = std::max(worst_split, ds);
            worst_b0 = std::max(worst_b0, none.field.b_parallel_mt);
            if (db < 0.2 && ds < 8.0 && none.field.b_parallel_mt < 0.2) ++passed;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "  seed %llu: %s\n", static_cast<unsigned long long>(seed), e.what());
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {passed >= 19 && secs < 10.0,
            std::to_string(passed) + "/20 seeds, max |dB| " + fmt("%.3f mT", worst_b) + ", max |d split| " +
                fmt("%.2f MHz", worst_split) + ", max B(no magnet) " + fmt("%.3f mT", worst_b0) + ", " +
                fmt("%.2f s", secs)};
}

Outcome jacobian_check() {
    nvtest::Gen g(5);
    std::vector<double> f;
    for (double x = 2614.0; x <= 3126.0; x += 4.0) f.push_back(x);
    double worst = 0.0, worst_active = 0.0;
    const auto& active = kernels::active();
    const auto& scalar = kernels::table(kernels::Isa::Scalar);
    for (int trial = 0; trial < 100; ++trial) {
        const kernels::LorentzParams p{g.uniform(50, 300),   g.uniform(0, 60), g.uniform(0, 60), g.uniform(2620, 3120),
                                       g.uniform(2620, 3120), g.uniform(1, 30), g.uniform(1, 30)};
        worst = std::max(worst, nvtest::jacobian_fd_error(p, f));
        std::vector<double> ja(f.size() * kernels::kParamCount), js(ja.size());
        active.jacobian(p, f.data(), ja.data(), f.size());
        scalar.jacobian(p, f.data(), js.data(), f.size());
        for (std::size_t i = 0; i < ja.size(); ++i)
            worst_active = std::max(worst_active, std::abs(ja[i] - js[i]) / std::max(1.0, std::abs(js[i])));
    }
    return {worst < 1e-6 && worst_active < 1e-12,
            "100 points, max relative error " + fmt("%.2e", worst) + ", " + std::string(kernels::to_string(active.isa)) +
                " vs scalar " + fmt("%.1e", worst_active)};
}

Outcome protocol_robustness() {
    using namespace protocol;
    nvtest::Gen g(6);

    FrameDecoder fuzz;
    std::size_t fuzzed = 0, fuzz_frames = 0;
    while (fuzzed < 1'000'000) {
        auto chunk = g.bytes(g.integer(1, 4096));
        // bias towards plausible headers so the length/CRC paths are exercised
        for (auto& b : chunk)
            if (g.integer(0, 63) == 0) b = kSof;
        fuzzed += chunk.size();
        fuzz_frames += fuzz.feed(chunk).frames.size();
    }
    const bool bounded = fuzz.peak_buffered() <= kMaxFrameBytes;

    std::vector<std::uint8_t> known;
    for (int c = 0; c < 256; ++c)
        if (is_known_type(static_cast<std::uint8_t>(c))) known.push_back(static_cast<std::uint8_t>(c));
    std::vector<Frame> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 10'000; ++i) {
        Frame f;
        f.ftype = known[g.integer(0, known.size() - 1)];
        f.seq = g.byte();
        f.payload = g.bytes(g.integer(0, g.coin() ? 16 : kMaxPayload));
        const auto enc = encode_frame(f);
        stream.insert(stream.end(), enc.begin(), enc.end());
        sent.push_back(std::move(f));
    }
    FrameDecoder dec;
    std::vector<Frame> got;
    std::size_t errors = 0;
    for (std::size_t pos = 0; pos < stream.size();) {
        const std::size_t n = std::min<std::size_t>(g.integer(1, 700), stream.size() - pos);
        auto out = dec.feed(std::span<const std::uint8_t>(stream.data() + pos, n));
        errors += out.errors.size();
        for (auto& fr : out.frames) got.push_back(std::move(fr));
        pos += n;
    }
    const bool round_trip = got == sent && errors == 0 && dec.buffered() == 0;

    const std::string check = "123456789";
    const std::uint16_t crc = crc16({reinterpret_cast<const std::uint8_t*>(check.data()), check.size()});

    char crc_text[16];
    std::snprintf(crc_text, sizeof crc_text, "0x%04X", crc);
    return {bounded && round_trip && crc == 0x29B1,
            std::to_string(fuzzed) + " fuzz bytes (peak buffer " + std::to_string(fuzz.peak_buffered()) + " <= " +
                std::to_string(kMaxFrameBytes) + "), " + std::to_string(got.size()) + "/10000 frames round-tripped, CRC " +
                crc_text};
}

Outcome pll_round_trip() {
    nvtest::Gen g(7);
    const pll::PllConfig cfg;
    int ok = 0;
    double worst_ratio = 0.0;
    for (int i = 0; i < 10'000; ++i) {
        const double target = static_cast<double>(g.integer(35'000'000, 4'400'000'000ULL)) / 1000.0;  // kHz, 1 Hz grid
        const auto plan = pll::plan_frequency(cfg, target);
        const double bound = cfg.f_pfd_khz() * 1000.0 / (2.0 * pll::kModMax * plan.rf_divider());
        const double err = std::abs(pll::exact_error_hz(cfg, plan));
        worst_ratio = std::max(worst_ratio, err / bound);
        if (err <= bound && pll::decode_frequency(pll::encode_registers(plan, cfg), cfg) == plan.f_actual_khz) ++ok;
    }
    return {ok == 10'000, std::to_string(ok) + "/10000 targets, worst error/bound " + fmt("%.3f", worst_ratio)};
}

Outcome transport_equivalence() {
    nvtest::ScratchDir dir("acceptance-pty");
    const std::string stamp = "2025-04-14T00:00:00Z";
    sim::SimConfig sc;
    sc.field = physics::MagneticField::axial(7.5);
    sc.noise_sigma_mv = 1.0;
    sc.seed = 11;
    sim::SimDevice device(sc);
    PtyPair pty;
    std::atomic<bool> stop{false};
    std::thread server([&] { sim::serve(device, pty.master_fd(), pty.master_fd(), stop); });
    const int acq = run_cli_quiet({"acquire", "--port", pty.slave_path(), "--timestamp", stamp, "--out", dir.file("acq.csv")});
    stop.store(true);
    server.join();
    const int simc = run_cli_quiet({"simulate", "--b-mt", "7.5", "--noise-mv", "1", "--seed", "11", "--timestamp", stamp,
                                    "--out", dir.file("sim.csv")});
    const std::string a = nvtest::slurp(dir.file("acq.csv"));
    const std::string s = nvtest::slurp(dir.file("sim.csv"));
    return {acq == 0 && simc == 0 && !a.empty() && a == s,
            "acquire over " + pty.slave_path() + " vs simulate: " + std::to_string(a.size()) + " / " +
                std::to_string(s.size()) + " bytes, " + (a == s ? "identical" : "different")};
}

Outcome valley_separation() {
    nvtest::ScratchDir dir("acceptance-overlay");
    const std::string m = dir.file("magnet.csv"), z = dir.file("none.csv");
    bool ok = run_cli_quiet({"simulate", "--b-mt", "7.5", "--seed", "3", "--out", m}) == 0 &&
              run_cli_quiet({"simulate", "--b-mt", "0", "--seed", "3", "--out", z}) == 0 &&
              run_cli_quiet({"analyze", "--in", m, "--report", dir.file("magnet.json")}) == 0 &&
              run_cli_quiet({"analyze", "--in", z, "--report", dir.file("none.json")}) == 0;
    if (!ok) return {false, "pipeline failed"};
    auto separation = [&](const std::string& json) {
        const auto c = report_centers(nvtest::slurp(json));
        return c.size() == 2 ? c[1] - c[0] : std::nan("");
    };
    const double sep_m = separation(dir.file("magnet.json"));
    const double sep_z = separation(dir.file("none.json"));
    const std::string svg_path = "overlay_magnet_vs_none.svg";
    ok = run_cli_quiet({"plot", "--in", m, "--in", z, "--label", "magnet 7.5 mT", "--label", "no magnet", "--report",
                        dir.file("magnet.json"), "--title", "ODMR: magnet vs no magnet", "--out", svg_path}) == 0;
    const std::string svg = nvtest::slurp(svg_path);
    std::size_t polylines = 0;
    for (std::size_t p = 0; (p = svg.find("<polyline", p)) != std::string::npos; ++p) ++polylines;
    const double gain = sep_m - sep_z;
    return {ok && polylines == 2 && gain > 300.0,
            "separation " + fmt("%.1f", sep_m) + " MHz vs " + fmt("%.1f", sep_z) + " MHz (+" + fmt("%.1f MHz", gain) +
                "), overlay " + svg_path};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"closed-form resonances match the Hamiltonian", resonance_oracle},
        {"default sweep plans exactly at 25 MHz reference", sweep_representable},
        {"sweep-table entry size", table_budget},
        {"7.5 mT end to end", magnet_end_to_end},
        {"analytic Jacobian", jacobian_check},
        {"protocol robustness", protocol_robustness},
        {"PLL round trip", pll_round_trip},
        {"acquire over a serial pty equals simulate", transport_equivalence},
        {"valleys move apart with the magnet", valley_separation},
    };
    int failures = 0;
    int index = 1;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index++, name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <sstream>

#include "nvscope/physics.hpp"
#include "nvscope/spectrum_io.hpp"
#include "support.hpp"

using namespace nvscope;

namespace {

Spectrum sample() {
    Spectrum s = physics::synthesize_spectrum(physics::NvParameters{}, physics::MagneticField::axial(7.5), SweepPlan{},
                                              1.0, 5);
    s.meta.timestamp = "2025-04-14T00:00:00Z";
    s.meta.device = "simulator fw=1 adc_bits=12 vref_mv=3000";
    // keep values at the writer's precision so the round trip is exact
    for (auto& p : s.points) p.signal_mv = std::stod(format_signal(p.signal_mv));
    return s;
}

std::string replace_line(const std::string& text, const std::string& from, const std::string& to) {
    std::string out = text;
    const auto pos = out.find(from);
    REQUIRE(pos != std::string::npos);
    out.replace(pos, from.size(), to);
    return out;
}

}  // namespace

TEST_SUITE("spectrum-io") {

TEST_CASE("header layout") {
    const std::string csv = spectrum_to_csv(sample());
    CHECK(csv.rfind("# version=1\n# start_mhz=2614\n# stop_mhz=3126\n# step_mhz=4\n# n_avg=6\n", 0) == 0);
    CHECK(csv.find("\n# source=simulated\n") != std::string::npos);
    CHECK(csv.find("\n# baseline_applied=false\n") != std::string::npos);
    CHECK(csv.find("\nf_mhz,signal_mv,n_avg\n2614.000,") != std::string::npos);
}

TEST_CASE("write then read is lossless") {
    const Spectrum s = sample();
    CHECK(spectrum_from_csv(spectrum_to_csv(s)) == s);

    Spectrum fractional = s;
    fractional.meta.plan.start_mhz = 2838.5;
    fractional.meta.plan.step_mhz = 0.25;
    fractional.meta.plan.stop_mhz = 2838.5 + 0.25 * 99;
    fractional.points.resize(100);
    for (std::size_t i = 0; i < 100; ++i) fractional.points[i].f_khz = static_cast<std::uint32_t>(2'838'500 + 250 * i);
    fractional.meta.baseline_applied = true;
    fractional.meta.source = SpectrumSource::Real;
    CHECK(spectrum_from_csv(spectrum_to_csv(fractional)) == fractional);
}

TEST_CASE("file round trip") {
    nvtest::ScratchDir dir("csv");
    const Spectrum s = sample();
    save_spectrum(s, dir.file("a.csv"));
    CHECK(load_spectrum(dir.file("a.csv")) == s);
    CHECK_THROWS_AS(load_spectrum(dir.file("missing.csv")), std::runtime_error);
    CHECK_THROWS_AS(save_spectrum(s, dir.file("no/such/dir/a.csv")), std::runtime_error);
}

TEST_CASE("missing header keys are reported with a line number") {
    const std::string csv = replace_line(spectrum_to_csv(sample()), "# step_mhz=4\n", "");
    try {
        spectrum_from_csv(csv);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("step_mhz") != std::string::npos);
        CHECK(e.line() > 0);
    }
}

TEST_CASE("malformed rows are rejected with their line number") {
    const std::string good = spectrum_to_csv(sample());
    try {
        spectrum_from_csv(replace_line(good, "2614.000,", "2614.000,abc,"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 12);
    }
    CHECK_THROWS_AS(spectrum_from_csv(replace_line(good, "# version=1", "# version=7")), ParseError);
    CHECK_THROWS_AS(spectrum_from_csv(replace_line(good, "# source=simulated", "# source=dream")), ParseError);
    CHECK_THROWS_AS(spectrum_from_csv(replace_line(good, "f_mhz,signal_mv,n_avg", "freq,sig")), ParseError);
    CHECK_THROWS_AS(spectrum_from_csv("# version=1\n"), ParseError);
}

TEST_CASE("point count must agree with the plan") {
    std::string csv = spectrum_to_csv(sample());
    csv.erase(csv.rfind("3126.000"));
    CHECK_THROWS(spectrum_from_csv(csv));
}

TEST_CASE("signals are written to six significant digits") {
    CHECK(format_signal(199.92734) == "199.927");
    CHECK(format_signal(-31.5) == "-31.5");
    CHECK(format_signal(0.0) == "0");
}

}

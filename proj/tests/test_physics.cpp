#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "nvscope/physics.hpp"
#include "nvscope/spectrum.hpp"
#include "support.hpp"

using namespace nvscope;
using namespace nvscope::physics;
using cd = std::complex<double>;

namespace {

using M3 = std::array<std::array<cd, 3>, 3>;

M3 mul(const M3& a, const M3& b) {
    M3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

M3 lin(const std::vector<std::pair<cd, M3>>& terms) {
    M3 r{};
    for (const auto& [c, m] : terms)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r[i][j] += c * m[i][j];
    return r;
}

cd det(const M3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

// Closed-form (trigonometric) eigenvalues of a 3x3 Hermitian matrix, ascending.
std::array<double, 3> eigenvalues(const M3& h) {
    const double q = (h[0][0].real() + h[1][1].real() + h[2][2].real()) / 3.0;
    const double off = std::norm(h[0][1]) + std::norm(h[0][2]) + std::norm(h[1][2]);
    double p2 = 2.0 * off;
    for (int i = 0; i < 3; ++i) p2 += (h[i][i].real() - q) * (h[i][i].real() - q);
    if (p2 <= 1e-30) return {q, q, q};
    const double p = std::sqrt(p2 / 6.0);
    M3 b = h;
    for (int i = 0; i < 3; ++i) b[i][i] -= q;
    for (auto& row : b)
        for (auto& x : row) x /= p;
    const double r = std::clamp(det(b).real() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    std::array<double, 3> e{e3, 3.0 * q - e1 - e3, e1};
    std::sort(e.begin(), e.end());
    return e;
}

const double s = 1.0 / std::numbers::sqrt2;
const cd I{0.0, 1.0};
const M3 Sx{{{0, s, 0}, {s, 0, s}, {0, s, 0}}};
const M3 Sy{{{0, -I * s, 0}, {I * s, 0, -I * s}, {0, I * s, 0}}};
const M3 Sz{{{1, 0, 0}, {0, 0, 0}, {0, 0, -1}}};

ResonancePair oracle_pair(double d, double e, double gamma, double bx, double by, double bz) {
    const M3 h = lin({{d, mul(Sz, Sz)},
                      {e, mul(Sy, Sy)},
                      {-e, mul(Sx, Sx)},
                      {gamma * bx, Sx},
                      {gamma * by, Sy},
                      {gamma * bz, Sz}});
    const auto ev = eigenvalues(h);
    return {ev[1] - ev[0], ev[2] - ev[0]};
}

double max_abs_diff(const Matrix3c& a, const Matrix3c& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("physics") {

TEST_CASE("spin-1 operators satisfy the angular momentum algebra") {
    const auto& op = SpinOperators::spin1();
    const cd i{0.0, 1.0};
    CHECK(max_abs_diff(op.sx, op.sx.adjoint()) < 1e-15);
    CHECK(max_abs_diff(op.sy, op.sy.adjoint()) < 1e-15);
    CHECK(max_abs_diff(op.sz, op.sz.adjoint()) < 1e-15);
    CHECK(max_abs_diff(op.sx * op.sy - op.sy * op.sx, i * op.sz) < 1e-15);
    CHECK(max_abs_diff(op.sy * op.sz - op.sz * op.sy, i * op.sx) < 1e-15);
    CHECK(max_abs_diff(op.sz * op.sx - op.sx * op.sz, i * op.sy) < 1e-15);
    const Matrix3c casimir = op.sx * op.sx + op.sy * op.sy + op.sz * op.sz;
    CHECK(max_abs_diff(casimir, 2.0 * Matrix3c::Identity()) < 1e-15);
}

TEST_CASE("zero field, zero strain leaves the pair degenerate at D") {
    const NvParameters p;
    const auto a = resonance_pair(p, 0.0);
    CHECK(a.nu_minus_mhz == doctest::Approx(2870.0).epsilon(1e-15));
    CHECK(a.nu_plus_mhz == doctest::Approx(2870.0).epsilon(1e-15));
    const auto h = hamiltonian_resonances(p, MagneticField{});
    CHECK(std::abs(h.nu_minus_mhz - 2870.0) < 1e-9);
    CHECK(std::abs(h.nu_plus_mhz - 2870.0) < 1e-9);
}

TEST_CASE("1 mT axial field splits the pair by 2 gamma B") {
    const NvParameters p;
    const double gb = p.gamma_mhz_per_mt * 1.0;
    const auto a = resonance_pair(p, 1.0);
    CHECK(std::abs(a.nu_minus_mhz - (p.d_mhz - gb)) < 1e-9);
    CHECK(std::abs(a.nu_plus_mhz - (p.d_mhz + gb)) < 1e-9);
    CHECK(std::abs(a.nu_minus_mhz - 2842.0) < 1e-9);
    CHECK(std::abs(a.nu_plus_mhz - 2898.0) < 1e-9);
}

TEST_CASE("strained case agrees with the closed-form 2x2 block") {
    NvParameters p;
    p.e_mhz = 5.0;
    const double root = std::sqrt(5.0 * 5.0 + (28.0 * 2.0) * (28.0 * 2.0));
    const auto a = resonance_pair(p, 2.0);
    const auto h = hamiltonian_resonances(p, MagneticField::axial(2.0));
    CHECK(std::abs(a.nu_minus_mhz - (2870.0 - root)) < 1e-9);
    CHECK(std::abs(a.nu_plus_mhz - (2870.0 + root)) < 1e-9);
    CHECK(std::abs(h.nu_minus_mhz - a.nu_minus_mhz) < 1e-6);
    CHECK(std::abs(h.nu_plus_mhz - a.nu_plus_mhz) < 1e-6);
}

TEST_CASE("hamiltonian eigensolve matches an independent closed-form oracle for arbitrary fields") {
    nvtest::Gen g(11);
    for (int trial = 0; trial < 500; ++trial) {
        NvParameters p;
        p.e_mhz = g.uniform(0.0, 20.0);
        const MagneticField f{g.uniform(-5, 5), g.uniform(-5, 5), g.uniform(-10, 10)};
        const auto got = hamiltonian_resonances(p, f);
        const auto want = oracle_pair(p.d_mhz, p.e_mhz, p.gamma_mhz_per_mt, f.bx_mt, f.by_mt, f.bz_mt);
        REQUIRE(std::abs(got.nu_minus_mhz - want.nu_minus_mhz) < 1e-6);
        REQUIRE(std::abs(got.nu_plus_mhz - want.nu_plus_mhz) < 1e-6);
    }
}

TEST_CASE("hamiltonian is Hermitian and reproduces its matrix elements") {
    NvParameters p;
    p.e_mhz = 3.0;
    const auto h = hamiltonian(p, MagneticField{0.2, -0.4, 1.5});
    CHECK(max_abs_diff(h, h.adjoint()) < 1e-12);
    CHECK(h(0, 0).real() == doctest::Approx(p.d_mhz + 28.0 * 1.5));
    CHECK(h(2, 2).real() == doctest::Approx(p.d_mhz - 28.0 * 1.5));
    CHECK(std::abs(h(1, 1)) < 1e-12);
}

TEST_CASE("splitting inversion round-trips and clamps below the strain") {
    nvtest::Gen g(5);
    for (int trial = 0; trial < 200; ++trial) {
        NvParameters p;
        p.e_mhz = g.uniform(0.0, 10.0);
        const double b = g.uniform(0.0, 10.0);
        const auto inv = invert_splitting(p, resonance_pair(p, b));
        REQUIRE(std::abs(inv.b_parallel_mt - b) < 1e-9);
        REQUIRE(std::abs(inv.d_est_mhz - p.d_mhz) < 1e-9);
    }
    NvParameters p;
    p.e_mhz = 8.0;
    const auto inv = invert_splitting(p, ResonancePair{2865.0, 2875.0});
    CHECK(inv.clamped);
    CHECK(inv.b_parallel_mt == 0.0);
    CHECK(invert_splitting(NvParameters{}, ResonancePair{2842.0, 2898.0}).b_parallel_mt == doctest::Approx(1.0));
}

TEST_CASE("lorentzian has unit depth and HWHM at half depth") {
    CHECK(lorentzian(2870.0, 2870.0, 10.0) == 1.0);
    CHECK(lorentzian(2880.0, 2870.0, 10.0) == doctest::Approx(0.5));
    CHECK(lorentzian(2860.0, 2870.0, 10.0) == doctest::Approx(0.5));
}

TEST_CASE("noiseless synthesized spectrum has its minima at the resonances") {
    const NvParameters p;
    const SweepPlan plan;
    const Spectrum spec = synthesize_spectrum(p, MagneticField::axial(7.5), plan, 0.0, 1);
    REQUIRE(spec.size() == 129);
    spec.validate();
    CHECK(spec.meta.source == SpectrumSource::Simulated);
    CHECK(spec.points.front().signal_mv == doctest::Approx(200.0).epsilon(0.01));
    // The resonances (2660, 3080) sit midway between grid points, 2 MHz from each neighbour.
    auto at = [&](double f) {
        for (const auto& pt : spec.points)
            if (std::abs(pt.f_mhz() - f) < 1e-9) return pt.signal_mv;
        return -1.0;
    };
    auto expected = [](double f) {
        const double l1 = 100.0 / ((f - 2660.0) * (f - 2660.0) + 100.0);
        const double l2 = 100.0 / ((f - 3080.0) * (f - 3080.0) + 100.0);
        return 200.0 * (1.0 - 0.15 * (l1 + l2));
    };
    for (double f : {2658.0, 2662.0, 3078.0, 3082.0}) CHECK(at(f) == doctest::Approx(expected(f)).epsilon(1e-12));
    CHECK(at(2658.0) == doctest::Approx(at(2662.0)).epsilon(1e-3));
    for (const auto& pt : spec.points) CHECK(pt.signal_mv >= expected(2662.0) - 1e-6);
}

TEST_CASE("synthesis is deterministic in the seed") {
    const NvParameters p;
    const auto a = synthesize_spectrum(p, MagneticField::axial(2.0), SweepPlan{}, 1.0, 42);
    const auto b = synthesize_spectrum(p, MagneticField::axial(2.0), SweepPlan{}, 1.0, 42);
    const auto c = synthesize_spectrum(p, MagneticField::axial(2.0), SweepPlan{}, 1.0, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
}

TEST_CASE("parameter validation rejects unphysical inputs") {
    NvParameters p;
    p.linewidth_mhz = 0.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = NvParameters{};
    p.contrast = 1.5;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = NvParameters{};
    p.e_mhz = -1.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    CHECK_THROWS_AS(MagneticField::axial(150.0).validate(), InvalidArgument);
    CHECK_NOTHROW(MagneticField::axial(7.5).validate());
}

}

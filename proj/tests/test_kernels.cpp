#include <doctest.h>

#include <cmath>
#include <vector>

#include "nvscope/kernels.hpp"
#include "support.hpp"

using namespace nvscope::kernels;

namespace {

LorentzParams random_params(nvtest::Gen& g) {
    return {g.uniform(50, 300), g.uniform(0, 60), g.uniform(0, 60), g.uniform(2600, 3100), g.uniform(2600, 3100),
            g.uniform(1, 30), g.uniform(1, 30)};
}

std::vector<double> grid(nvtest::Gen& g, std::size_t n) {
    std::vector<double> f(n);
    for (auto& x : f) x = g.uniform(2600, 3140);
    return f;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar model matches the textbook formula") {
    const auto& k = table(Isa::Scalar);
    const LorentzParams p{200, 30, 20, 2700, 3000, 10, 5};
    const std::vector<double> f{2650, 2700, 2710, 3000, 3005};
    std::vector<double> out(f.size());
    k.eval_model(p, f.data(), out.data(), f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double l1 = 100.0 / ((f[i] - 2700) * (f[i] - 2700) + 100.0);
        const double l2 = 25.0 / ((f[i] - 3000) * (f[i] - 3000) + 25.0);
        CHECK(out[i] == doctest::Approx(200 - 30 * l1 - 20 * l2).epsilon(1e-14));
    }
}

TEST_CASE("normal equations agree with an explicit Jacobian product") {
    nvtest::Gen g(21);
    const auto& k = table(Isa::Scalar);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_params(g);
        const std::size_t n = g.integer(1, 200);
        const auto f = grid(g, n);
        std::vector<double> y(n);
        for (auto& v : y) v = g.uniform(100, 300);
        std::vector<double> jac(n * kParamCount), model(n);
        k.jacobian(p, f.data(), jac.data(), n);
        k.eval_model(p, f.data(), model.data(), n);
        const auto ne = k.normal_equations(p, f.data(), y.data(), n);
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) rss += (y[i] - model[i]) * (y[i] - model[i]);
        CHECK(close(ne.rss, rss, 1e-12));
        CHECK(close(k.rss(p, f.data(), y.data(), n), rss, 1e-12));
        for (std::size_t r = 0; r < kParamCount; ++r) {
            double jtr = 0.0;
            for (std::size_t i = 0; i < n; ++i) jtr += jac[i * kParamCount + r] * (y[i] - model[i]);
            CHECK(close(ne.jtr[r], jtr, 1e-10));
            for (std::size_t c = r; c < kParamCount; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += jac[i * kParamCount + r] * jac[i * kParamCount + c];
                CHECK(close(ne.at(r, c), s, 1e-10));
                CHECK(ne.at(r, c) == ne.at(c, r));
            }
        }
    }
}

TEST_CASE("every available SIMD variant matches the scalar reference") {
    nvtest::Gen g(42);
    const auto& ref = table(Isa::Scalar);
    for (Isa isa : {Isa::Avx2, Isa::Neon}) {
        if (!isa_available(isa)) {
            CHECK_THROWS(table(isa));
            continue;
        }
        const auto& k = table(isa);
        CHECK(k.isa == isa);
        for (std::size_t n = 0; n < 70; ++n) {
            const auto p = random_params(g);
            const auto f = grid(g, n);
            std::vector<double> y(n);
            for (auto& v : y) v = g.uniform(100, 300);

            std::vector<double> m0(n), m1(n), j0(n * kParamCount), j1(n * kParamCount);
            ref.eval_model(p, f.data(), m0.data(), n);
            k.eval_model(p, f.data(), m1.data(), n);
            ref.jacobian(p, f.data(), j0.data(), n);
            k.jacobian(p, f.data(), j1.data(), n);
            for (std::size_t i = 0; i < n; ++i) REQUIRE(close(m0[i], m1[i], 1e-13));
            for (std::size_t i = 0; i < j0.size(); ++i) REQUIRE(close(j0[i], j1[i], 1e-12));

            REQUIRE(close(ref.rss(p, f.data(), y.data(), n), k.rss(p, f.data(), y.data(), n), 1e-11));
            const auto a = ref.normal_equations(p, f.data(), y.data(), n);
            const auto b = k.normal_equations(p, f.data(), y.data(), n);
            REQUIRE(close(a.rss, b.rss, 1e-11));
            for (std::size_t i = 0; i < a.jtj.size(); ++i) REQUIRE(close(a.jtj[i], b.jtj[i], 1e-11));
            for (std::size_t i = 0; i < a.jtr.size(); ++i) REQUIRE(close(a.jtr[i], b.jtr[i], 1e-10));
        }
    }
}

TEST_CASE("dispatch selects an available table and the span wrappers check sizes") {
    const auto& k = active();
    CHECK(isa_available(k.isa));
    CHECK(isa_available(Isa::Scalar));
    CHECK(!to_string(k.isa).empty());
    const LorentzParams p{200, 30, 30, 2800, 2900, 10, 10};
    std::vector<double> f{2800, 2900}, out(1);
    CHECK_THROWS(eval_model(p, f, out));
    std::vector<double> jac(3);
    CHECK_THROWS(jacobian(p, f, jac));
    out.resize(2);
    eval_model(p, f, out);
    CHECK(out[0] == doctest::Approx(200 - 30 - 30 * 100.0 / (100.0 * 100.0 + 100.0)));
}

}

// Scalar reference kernels. Every SIMD variant is tested against these.

#include "nvscope/kernels.hpp"

namespace nvscope::kernels {
namespace {

struct PointTerms {
    double model;
    std::array<double, kParamCount> grad;  // d model / d theta
};

inline PointTerms point_terms(const LorentzParams& p, double f) {
    const double d1 = f - p.c1;
    const double d2 = f - p.c2;
    const double w1s = p.w1 * p.w1;
    const double w2s = p.w2 * p.w2;
    const double den1 = d1 * d1 + w1s;
    const double den2 = d2 * d2 + w2s;
    const double l1 = w1s / den1;
    const double l2 = w2s / den2;
    // l * (1/den) shares the division with the Lorentzian itself
    const double q1 = l1 / den1;
    const double q2 = l2 / den2;

    PointTerms t;
    t.model = p.b0 - p.a1 * l1 - p.a2 * l2;
    t.grad[0] = 1.0;
    t.grad[1] = -l1;
    t.grad[2] = -l2;
    t.grad[3] = -2.0 * p.a1 * q1 * d1;
    t.grad[4] = -2.0 * p.a2 * q2 * d2;
    t.grad[5] = -2.0 * p.a1 * q1 * d1 * d1 / p.w1;
    t.grad[6] = -2.0 * p.a2 * q2 * d2 * d2 / p.w2;
    return t;
}

void eval_model_scalar(const LorentzParams& p, const double* f, double* out, std::size_t n) {
    const double w1s = p.w1 * p.w1;
    const double w2s = p.w2 * p.w2;
    for (std::size_t i = 0; i < n; ++i) {
        const double d1 = f[i] - p.c1;
        const double d2 = f[i] - p.c2;
        out[i] = p.b0 - p.a1 * w1s / (d1 * d1 + w1s) - p.a2 * w2s / (d2 * d2 + w2s);
    }
}

void jacobian_scalar(const LorentzParams& p, const double* f, double* jac, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const PointTerms t = point_terms(p, f[i]);
        for (std::size_t k = 0; k < kParamCount; ++k) jac[i * kParamCount + k] = t.grad[k];
    }
}

double rss_scalar(const LorentzParams& p, const double* f, const double* y, std::size_t n) {
    const double w1s = p.w1 * p.w1;
    const double w2s = p.w2 * p.w2;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d1 = f[i] - p.c1;
        const double d2 = f[i] - p.c2;
        const double m = p.b0 - p.a1 * w1s / (d1 * d1 + w1s) - p.a2 * w2s / (d2 * d2 + w2s);
        const double r = y[i] - m;
        acc += r * r;
    }
    return acc;
}

NormalEquations normal_equations_scalar(const LorentzParams& p, const double* f, const double* y,
                                        std::size_t n) {
    NormalEquations ne;
    for (std::size_t i = 0; i < n; ++i) {
        const PointTerms t = point_terms(p, f[i]);
        const double r = y[i] - t.model;
        ne.rss += r * r;
        std::size_t idx = 0;
        for (std::size_t a = 0; a < kParamCount; ++a) {
            ne.jtr[a] += t.grad[a] * r;
            for (std::size_t b = a; b < kParamCount; ++b) ne.jtj[idx++] += t.grad[a] * t.grad[b];
        }
    }
    return ne;
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::Scalar, eval_model_scalar, jacobian_scalar, rss_scalar,
                               normal_equations_scalar};
}  // namespace detail

}  // namespace nvscope::kernels

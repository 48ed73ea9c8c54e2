// NEON kernels for aarch64, two doubles per register.

#include <arm_neon.h>

#include "nvscope/kernels.hpp"

namespace nvscope::kernels {
namespace {

constexpr std::size_t kLanes = 2;

struct Broadcast {
    float64x2_t b0, a1, a2, c1, c2, w1, w2, w1s, w2s;
    explicit Broadcast(const LorentzParams& p)
        : b0(vdupq_n_f64(p.b0)),
          a1(vdupq_n_f64(p.a1)),
          a2(vdupq_n_f64(p.a2)),
          c1(vdupq_n_f64(p.c1)),
          c2(vdupq_n_f64(p.c2)),
          w1(vdupq_n_f64(p.w1)),
          w2(vdupq_n_f64(p.w2)),
          w1s(vdupq_n_f64(p.w1 * p.w1)),
          w2s(vdupq_n_f64(p.w2 * p.w2)) {}
};

struct LaneTerms {
    float64x2_t model;
    float64x2_t g[kParamCount];
};

inline float64x2_t model_lanes(const Broadcast& bc, float64x2_t f) {
    const float64x2_t d1 = vsubq_f64(f, bc.c1);
    const float64x2_t d2 = vsubq_f64(f, bc.c2);
    const float64x2_t l1 = vdivq_f64(bc.w1s, vfmaq_f64(bc.w1s, d1, d1));
    const float64x2_t l2 = vdivq_f64(bc.w2s, vfmaq_f64(bc.w2s, d2, d2));
    return vfmsq_f64(vfmsq_f64(bc.b0, bc.a1, l1), bc.a2, l2);
}

inline LaneTerms lane_terms(const Broadcast& bc, float64x2_t f) {
    const float64x2_t two = vdupq_n_f64(2.0);
    const float64x2_t d1 = vsubq_f64(f, bc.c1);
    const float64x2_t d2 = vsubq_f64(f, bc.c2);
    const float64x2_t den1 = vfmaq_f64(bc.w1s, d1, d1);
    const float64x2_t den2 = vfmaq_f64(bc.w2s, d2, d2);
    const float64x2_t l1 = vdivq_f64(bc.w1s, den1);
    const float64x2_t l2 = vdivq_f64(bc.w2s, den2);
    const float64x2_t q1 = vdivq_f64(l1, den1);
    const float64x2_t q2 = vdivq_f64(l2, den2);
    const float64x2_t gc1 = vmulq_f64(vmulq_f64(vmulq_f64(two, bc.a1), q1), d1);
    const float64x2_t gc2 = vmulq_f64(vmulq_f64(vmulq_f64(two, bc.a2), q2), d2);

    LaneTerms t;
    t.model = vfmsq_f64(vfmsq_f64(bc.b0, bc.a1, l1), bc.a2, l2);
    t.g[0] = vdupq_n_f64(1.0);
    t.g[1] = vnegq_f64(l1);
    t.g[2] = vnegq_f64(l2);
    t.g[3] = vnegq_f64(gc1);
    t.g[4] = vnegq_f64(gc2);
    t.g[5] = vdivq_f64(vmulq_f64(vnegq_f64(gc1), d1), bc.w1);
    t.g[6] = vdivq_f64(vmulq_f64(vnegq_f64(gc2), d2), bc.w2);
    return t;
}

void eval_model_neon(const LorentzParams& p, const double* f, double* out, std::size_t n) {
    const Broadcast bc(p);
    const std::size_t body = n - n % kLanes;
    for (std::size_t i = 0; i < body; i += kLanes) vst1q_f64(out + i, model_lanes(bc, vld1q_f64(f + i)));
    if (body < n) detail::kScalarTable.eval_model(p, f + body, out + body, n - body);
}

void jacobian_neon(const LorentzParams& p, const double* f, double* jac, std::size_t n) {
    const Broadcast bc(p);
    const std::size_t body = n - n % kLanes;
    for (std::size_t i = 0; i < body; i += kLanes) {
        const LaneTerms t = lane_terms(bc, vld1q_f64(f + i));
        for (std::size_t k = 0; k < kParamCount; ++k) {
            jac[i * kParamCount + k] = vgetq_lane_f64(t.g[k], 0);
            jac[(i + 1) * kParamCount + k] = vgetq_lane_f64(t.g[k], 1);
        }
    }
    if (body < n) detail::kScalarTable.jacobian(p, f + body, jac + body * kParamCount, n - body);
}

double rss_neon(const LorentzParams& p, const double* f, const double* y, std::size_t n) {
    const Broadcast bc(p);
    const std::size_t body = n - n % kLanes;
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < body; i += kLanes) {
        const float64x2_t r = vsubq_f64(vld1q_f64(y + i), model_lanes(bc, vld1q_f64(f + i)));
        acc = vfmaq_f64(acc, r, r);
    }
    double total = vaddvq_f64(acc);
    if (body < n) total += detail::kScalarTable.rss(p, f + body, y + body, n - body);
    return total;
}

NormalEquations normal_equations_neon(const LorentzParams& p, const double* f, const double* y,
                                      std::size_t n) {
    const Broadcast bc(p);
    const std::size_t body = n - n % kLanes;
    float64x2_t jtj[NormalEquations::kPacked];
    float64x2_t jtr[kParamCount];
    for (auto& v : jtj) v = vdupq_n_f64(0.0);
    for (auto& v : jtr) v = vdupq_n_f64(0.0);
    float64x2_t rss = vdupq_n_f64(0.0);

    for (std::size_t i = 0; i < body; i += kLanes) {
        const LaneTerms t = lane_terms(bc, vld1q_f64(f + i));
        const float64x2_t r = vsubq_f64(vld1q_f64(y + i), t.model);
        rss = vfmaq_f64(rss, r, r);
        std::size_t idx = 0;
        for (std::size_t a = 0; a < kParamCount; ++a) {
            jtr[a] = vfmaq_f64(jtr[a], t.g[a], r);
            for (std::size_t b = a; b < kParamCount; ++b, ++idx) jtj[idx] = vfmaq_f64(jtj[idx], t.g[a], t.g[b]);
        }
    }

    NormalEquations ne;
    if (body < n) ne = detail::kScalarTable.normal_equations(p, f + body, y + body, n - body);
    for (std::size_t k = 0; k < NormalEquations::kPacked; ++k) ne.jtj[k] += vaddvq_f64(jtj[k]);
    for (std::size_t k = 0; k < kParamCount; ++k) ne.jtr[k] += vaddvq_f64(jtr[k]);
    ne.rss += vaddvq_f64(rss);
    return ne;
}

}  // namespace

namespace detail {
const KernelTable kNeonTable{Isa::Neon, eval_model_neon, jacobian_neon, rss_neon, normal_equations_neon};
}  // namespace detail

}  // namespace nvscope::kernels

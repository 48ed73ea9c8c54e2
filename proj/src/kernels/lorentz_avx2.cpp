// AVX2 + FMA kernels, four doubles per register. Compiled with -mavx2 -mfma;
// only reached through the dispatch table after a CPUID check.

#include <immintrin.h>

#include "nvscope/kernels.hpp"

namespace nvscope::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

struct Broadcast {
    __m256d b0, a1, a2, c1, c2, w1, w2, w1s, w2s;
    explicit Broadcast(const LorentzParams& p)
        : b0(_mm256_set1_pd(p.b0)),
          a1(_mm256_set1_pd(p.a1)),
          a2(_mm256_set1_pd(p.a2)),
          c1(_mm256_set1_pd(p.c1)),
          c2(_mm256_set1_pd(p.c2)),
          w1(_mm256_set1_pd(p.w1)),
          w2(_mm256_set1_pd(p.w2)),
          w1s(_mm256_set1_pd(p.w1 * p.w1)),
          w2s(_mm256_set1_pd(p.w2 * p.w2)) {}
};

struct LaneTerms {
    __m256d model;
    __m256d g[kParamCount];
};

inline __m256d model_lanes(const Broadcast& bc, __m256d f) {
    const __m256d d1 = _mm256_sub_pd(f, bc.c1);
    const __m256d d2 = _mm256_sub_pd(f, bc.c2);
    const __m256d l1 = _mm256_div_pd(bc.w1s, _mm256_fmadd_pd(d1, d1, bc.w1s));
    const __m256d l2 = _mm256_div_pd(bc.w2s, _mm256_fmadd_pd(d2, d2, bc.w2s));
    return _mm256_fnmadd_pd(bc.a2, l2, _mm256_fnmadd_pd(bc.a1, l1, bc.b0));
}

inline LaneTerms lane_terms(const Broadcast& bc, __m256d f) {
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d d1 = _mm256_sub_pd(f, bc.c1);
    const __m256d d2 = _mm256_sub_pd(f, bc.c2);
    const __m256d den1 = _mm256_fmadd_pd(d1, d1, bc.w1s);
    const __m256d den2 = _mm256_fmadd_pd(d2, d2, bc.w2s);
    const __m256d l1 = _mm256_div_pd(bc.w1s, den1);
    const __m256d l2 = _mm256_div_pd(bc.w2s, den2);
    const __m256d q1 = _mm256_div_pd(l1, den1);
    const __m256d q2 = _mm256_div_pd(l2, den2);
    // -2 a q d
    const __m256d gc1 = _mm256_mul_pd(_mm256_mul_pd(_mm256_mul_pd(two, bc.a1), q1), d1);
    const __m256d gc2 = _mm256_mul_pd(_mm256_mul_pd(_mm256_mul_pd(two, bc.a2), q2), d2);

    LaneTerms t;
    t.model = _mm256_fnmadd_pd(bc.a2, l2, _mm256_fnmadd_pd(bc.a1, l1, bc.b0));
    const __m256d zero = _mm256_setzero_pd();
    t.g[0] = _mm256_set1_pd(1.0);
    t.g[1] = _mm256_sub_pd(zero, l1);
    t.g[2] = _mm256_sub_pd(zero, l2);
    t.g[3] = _mm256_sub_pd(zero, gc1);
    t.g[4] = _mm256_sub_pd(zero, gc2);
    t.g[5] = _mm256_div_pd(_mm256_mul_pd(_mm256_sub_pd(zero, gc1), d1), bc.w1);
    t.g[6] = _mm256_div_pd(_mm256_mul_pd(_mm256_sub_pd(zero, gc2), d2), bc.w2);
    return t;
}

void eval_model_avx2(const LorentzParams& p, const double* f, double* out, std::size_t n) {
    const Broadcast bc(p);
    const std::size_t body = n - n % kLanes;
    for (std::size_t i = 0; i < body; i += kLanes) {
        _mm256_storeu_pd(out + i, model_lanes(bc, _mm256_loadu_pd(f + i)));
    }
    if (body < n) detail::kScalarTable.eval_model(p, f + body, out + body, n - body);
}

void jacobian_avx2(const LorentzParams& p, const double* f, double* jac, std::size_t n) {
    const Broadcast bc(p);
    const std::size_t body = n - n % kLanes;
    alignas(32) double lanes[kParamCount][kLanes];
    for (std::size_t i = 0; i < body; i += kLanes) {
        const LaneTerms t = lane_terms(bc, _mm256_loadu_pd(f + i));
        for (std::size_t k = 0; k < kParamCount; ++k) _mm256_store_pd(lanes[k], t.g[k]);
        for (std::size_t l = 0; l < kLanes; ++l)
            for (std::size_t k = 0; k < kParamCount; ++k) jac[(i + l) * kParamCount + k] = lanes[k][l];
    }
    if (body < n) detail::kScalarTable.jacobian(p, f + body, jac + body * kParamCount, n - body);
}

double rss_avx2(const LorentzParams& p, const double* f, const double* y, std::size_t n) {
    const Broadcast bc(p);
    const std::size_t body = n - n % kLanes;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < body; i += kLanes) {
        const __m256d r = _mm256_sub_pd(_mm256_loadu_pd(y + i), model_lanes(bc, _mm256_loadu_pd(f + i)));
        acc = _mm256_fmadd_pd(r, r, acc);
    }
    double total = hsum(acc);
    if (body < n) total += detail::kScalarTable.rss(p, f + body, y + body, n - body);
    return total;
}

NormalEquations normal_equations_avx2(const LorentzParams& p, const double* f, const double* y,
                                      std::size_t n) {
    const Broadcast bc(p);
    const std::size_t body = n - n % kLanes;
    __m256d jtj[NormalEquations::kPacked];
    __m256d jtr[kParamCount];
    for (auto& v : jtj) v = _mm256_setzero_pd();
    for (auto& v : jtr) v = _mm256_setzero_pd();
    __m256d rss = _mm256_setzero_pd();

    for (std::size_t i = 0; i < body; i += kLanes) {
        const LaneTerms t = lane_terms(bc, _mm256_loadu_pd(f + i));
        const __m256d r = _mm256_sub_pd(_mm256_loadu_pd(y + i), t.model);
        rss = _mm256_fmadd_pd(r, r, rss);
        std::size_t idx = 0;
        for (std::size_t a = 0; a < kParamCount; ++a) {
            jtr[a] = _mm256_fmadd_pd(t.g[a], r, jtr[a]);
            for (std::size_t b = a; b < kParamCount; ++b, ++idx) jtj[idx] = _mm256_fmadd_pd(t.g[a], t.g[b], jtj[idx]);
        }
    }

    NormalEquations ne;
    if (body < n) ne = detail::kScalarTable.normal_equations(p, f + body, y + body, n - body);
    for (std::size_t k = 0; k < NormalEquations::kPacked; ++k) ne.jtj[k] += hsum(jtj[k]);
    for (std::size_t k = 0; k < kParamCount; ++k) ne.jtr[k] += hsum(jtr[k]);
    ne.rss += hsum(rss);
    return ne;
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{Isa::Avx2, eval_model_avx2, jacobian_avx2, rss_avx2, normal_equations_avx2};
}  // namespace detail

}  // namespace nvscope::kernels

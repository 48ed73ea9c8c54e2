#pragma once

// Inner loops of the double-Lorentzian model: evaluation, Jacobian and
// normal-equation accumulation. A scalar reference implementation is always
// built; AVX2 (x86-64) and NEON (aarch64) variants are selected at runtime
// when the CPU supports them. NVSCOPE_KERNELS=scalar|avx2|neon overrides.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace nvscope::kernels {

inline constexpr std::size_t kParamCount = 7;

/// model(f) = b0 - sum_i a_i * w_i^2 / ((f - c_i)^2 + w_i^2)
/// Parameter vector order: b0, a1, a2, c1, c2, w1, w2.
struct LorentzParams {
    double b0 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double w1 = 1.0;
    double w2 = 1.0;

    std::array<double, kParamCount> to_array() const { return {b0, a1, a2, c1, c2, w1, w2}; }
    static LorentzParams from_array(const std::array<double, kParamCount>& v) {
        return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
    }
};

/// J^T J (packed upper triangle, row-major), J^T r and sum r^2 with r = y - model.
struct NormalEquations {
    static constexpr std::size_t kPacked = kParamCount * (kParamCount + 1) / 2;
    std::array<double, kPacked> jtj{};
    std::array<double, kParamCount> jtr{};
    double rss = 0.0;

    static constexpr std::size_t index(std::size_t row, std::size_t col) {
        // row <= col
        return row * kParamCount - row * (row + 1) / 2 + col;
    }
    double at(std::size_t r, std::size_t c) const { return r <= c ? jtj[index(r, c)] : jtj[index(c, r)]; }
};

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

struct KernelTable {
    Isa isa;
    void (*eval_model)(const LorentzParams& p, const double* f, double* out, std::size_t n);
    /// Row-major N x kParamCount.
    void (*jacobian)(const LorentzParams& p, const double* f, double* jac, std::size_t n);
    double (*rss)(const LorentzParams& p, const double* f, const double* y, std::size_t n);
    NormalEquations (*normal_equations)(const LorentzParams& p, const double* f, const double* y,
                                        std::size_t n);
};

bool isa_available(Isa isa);

/// Table for a specific ISA; throws std::runtime_error if unavailable.
const KernelTable& table(Isa isa);

/// Table selected for this process (best available unless overridden by env).
const KernelTable& active();

// Span convenience wrappers routed through active().
void eval_model(const LorentzParams& p, std::span<const double> f, std::span<double> out);
void jacobian(const LorentzParams& p, std::span<const double> f, std::span<double> jac);
double rss(const LorentzParams& p, std::span<const double> f, std::span<const double> y);
NormalEquations normal_equations(const LorentzParams& p, std::span<const double> f,
                                 std::span<const double> y);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(NVSCOPE_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(NVSCOPE_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace nvscope::kernels

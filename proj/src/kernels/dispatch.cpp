#include <cstdlib>
#include <stdexcept>
#include <string>

#include "nvscope/kernels.hpp"

namespace nvscope::kernels {

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(NVSCOPE_HAVE_AVX2)
            __builtin_cpu_init();
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::Neon:
#if defined(NVSCOPE_HAVE_NEON)
            return true;  // mandatory on aarch64
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!isa_available(isa)) {
        throw std::runtime_error("kernel ISA not available on this build/CPU: " + std::string(to_string(isa)));
    }
    switch (isa) {
#if defined(NVSCOPE_HAVE_AVX2)
        case Isa::Avx2: return detail::kAvx2Table;
#endif
#if defined(NVSCOPE_HAVE_NEON)
        case Isa::Neon: return detail::kNeonTable;
#endif
        default: return detail::kScalarTable;
    }
}

namespace {

const KernelTable& select() {
    if (const char* env = std::getenv("NVSCOPE_KERNELS"); env != nullptr && *env != '\0') {
        const std::string want(env);
        for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
            if (want == to_string(isa) && isa_available(isa)) return table(isa);
        }
    }
    if (isa_available(Isa::Avx2)) return table(Isa::Avx2);
    if (isa_available(Isa::Neon)) return table(Isa::Neon);
    return detail::kScalarTable;
}

void check_sizes(std::size_t f, std::size_t other, const char* what) {
    if (f != other) throw std::invalid_argument(std::string("kernel span size mismatch: ") + what);
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& t = select();
    return t;
}

void eval_model(const LorentzParams& p, std::span<const double> f, std::span<double> out) {
    check_sizes(f.size(), out.size(), "eval_model");
    active().eval_model(p, f.data(), out.data(), f.size());
}

void jacobian(const LorentzParams& p, std::span<const double> f, std::span<double> jac) {
    check_sizes(f.size() * kParamCount, jac.size(), "jacobian");
    active().jacobian(p, f.data(), jac.data(), f.size());
}

double rss(const LorentzParams& p, std::span<const double> f, std::span<const double> y) {
    check_sizes(f.size(), y.size(), "rss");
    return active().rss(p, f.data(), y.data(), f.size());
}

NormalEquations normal_equations(const LorentzParams& p, std::span<const double> f,
                                 std::span<const double> y) {
    check_sizes(f.size(), y.size(), "normal_equations");
    return active().normal_equations(p, f.data(), y.data(), f.size());
}

}  // namespace nvscope::kernels

#include "nvscope/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "nvscope/kernels.hpp"
#include "nvscope/rng.hpp"
#include "nvscope/spectrum.hpp"

namespace nvscope::physics {

namespace {
void require(bool ok, const char* what) {
    if (!ok) throw InvalidArgument(what);
}
}  // namespace

void NvParameters::validate() const {
    require(std::isfinite(d_mhz) && d_mhz > 0.0, "NvParameters: d_mhz must be > 0");
    require(std::isfinite(e_mhz) && e_mhz >= 0.0, "NvParameters: e_mhz must be >= 0");
    require(std::isfinite(gamma_mhz_per_mt) && gamma_mhz_per_mt > 0.0,
            "NvParameters: gamma_mhz_per_mt must be > 0");
    require(std::isfinite(linewidth_mhz) && linewidth_mhz > 0.0, "NvParameters: linewidth_mhz must be > 0");
    require(contrast > 0.0 && contrast < 1.0, "NvParameters: contrast must lie in (0, 1)");
    require(std::isfinite(baseline_mv) && baseline_mv > 0.0, "NvParameters: baseline_mv must be > 0");
}

double MagneticField::magnitude_mt() const { return std::sqrt(bx_mt * bx_mt + by_mt * by_mt + bz_mt * bz_mt); }

void MagneticField::validate() const {
    require(std::isfinite(bx_mt) && std::isfinite(by_mt) && std::isfinite(bz_mt),
            "MagneticField: components must be finite");
    require(magnitude_mt() < kMaxMagnitudeMt, "MagneticField: magnitude must be below 100 mT");
}

const SpinOperators& SpinOperators::spin1() {
    static const SpinOperators ops = [] {
        using C = std::complex<double>;
        const double s = 1.0 / std::numbers::sqrt2;
        const C i(0.0, 1.0);
        SpinOperators o;
        o.sx << 0, s, 0,
                s, 0, s,
                0, s, 0;
        o.sy << C(0), -i * s, C(0),
                i * s, C(0), -i * s,
                C(0), i * s, C(0);
        o.sz << 1, 0, 0,
                0, 0, 0,
                0, 0, -1;
        return o;
    }();
    return ops;
}

ResonancePair resonance_pair(const NvParameters& params, double b_parallel_mt) {
    const double zeeman = params.gamma_mhz_per_mt * std::abs(b_parallel_mt);
    const double half = std::hypot(params.e_mhz, zeeman);
    return {params.d_mhz - half, params.d_mhz + half};
}

Matrix3c hamiltonian(const NvParameters& params, const MagneticField& field) {
    const auto& s = SpinOperators::spin1();
    const double g = params.gamma_mhz_per_mt;
    Matrix3c h = params.d_mhz * (s.sz * s.sz) + params.e_mhz * (s.sy * s.sy - s.sx * s.sx);
    h += g * (field.bx_mt * s.sx + field.by_mt * s.sy + field.bz_mt * s.sz);
    return h;
}

ResonancePair hamiltonian_resonances(const NvParameters& params, const MagneticField& field) {
    field.validate();
    const Matrix3c h = hamiltonian(params, field);
    Eigen::SelfAdjointEigenSolver<Matrix3c> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw InvalidArgument("hamiltonian_resonances: eigensolver failed");
    // Eigen returns self-adjoint eigenvalues in increasing order
    const Eigen::Vector3d ev = solver.eigenvalues();
    return {ev[1] - ev[0], ev[2] - ev[0]};
}

SplittingInversion invert_splitting(const NvParameters& params, const ResonancePair& pair) {
    SplittingInversion out;
    out.d_est_mhz = pair.midpoint_mhz();
    const double half = 0.5 * pair.splitting_mhz();
    const double e = params.e_mhz;
    out.clamped = half < e;
    const double radicand = std::max(0.0, half * half - e * e);
    out.b_parallel_mt = std::sqrt(radicand) / params.gamma_mhz_per_mt;
    return out;
}

double odmr_signal(const NvParameters& params, const ResonancePair& pair, double f_mhz) {
    const double w = params.linewidth_mhz;
    const double dips = lorentzian(f_mhz, pair.nu_minus_mhz, w) + lorentzian(f_mhz, pair.nu_plus_mhz, w);
    return params.baseline_mv * (1.0 - params.contrast * dips);
}

Spectrum synthesize_spectrum(const NvParameters& params, const MagneticField& field, const SweepPlan& plan,
                             double noise_sigma_mv, std::uint64_t seed) {
    params.validate();
    plan.validate();
    require(std::isfinite(noise_sigma_mv) && noise_sigma_mv >= 0.0, "synthesize_spectrum: noise_sigma_mv must be >= 0");
    const std::size_t n = plan.point_count();
    require(n > 0, "synthesize_spectrum: plan has zero points");

    const ResonancePair pair = hamiltonian_resonances(params, field);

    Spectrum spec;
    spec.meta.plan = plan;
    spec.meta.source = SpectrumSource::Simulated;
    spec.meta.device = "forward-model";

    std::vector<double> f(n);
    std::vector<double> model(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = plan.frequency_khz(i) / 1000.0;

    const double depth = params.baseline_mv * params.contrast;
    const kernels::LorentzParams lp{params.baseline_mv, depth, depth, pair.nu_minus_mhz, pair.nu_plus_mhz,
                                    params.linewidth_mhz, params.linewidth_mhz};
    kernels::eval_model(lp, f, model);

    GaussianRng rng(seed);
    const double sigma = noise_sigma_mv / std::sqrt(static_cast<double>(plan.n_avg));
    spec.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double noise = sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0;
        spec.points[i] = {plan.frequency_khz(i), model[i] + noise, plan.n_avg};
    }
    return spec;
}

}  // namespace nvscope::physics

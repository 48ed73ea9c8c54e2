#pragma once

// NV-center ground-state spin model.
//
// Units used throughout: frequencies in MHz, fields in millitesla,
// signals in millivolts. The gyromagnetic ratio is carried as MHz/mT
// (28 MHz/mT == 28 GHz/T), so the Zeeman term is simply gamma * B.

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace nvscope {

struct SweepPlan;
struct Spectrum;

namespace physics {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct NvParameters {
    double d_mhz = 2870.0;
    double e_mhz = 0.0;
    double gamma_mhz_per_mt = 28.0;
    double linewidth_mhz = 10.0;  // HWHM of each dip
    double contrast = 0.15;
    double baseline_mv = 200.0;

    /// Throws InvalidArgument naming the first violated invariant.
    void validate() const;
};

/// Field in the NV frame; z is the NV symmetry axis, so b_parallel == bz.
struct MagneticField {
    double bx_mt = 0.0;
    double by_mt = 0.0;
    double bz_mt = 0.0;

    static MagneticField axial(double b_parallel_mt) { return {0.0, 0.0, b_parallel_mt}; }

    double b_parallel_mt() const { return bz_mt; }
    double magnitude_mt() const;
    void validate() const;

    static constexpr double kMaxMagnitudeMt = 100.0;
};

using Matrix3c = Eigen::Matrix<std::complex<double>, 3, 3>;

/// Spin-1 operators in the (|+1>, |0>, |-1>) basis.
struct SpinOperators {
    Matrix3c sx;
    Matrix3c sy;
    Matrix3c sz;

    static const SpinOperators& spin1();
};

struct ResonancePair {
    double nu_minus_mhz = 0.0;
    double nu_plus_mhz = 0.0;

    double splitting_mhz() const { return nu_plus_mhz - nu_minus_mhz; }
    double midpoint_mhz() const { return 0.5 * (nu_plus_mhz + nu_minus_mhz); }
};

/// Closed-form transitions D -/+ sqrt(E^2 + (gamma*B)^2). Valid for axial fields.
ResonancePair resonance_pair(const NvParameters& params, double b_parallel_mt);

/// Builds the 3x3 ground-state Hamiltonian in MHz.
Matrix3c hamiltonian(const NvParameters& params, const MagneticField& field);

/// Diagonalizes the full Hamiltonian and returns the transitions from the lowest
/// eigenstate to the two upper ones (eigenvalues sorted ascending).
ResonancePair hamiltonian_resonances(const NvParameters& params, const MagneticField& field);

struct SplittingInversion {
    double b_parallel_mt = 0.0;
    double d_est_mhz = 0.0;
    bool clamped = false;  // half-splitting below E; field reported as zero
};

SplittingInversion invert_splitting(const NvParameters& params, const ResonancePair& pair);

/// Lorentzian dip of unit depth: w^2 / ((f - nu)^2 + w^2).
inline double lorentzian(double f_mhz, double center_mhz, double hwhm_mhz) {
    const double d = f_mhz - center_mhz;
    const double w2 = hwhm_mhz * hwhm_mhz;
    return w2 / (d * d + w2);
}

/// Noise-free fluorescence signal at one microwave frequency.
double odmr_signal(const NvParameters& params, const ResonancePair& pair, double f_mhz);

/// Forward model of a full sweep. Noise is additive Gaussian with standard
/// deviation noise_sigma_mv / sqrt(n_avg); deterministic in seed.
Spectrum synthesize_spectrum(const NvParameters& params, const MagneticField& field,
                             const SweepPlan& plan, double noise_sigma_mv, std::uint64_t seed);

}  // namespace physics
}  // namespace nvscope

#pragma once

// Spectrum -> magnetic field: dip detection, double-Lorentzian
// Levenberg-Marquardt fit and inversion of the splitting.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nvscope/kernels.hpp"
#include "nvscope/physics.hpp"
#include "nvscope/spectrum.hpp"

namespace nvscope::analysis {

using DoubleLorentzianModel = kernels::LorentzParams;

inline constexpr std::size_t kParamCount = kernels::kParamCount;

/// w > 0, a >= 0, c1 <= c2.
void validate_model(const DoubleLorentzianModel& m);

/// Swaps the two dips so that c1 <= c2.
DoubleLorentzianModel canonical(const DoubleLorentzianModel& m);

double evaluate(const DoubleLorentzianModel& m, double f_mhz);

struct FitResult {
    DoubleLorentzianModel model;
    double rss = 0.0;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    std::size_t points = 0;
    /// Covariance in parameter order (b0, a1, a2, c1, c2, w1, w2), scaled by
    /// rss / (N - free parameters).
    Eigen::Matrix<double, kParamCount, kParamCount> covariance =
        Eigen::Matrix<double, kParamCount, kParamCount>::Zero();

    std::array<double, kParamCount> variances() const;
    std::array<double, kParamCount> sigmas() const;
};

struct FieldEstimate {
    double b_parallel_mt = 0.0;
    double d_est_mhz = 0.0;
    double splitting_mhz = 0.0;
    bool clamped = false;
    double sigma_b_mt = 0.0;
};

enum class AnalysisErrorKind { TooFewPoints, NoDipsFound, SingularNormalEquations, NotConverged, InvalidInput };

const char* to_string(AnalysisErrorKind k);

class AnalysisError : public std::runtime_error {
public:
    AnalysisError(AnalysisErrorKind kind, const std::string& what, std::optional<FitResult> best = std::nullopt)
        : std::runtime_error(what), kind_(kind), best_(std::move(best)) {}
    AnalysisErrorKind kind() const noexcept { return kind_; }
    /// Best-so-far fit for NotConverged.
    const std::optional<FitResult>& best() const noexcept { return best_; }

private:
    AnalysisErrorKind kind_;
    std::optional<FitResult> best_;
};

/// Moving-average (5 points) smoothing, topographic prominence, up to two
/// minima at least min_separation_mhz apart, returned ascending.
std::vector<double> detect_dips(const Spectrum& spec, double min_prominence_mv, double min_separation_mhz);

/// Centered moving average with a truncated window at the edges.
std::vector<double> moving_average(const std::vector<double>& v, std::size_t window);

struct FitOptions {
    int max_iterations = 200;
    double rel_rss_tol = 1e-9;
    double step_tol = 1e-10;
    double gradient_tol = 1e-6;  // on |grad RSS| relative to (1 + RSS)
    double initial_damping = 1e-3;
    /// Fits a1 = a2 and w1 = w2 (an unequal init is averaged).
    bool tie_shapes = false;
    /// With tie_shapes: c2 - c1 stays at its initial value.
    bool fix_splitting = false;
};

/// Damped Gauss-Newton on sum (signal - model)^2 with the analytic Jacobian
/// and Marquardt diagonal scaling.
FitResult fit_double_lorentzian(const Spectrum& spec, const DoubleLorentzianModel& init, const FitOptions& options = {});

/// Same fit on raw arrays (frequencies in MHz).
FitResult fit_double_lorentzian(const std::vector<double>& f_mhz, const std::vector<double>& signal_mv,
                                const DoubleLorentzianModel& init, const FitOptions& options = {});

FieldEstimate estimate_field(const FitResult& fit, const physics::NvParameters& params);

struct AnalyzeOptions {
    double margin_fraction = 0.2;
    /// <= 0 selects max(4 x estimated point noise, 25 % of the deepest dip).
    double min_prominence_mv = 0.0;
    /// <= 0 selects the configured linewidth.
    double min_separation_mhz = 0.0;
    double init_width_mhz = 10.0;
    FitOptions fit;
};

struct Report {
    SpectrumMeta meta;
    std::vector<double> candidates_mhz;
    FitResult fit;
    FieldEstimate field;
    std::vector<double> f_mhz;
    std::vector<double> residuals_mv;  // signal - model on the analyzed (baseline-adjusted) spectrum
    physics::NvParameters params;
    std::string kernel_isa;
};

/// Stage-labelled failure from analyze(); carries whatever was computed.
class AnalyzeError : public std::runtime_error {
public:
    AnalyzeError(std::string stage, AnalysisErrorKind kind, const std::string& what, Report partial)
        : std::runtime_error(what.rfind(stage + ": ", 0) == 0 ? what : stage + ": " + what),
          stage_(std::move(stage)),
          kind_(kind),
          partial_(std::move(partial)) {}
    const std::string& stage() const noexcept { return stage_; }
    AnalysisErrorKind kind() const noexcept { return kind_; }
    const Report& partial() const noexcept { return partial_; }

private:
    std::string stage_;
    AnalysisErrorKind kind_;
    Report partial_;
};

/// baseline -> detect -> init -> fit -> estimate.
Report analyze(const Spectrum& spec, const physics::NvParameters& params, const AnalyzeOptions& options = {});

/// Robust per-point noise estimate from first differences (MAD / 0.6745 / sqrt 2).
double estimate_noise_mv(const std::vector<double>& signal);

}  // namespace nvscope::analysis

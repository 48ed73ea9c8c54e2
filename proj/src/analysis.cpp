#include "nvscope/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "nvscope/controller.hpp"

namespace nvscope::analysis {

namespace {

using Vec = Eigen::Matrix<double, kParamCount, 1>;
using Mat = Eigen::Matrix<double, kParamCount, kParamCount>;

constexpr double kMinWidthMhz = 1e-3;

Vec to_vec(const DoubleLorentzianModel& m) {
    const auto a = m.to_array();
    return Eigen::Map<const Vec>(a.data());
}

DoubleLorentzianModel from_vec(const Vec& v) {
    std::array<double, kParamCount> a{};
    Eigen::Map<Vec>(a.data()) = v;
    return DoubleLorentzianModel::from_array(a);
}

Mat unpack(const kernels::NormalEquations& ne) {
    Mat m;
    for (std::size_t r = 0; r < kParamCount; ++r)
        for (std::size_t c = 0; c < kParamCount; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ne.at(r, c);
    return m;
}

Vec jtr_vec(const kernels::NormalEquations& ne) { return Eigen::Map<const Vec>(ne.jtr.data()); }

// Keeps the parameters inside the model's domain: amplitudes >= 0, widths > 0.
Vec project(Vec v) {
    v[1] = std::max(v[1], 0.0);
    v[2] = std::max(v[2], 0.0);
    v[5] = std::max(std::abs(v[5]), kMinWidthMhz);
    v[6] = std::max(std::abs(v[6]), kMinWidthMhz);
    return v;
}

using Dyn = Eigen::MatrixXd;
using DynVec = Eigen::VectorXd;

Dyn covariance_from(const Dyn& jtj, double scale) {
    const Eigen::Index m = jtj.rows();
    Eigen::LDLT<Dyn> ldlt(jtj);
    Dyn inv = Dyn::Zero(m, m);
    if (ldlt.info() == Eigen::Success) inv = ldlt.solve(Dyn::Identity(m, m));
    if (ldlt.info() != Eigen::Success || !inv.allFinite() || (ldlt.vectorD().array() <= 0.0).any()) {
        // rank-deficient: pseudo-inverse over the well-determined subspace
        Eigen::SelfAdjointEigenSolver<Dyn> es(jtj);
        const auto& ev = es.eigenvalues();
        const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-12;
        DynVec inv_ev = DynVec::Zero(m);
        for (Eigen::Index i = 0; i < m; ++i) inv_ev[i] = ev[i] > cutoff ? 1.0 / ev[i] : 0.0;
        inv = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
    }
    return inv * scale;
}

// Maps free parameters onto (b0, a1, a2, c1, c2, w1, w2).
// Tied: (b0, a, c1, c2, w). Tied with fixed splitting: (b0, a, centre, w).
Dyn parameter_map(bool tied, bool fixed_split) {
    if (!tied) return Dyn::Identity(kParamCount, kParamCount);
    Dyn p = Dyn::Zero(kParamCount, fixed_split ? 4 : 5);
    p(0, 0) = 1.0;
    p(1, 1) = p(2, 1) = 1.0;
    if (fixed_split) {
        p(3, 2) = p(4, 2) = 1.0;
        p(5, 3) = p(6, 3) = 1.0;
    } else {
        p(3, 2) = 1.0;
        p(4, 3) = 1.0;
        p(5, 4) = p(6, 4) = 1.0;
    }
    return p;
}

}  // namespace

const char* to_string(AnalysisErrorKind k) {
    switch (k) {
        case AnalysisErrorKind::TooFewPoints: return "TooFewPoints";
        case AnalysisErrorKind::NoDipsFound: return "NoDipsFound";
        case AnalysisErrorKind::SingularNormalEquations: return "SingularNormalEquations";
        case AnalysisErrorKind::NotConverged: return "NotConverged";
        case AnalysisErrorKind::InvalidInput: return "InvalidInput";
    }
    return "?";
}

void validate_model(const DoubleLorentzianModel& m) {
    const auto a = m.to_array();
    for (double v : a) {
        if (!std::isfinite(v)) throw AnalysisError(AnalysisErrorKind::InvalidInput, "model: non-finite parameter");
    }
    if (!(m.w1 > 0.0) || !(m.w2 > 0.0)) throw AnalysisError(AnalysisErrorKind::InvalidInput, "model: widths must be > 0");
    if (m.a1 < 0.0 || m.a2 < 0.0) throw AnalysisError(AnalysisErrorKind::InvalidInput, "model: amplitudes must be >= 0");
    if (m.c1 > m.c2) throw AnalysisError(AnalysisErrorKind::InvalidInput, "model: centers must satisfy c1 <= c2");
}

DoubleLorentzianModel canonical(const DoubleLorentzianModel& m) {
    if (m.c1 <= m.c2) return m;
    return {m.b0, m.a2, m.a1, m.c2, m.c1, m.w2, m.w1};
}

double evaluate(const DoubleLorentzianModel& m, double f_mhz) {
    return m.b0 - m.a1 * physics::lorentzian(f_mhz, m.c1, m.w1) - m.a2 * physics::lorentzian(f_mhz, m.c2, m.w2);
}

std::array<double, kParamCount> FitResult::variances() const {
    std::array<double, kParamCount> v{};
    for (std::size_t i = 0; i < kParamCount; ++i) v[i] = covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    return v;
}

std::array<double, kParamCount> FitResult::sigmas() const {
    auto v = variances();
    for (double& x : v) x = std::sqrt(std::max(0.0, x));
    return v;
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
    const std::size_t n = v.size();
    const std::size_t half = window / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double s = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) s += v[k];
        out[i] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double estimate_noise_mv(const std::vector<double>& signal) {
    if (signal.size() < 3) return 0.0;
    std::vector<double> d(signal.size() - 1);
    for (std::size_t i = 0; i + 1 < signal.size(); ++i) d[i] = signal[i + 1] - signal[i];
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    const double med = *mid;
    for (double& x : d) x = std::abs(x - med);
    std::nth_element(d.begin(), mid, d.end());
    return *mid / 0.6745 / std::sqrt(2.0);
}

std::vector<double> detect_dips(const Spectrum& spec, double min_prominence_mv, double min_separation_mhz) {
    const std::size_t n = spec.size();
    if (n < 10) throw AnalysisError(AnalysisErrorKind::TooFewPoints, "detect_dips: need at least 10 points");
    const std::vector<double> s = moving_average(spec.signals_mv(), 5);

    struct Candidate {
        std::size_t index;
        double prominence;
    };
    std::vector<Candidate> found;

    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(s[i] < s[i - 1])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && s[j + 1] == s[i]) ++j;
        if (j + 1 < n && s[j + 1] > s[i]) {
            const std::size_t m = (i + j) / 2;
            const double v = s[m];
            double left_max = v;
            for (std::size_t k = i; k-- > 0;) {
                if (s[k] < v) break;
                left_max = std::max(left_max, s[k]);
            }
            double right_max = v;
            for (std::size_t k = j + 1; k < n; ++k) {
                if (s[k] < v) break;
                right_max = std::max(right_max, s[k]);
            }
            found.push_back({m, std::min(left_max, right_max) - v});
        }
        i = j + 1;
    }

    std::stable_sort(found.begin(), found.end(),
                     [](const Candidate& a, const Candidate& b) { return a.prominence > b.prominence; });
    std::vector<double> picked;
    for (const auto& c : found) {
        if (c.prominence < min_prominence_mv || c.prominence <= 0.0) break;
        const double f = spec.points[c.index].f_mhz();
        const bool far = std::all_of(picked.begin(), picked.end(),
                                     [&](double p) { return std::abs(p - f) >= min_separation_mhz; });
        if (far) picked.push_back(f);
        if (picked.size() == 2) break;
    }
    if (picked.empty()) {
        throw AnalysisError(AnalysisErrorKind::NoDipsFound, "no dip exceeds the prominence threshold of " +
                                                                std::to_string(min_prominence_mv) + " mV");
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

FitResult fit_double_lorentzian(const std::vector<double>& f, const std::vector<double>& y,
                                const DoubleLorentzianModel& init, const FitOptions& opt) {
    if (f.size() != y.size()) throw AnalysisError(AnalysisErrorKind::InvalidInput, "fit: size mismatch");
    if (f.size() <= 8) throw AnalysisError(AnalysisErrorKind::TooFewPoints, "fit: need more than 8 points");
    validate_model(init);
    DoubleLorentzianModel start = init;
    if (opt.tie_shapes) {
        start.a1 = start.a2 = 0.5 * (init.a1 + init.a2);
        start.w1 = start.w2 = 0.5 * (init.w1 + init.w2);
    }

    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    const double scale = std::max({std::abs(*lo), std::abs(*hi), 1e-300});
    if (*hi - *lo <= 1e-12 * scale) {
        throw AnalysisError(AnalysisErrorKind::SingularNormalEquations, "fit: signal is constant, dips are not identifiable");
    }

    const auto& k = kernels::active();
    const std::size_t n = f.size();
    const Dyn pmap = parameter_map(opt.tie_shapes, opt.tie_shapes && opt.fix_splitting);
    const Eigen::Index free_count = pmap.cols();
    Vec theta = to_vec(start);
    kernels::NormalEquations ne = k.normal_equations(from_vec(theta), f.data(), y.data(), n);
    double lambda = opt.initial_damping;
    auto gradient = [&] { return DynVec(pmap.transpose() * jtr_vec(ne)); };
    auto reduced = [&](const Mat& full) { return Dyn(pmap.transpose() * full * pmap); };

    FitResult best;
    best.points = n;
    auto snapshot = [&](int iterations, bool converged) {
        best.model = canonical(from_vec(theta));
        best.rss = ne.rss;
        best.iterations = iterations;
        best.converged = converged;
        best.gradient_norm = 2.0 * gradient().norm();
        const double dof = static_cast<double>(n) - static_cast<double>(free_count);
        // normal equations are re-evaluated on the canonical ordering
        const auto canon = best.model;
        const auto ne_c = k.normal_equations(canon, f.data(), y.data(), n);
        best.covariance = pmap * covariance_from(reduced(unpack(ne_c)), ne_c.rss / dof) * pmap.transpose();
    };
    auto gradient_ok = [&] { return 2.0 * gradient().norm() < opt.gradient_tol * (1.0 + ne.rss); };

    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (gradient_ok()) {
            snapshot(it, true);
            return best;
        }
        const Dyn jtj = reduced(unpack(ne));
        const DynVec diag = jtj.diagonal();
        const double max_diag = diag.maxCoeff();
        if (!(max_diag > 0.0) || (diag.array() <= max_diag * 1e-14).any()) {
            snapshot(it, false);
            throw AnalysisError(AnalysisErrorKind::SingularNormalEquations,
                                "fit: normal equations are singular (a parameter has no influence on the model)", best);
        }

        bool accepted = false;
        while (!accepted) {
            Dyn damped = jtj;
            damped.diagonal() += lambda * diag;
            Eigen::LDLT<Dyn> ldlt(damped);
            if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= max_diag * 1e-16).any()) {
                snapshot(it, false);
                throw AnalysisError(AnalysisErrorKind::SingularNormalEquations, "fit: damped normal equations are singular", best);
            }
            const Vec step = pmap * ldlt.solve(gradient());
            const Vec candidate = project(theta + step);
            const double rss_new = k.rss(from_vec(candidate), f.data(), y.data(), n);
            if (std::isfinite(rss_new) && rss_new < ne.rss) {
                const double rel_decrease = (ne.rss - rss_new) / std::max(ne.rss, 1e-300);
                const double step_norm = (candidate - theta).norm();
                theta = candidate;
                ne = k.normal_equations(from_vec(theta), f.data(), y.data(), n);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if ((rel_decrease < opt.rel_rss_tol || step_norm < opt.step_tol) && gradient_ok()) {
                    snapshot(it + 1, true);
                    return best;
                }
            } else {
                lambda *= 10.0;
                if (lambda > 1e16) {
                    // no descent direction left at working precision
                    const bool ok = gradient_ok();
                    snapshot(it + 1, ok);
                    if (ok) return best;
                    throw AnalysisError(AnalysisErrorKind::NotConverged,
                                        "fit: stalled with gradient norm " + std::to_string(best.gradient_norm), best);
                }
            }
        }
    }
    const bool ok = gradient_ok();
    snapshot(it, ok);
    if (ok) return best;
    throw AnalysisError(AnalysisErrorKind::NotConverged,
                        "fit: no convergence after " + std::to_string(opt.max_iterations) + " iterations", best);
}

FitResult fit_double_lorentzian(const Spectrum& spec, const DoubleLorentzianModel& init, const FitOptions& options) {
    return fit_double_lorentzian(spec.frequencies_mhz(), spec.signals_mv(), init, options);
}

FieldEstimate estimate_field(const FitResult& fit, const physics::NvParameters& params) {
    if (!fit.converged) throw AnalysisError(AnalysisErrorKind::InvalidInput, "estimate_field: fit did not converge");
    params.validate();
    const auto& m = fit.model;
    const physics::SplittingInversion inv = physics::invert_splitting(params, {m.c1, m.c2});

    FieldEstimate est;
    est.b_parallel_mt = inv.b_parallel_mt;
    est.d_est_mhz = inv.d_est_mhz;
    est.splitting_mhz = m.c2 - m.c1;
    est.clamped = inv.clamped;

    const auto& cov = fit.covariance;
    const double var_split = std::max(0.0, cov(3, 3) + cov(4, 4) - 2.0 * cov(3, 4));
    const double sigma_half = 0.5 * std::sqrt(var_split);
    const double half = 0.5 * est.splitting_mhz;
    const double e = params.e_mhz;
    const double gamma = params.gamma_mhz_per_mt;

    if (e == 0.0) {
        // B = splitting / (2 gamma)
        est.sigma_b_mt = sigma_half / gamma;
    } else if (!inv.clamped && half * half - e * e > 0.0) {
        // dB/dh = h / (gamma sqrt(h^2 - E^2))
        est.sigma_b_mt = half / (gamma * std::sqrt(half * half - e * e)) * sigma_half;
    } else {
        est.sigma_b_mt = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(est.sigma_b_mt)) {
        // one-sided bound: field that a 1-sigma larger splitting would imply
        const double up = half + sigma_half;
        est.sigma_b_mt = std::sqrt(std::max(0.0, up * up - e * e)) / gamma - est.b_parallel_mt;
    }
    return est;
}

namespace {

// Tied fit with c2 - c1 held at split around the model's centre.
FitResult fit_fixed_split(const std::vector<double>& f, const std::vector<double>& y, const DoubleLorentzianModel& model,
                          double split, const FitOptions& base) {
    FitOptions opt = base;
    opt.tie_shapes = true;
    opt.fix_splitting = true;
    const double centre = 0.5 * (model.c1 + model.c2);
    DoubleLorentzianModel m = model;
    m.c1 = centre - 0.5 * split;
    m.c2 = centre + 0.5 * split;
    return fit_double_lorentzian(f, y, m, opt);
}

double profile_rss(const std::vector<double>& f, const std::vector<double>& y, const DoubleLorentzianModel& model,
                   double split, const FitOptions& base) {
    try {
        return fit_fixed_split(f, y, model, split, base).rss;
    } catch (const AnalysisError& e) {
        return e.best() ? e.best()->rss : std::numeric_limits<double>::infinity();
    }
}

// Golden-section minimum of the profile RSS over c2 - c1 in [0, max_split].
double profile_best_split(const std::vector<double>& f, const std::vector<double>& y, const DoubleLorentzianModel& model,
                          double max_split, const FitOptions& base) {
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = max_split;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double r1 = profile_rss(f, y, model, x1, base), r2 = profile_rss(f, y, model, x2, base);
    while (hi - lo > 1e-4) {
        if (r1 <= r2) {
            hi = x2;
            x2 = x1;
            r2 = r1;
            x1 = hi - inv_phi * (hi - lo);
            r1 = profile_rss(f, y, model, x1, base);
        } else {
            lo = x1;
            x1 = x2;
            r1 = r2;
            x2 = lo + inv_phi * (hi - lo);
            r2 = profile_rss(f, y, model, x2, base);
        }
    }
    const double mid = 0.5 * (lo + hi);
    return profile_rss(f, y, model, 0.0, base) <= profile_rss(f, y, model, mid, base) ? 0.0 : mid;
}

// Upper end of the profile-likelihood interval for c2 - c1: the splitting at
// which the refitted RSS exceeds the optimum by one estimated noise variance.
// Infinite when no such splitting is found.
double profile_upper_splitting(const std::vector<double>& f, const std::vector<double>& y, const FitResult& fit,
                               double step_mhz, const FitOptions& base) {
    const double dof = static_cast<double>(f.size()) - 5.0;
    const double target = fit.rss * (1.0 + 1.0 / dof);
    const double split0 = fit.model.c2 - fit.model.c1;
    auto above = [&](double split) { return profile_rss(f, y, fit.model, split, base) >= target; };
    double lo = split0;
    double hi = split0 + step_mhz;
    for (int i = 0; i < 12 && !above(hi); ++i) {
        lo = hi;
        hi = split0 + step_mhz * std::ldexp(1.0, i + 1);
    }
    if (!above(hi)) return std::numeric_limits<double>::infinity();
    for (int i = 0; i < 40 && hi - lo > 1e-6; ++i) {
        const double mid = 0.5 * (lo + hi);
        (above(mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace

Report analyze(const Spectrum& spec, const physics::NvParameters& params, const AnalyzeOptions& options) {
    Report report;
    report.meta = spec.meta;
    report.params = params;
    report.kernel_isa = std::string(kernels::to_string(kernels::active().isa));

    try {
        params.validate();
    } catch (const std::exception& e) {
        throw AnalyzeError("params", AnalysisErrorKind::InvalidInput, e.what(), report);
    }

    Spectrum work = spec;
    if (!spec.meta.baseline_applied) {
        try {
            work = controller::baseline_adjust(spec, options.margin_fraction);
        } catch (const std::exception& e) {
            throw AnalyzeError("baseline", AnalysisErrorKind::TooFewPoints, e.what(), report);
        }
    }
    report.meta = work.meta;
    const std::vector<double> f = work.frequencies_mhz();
    const std::vector<double> y = work.signals_mv();
    report.f_mhz = f;

    // detection thresholds
    const std::vector<double> smooth = moving_average(y, 5);
    const double plateau = controller::plateau_level(work, options.margin_fraction);
    const double floor = *std::min_element(smooth.begin(), smooth.end());
    const double depth = plateau - floor;
    double min_prom = options.min_prominence_mv;
    if (min_prom <= 0.0) min_prom = std::max({4.0 * estimate_noise_mv(y), 0.25 * depth, 1e-9});
    const double min_sep = options.min_separation_mhz > 0.0 ? options.min_separation_mhz : params.linewidth_mhz;

    try {
        report.candidates_mhz = detect_dips(work, min_prom, min_sep);
    } catch (const AnalysisError& e) {
        throw AnalyzeError("detect", e.kind(), e.what(), report);
    }

    auto depth_at = [&](double f_mhz) {
        const auto it = std::lower_bound(f.begin(), f.end(), f_mhz);
        const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - f.begin()), f.size() - 1);
        return std::max(plateau - smooth[idx], 1e-6);
    };

    DoubleLorentzianModel init;
    init.b0 = plateau;
    init.w1 = init.w2 = options.init_width_mhz;
    if (report.candidates_mhz.size() == 2) {
        init.c1 = report.candidates_mhz[0];
        init.c2 = report.candidates_mhz[1];
        init.a1 = depth_at(init.c1);
        init.a2 = depth_at(init.c2);
    } else {
        const double c = report.candidates_mhz[0];
        init.c1 = c - 0.5 * params.linewidth_mhz;
        init.c2 = c + 0.5 * params.linewidth_mhz;
        init.a1 = init.a2 = 0.5 * depth_at(c);
    }

    // A single merged dip leaves the free model underdetermined: both
    // transitions share contrast and linewidth, so their shapes are tied, and
    // the splitting is found by a bounded search over fixed-splitting fits.
    const bool merged = report.candidates_mhz.size() == 1;
    try {
        if (merged) {
            const double split = profile_best_split(f, y, init, 3.0 * params.linewidth_mhz, options.fit);
            report.fit = fit_fixed_split(f, y, init, split, options.fit);
        } else {
            report.fit = fit_double_lorentzian(f, y, init, options.fit);
        }
    } catch (const AnalysisError& e) {
        if (e.best()) report.fit = *e.best();
        throw AnalyzeError("fit", e.kind(), e.what(), report);
    }

    report.residuals_mv.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) report.residuals_mv[i] = y[i] - evaluate(report.fit.model, f[i]);

    try {
        report.field = estimate_field(report.fit, params);
    } catch (const AnalysisError& e) {
        throw AnalyzeError("estimate", e.kind(), e.what(), report);
    }
    if (merged) {
        // The splitting was not a free parameter of the final fit, so its
        // uncertainty comes from the profile bound.
        const double upper = profile_upper_splitting(f, y, report.fit, 0.25 * params.linewidth_mhz, options.fit);
        const double centre = 0.5 * (report.fit.model.c1 + report.fit.model.c2);
        const auto inv = physics::invert_splitting(params, {centre - 0.5 * upper, centre + 0.5 * upper});
        report.field.sigma_b_mt = std::isfinite(upper) ? inv.b_parallel_mt - report.field.b_parallel_mt : upper;
    }
    return report;
}

}  // namespace nvscope::analysis

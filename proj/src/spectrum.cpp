#include "nvscope/spectrum.hpp"

#include <cmath>
#include <string>

namespace nvscope {

namespace {
std::uint32_t to_khz(double mhz) { return static_cast<std::uint32_t>(std::llround(mhz * 1000.0)); }
}  // namespace

std::uint32_t SweepPlan::start_khz() const { return to_khz(start_mhz); }
std::uint32_t SweepPlan::stop_khz() const { return to_khz(stop_mhz); }
std::uint32_t SweepPlan::step_khz() const { return to_khz(step_mhz); }

std::size_t SweepPlan::point_count() const {
    const auto start = start_khz();
    const auto stop = stop_khz();
    const auto step = step_khz();
    if (step == 0 || stop < start) return 0;
    return (stop - start) / step + 1;
}

std::uint32_t SweepPlan::frequency_khz(std::size_t index) const {
    return start_khz() + static_cast<std::uint32_t>(index) * step_khz();
}

std::vector<std::uint32_t> SweepPlan::frequencies_khz() const {
    std::vector<std::uint32_t> out(point_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = frequency_khz(i);
    return out;
}

void SweepPlan::validate() const {
    if (!std::isfinite(start_mhz) || !std::isfinite(stop_mhz) || !std::isfinite(step_mhz))
        throw InvariantViolation("SweepPlan: non-finite bound");
    if (start_mhz <= 0.0 || stop_mhz > 4.0e6) throw InvariantViolation("SweepPlan: frequency out of u32 kHz range");
    if (start_mhz > stop_mhz) throw InvariantViolation("SweepPlan: start_mhz must be <= stop_mhz");
    if (step_khz() == 0) throw InvariantViolation("SweepPlan: step_mhz must be >= 0.001");
    if (n_avg < 1) throw InvariantViolation("SweepPlan: n_avg must be >= 1");
    if (point_count() > kMaxPoints) throw InvariantViolation("SweepPlan: more than 65535 points");
}

const char* to_string(SpectrumSource s) { return s == SpectrumSource::Real ? "real" : "simulated"; }

SpectrumSource source_from_string(const std::string& s) {
    if (s == "real") return SpectrumSource::Real;
    if (s == "simulated") return SpectrumSource::Simulated;
    throw InvariantViolation("unknown spectrum source '" + s + "'");
}

std::vector<double> Spectrum::frequencies_mhz() const {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.f_mhz());
    return out;
}

std::vector<double> Spectrum::signals_mv() const {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.signal_mv);
    return out;
}

void Spectrum::validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (p.n_avg < 1) throw InvariantViolation("spectrum point " + std::to_string(i) + ": n_avg < 1");
        if (!std::isfinite(p.signal_mv))
            throw InvariantViolation("spectrum point " + std::to_string(i) + ": non-finite signal");
        if (i > 0 && p.f_khz <= points[i - 1].f_khz)
            throw InvariantViolation("spectrum point " + std::to_string(i) + ": frequencies not strictly ascending");
    }
    if (points.size() != meta.plan.point_count()) {
        throw InvariantViolation("spectrum has " + std::to_string(points.size()) + " points but plan expects " +
                                 std::to_string(meta.plan.point_count()));
    }
}

bool operator==(const SweepPlan& a, const SweepPlan& b) {
    return a.start_khz() == b.start_khz() && a.stop_khz() == b.stop_khz() && a.step_khz() == b.step_khz() &&
           a.n_avg == b.n_avg && a.settle_ms == b.settle_ms;
}

bool operator==(const SpectrumMeta& a, const SpectrumMeta& b) {
    return a.timestamp == b.timestamp && a.device == b.device && a.plan == b.plan &&
           a.baseline_applied == b.baseline_applied && a.source == b.source;
}

bool operator==(const Spectrum& a, const Spectrum& b) { return a.points == b.points && a.meta == b.meta; }

}  // namespace nvscope

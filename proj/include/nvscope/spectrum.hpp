#pragma once

// Sweep plans and acquired spectra shared by the simulator, controller and
// analysis layers.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvscope {

class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Frequency sweep. Frequencies are specified in MHz but resolved to whole kHz
/// so that the point grid is exact.
struct SweepPlan {
    double start_mhz = 2614.0;
    double stop_mhz = 3126.0;
    double step_mhz = 4.0;
    std::uint16_t n_avg = 6;
    std::uint16_t settle_ms = 2;

    std::uint32_t start_khz() const;
    std::uint32_t stop_khz() const;
    std::uint32_t step_khz() const;

    /// floor((stop - start) / step) + 1, computed on the kHz grid.
    std::size_t point_count() const;
    std::uint32_t frequency_khz(std::size_t index) const;
    std::vector<std::uint32_t> frequencies_khz() const;

    void validate() const;

    static constexpr std::size_t kMaxPoints = 65535;
};

struct SpectrumPoint {
    std::uint32_t f_khz = 0;
    double signal_mv = 0.0;
    std::uint16_t n_avg = 1;

    double f_mhz() const { return f_khz / 1000.0; }
    bool operator==(const SpectrumPoint&) const = default;
};

enum class SpectrumSource { Real, Simulated };

const char* to_string(SpectrumSource s);
SpectrumSource source_from_string(const std::string& s);

struct SpectrumMeta {
    std::string timestamp;  // ISO-8601 UTC
    std::string device;     // free-form device identification
    SweepPlan plan;
    bool baseline_applied = false;
    SpectrumSource source = SpectrumSource::Simulated;
};

struct Spectrum {
    std::vector<SpectrumPoint> points;
    SpectrumMeta meta;

    std::size_t size() const { return points.size(); }
    std::vector<double> frequencies_mhz() const;
    std::vector<double> signals_mv() const;

    /// Ascending frequencies, finite signals, n_avg >= 1, count matching the plan.
    void validate() const;
};

bool operator==(const SweepPlan& a, const SweepPlan& b);
bool operator==(const SpectrumMeta& a, const SpectrumMeta& b);
bool operator==(const Spectrum& a, const Spectrum& b);

}  // namespace nvscope

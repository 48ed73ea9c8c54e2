#pragma once

// Host-side acquisition: drives sweeps over a Transport and post-processes
// the resulting spectra.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "nvscope/spectrum.hpp"
#include "nvscope/transport.hpp"

namespace nvscope::controller {

enum class AcquisitionErrorKind { Timeout, ProtocolError, DeviceError, Cancelled };

const char* to_string(AcquisitionErrorKind k);

class AcquisitionError : public std::runtime_error {
public:
    AcquisitionError(AcquisitionErrorKind kind, std::string stage, std::size_t points_received, const std::string& what)
        : std::runtime_error(what), kind_(kind), stage_(std::move(stage)), points_received_(points_received) {}

    AcquisitionErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }
    std::size_t points_received() const noexcept { return points_received_; }

private:
    AcquisitionErrorKind kind_;
    std::string stage_;
    std::size_t points_received_;
};

/// Shared between the acquiring thread and observers.
struct SweepControl {
    std::atomic<std::size_t> points_received{0};
    std::atomic<bool> abort{false};
};

/// Queries device info, runs one sweep and assembles the spectrum. The timeout
/// applies to every individual response frame.
Spectrum run_sweep(Transport& transport, const SweepPlan& plan, std::chrono::milliseconds timeout,
                   SweepControl* control = nullptr);

enum class BaselineMode {
    DipsNegative,   // signal - plateau
    DepthPositive,  // plateau - signal
};

class BaselineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Plateau = median of the top margin_fraction of signal values; the whole
/// spectrum is shifted by that one constant.
Spectrum baseline_adjust(const Spectrum& spec, double margin_fraction = 0.2,
                         BaselineMode mode = BaselineMode::DipsNegative);

/// The plateau value baseline_adjust would subtract.
double plateau_level(const Spectrum& spec, double margin_fraction = 0.2);

std::string utc_timestamp_now();

}  // namespace nvscope::controller

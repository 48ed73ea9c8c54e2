#pragma once

// Virtual ODMR instrument: the device side of the wire protocol backed by the
// physics forward model and a 12-bit ADC model.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "nvscope/physics.hpp"
#include "nvscope/protocol.hpp"
#include "nvscope/rng.hpp"

namespace nvscope::sim {

struct SimConfig {
    physics::NvParameters params;
    physics::MagneticField field;
    double noise_sigma_mv = 0.0;  // per ADC sample
    std::uint64_t seed = 0;
    std::uint16_t vref_mv = 3000;
    std::uint8_t adc_bits = 12;
    std::uint16_t fw_version = protocol::kSimulatedFirmwareFlag | 0x0001;
    bool rf_on = true;
    std::uint32_t min_out_khz = 35'000;
    std::uint32_t max_out_khz = 4'400'000;
};

struct AdcReading {
    std::uint16_t counts = 0;
    std::uint16_t millivolts_x10 = 0;
};

struct SweepProgress {
    protocol::SweepStart request;
    std::uint8_t seq = 0;
    std::uint32_t next_index = 0;
    std::uint32_t count = 0;
};

class SimDevice {
public:
    explicit SimDevice(SimConfig cfg);

    /// Processes one inbound frame and returns the immediate responses. A
    /// SweepStart only arms the sweep; its points are produced by poll().
    std::vector<protocol::Frame> accept(const protocol::Frame& frame);

    /// Next streamed frame of an in-progress sweep (SweepPoint..., SweepDone).
    std::optional<protocol::Frame> poll();

    bool sweep_active() const { return sweep_.has_value(); }

    /// accept() followed by draining poll(): the full response list.
    std::vector<protocol::Frame> handle_frame(const protocol::Frame& frame);

    /// Single-sample quantization: round(clamp(mv, 0, vref) / vref * (2^bits - 1)).
    AdcReading adc_quantize(double signal_mv) const;

    /// Noise-free signal at f (baseline only when RF is off or f unset).
    double true_signal_mv(std::uint32_t f_khz) const;

    /// Averages n noisy, individually quantized samples at f.
    AdcReading read_averaged(std::uint32_t f_khz, std::uint16_t n_avg);

    const SimConfig& config() const { return cfg_; }
    std::uint32_t current_f_khz() const { return current_f_khz_; }
    bool rf_on() const { return cfg_.rf_on; }
    std::uint16_t full_scale_counts() const { return static_cast<std::uint16_t>((1u << cfg_.adc_bits) - 1u); }

private:
    protocol::Frame reply(const protocol::Response& r, std::uint8_t seq) const { return protocol::to_frame(r, seq); }
    protocol::Frame error(protocol::DeviceErrorCode code, std::uint8_t seq) const;
    std::uint16_t to_x10(double mv) const;

    SimConfig cfg_;
    physics::ResonancePair pair_;
    GaussianRng rng_;
    std::uint32_t current_f_khz_ = 0;
    std::optional<SweepProgress> sweep_;
};

/// Serves a SimDevice over a pair of file descriptors (pipe, FIFO or pty
/// master) until stop is set, the peer hangs up, or idle_timeout elapses with
/// no inbound traffic (zero disables the idle timeout).
void serve(SimDevice& device, int read_fd, int write_fd, const std::atomic<bool>& stop,
           std::chrono::milliseconds idle_timeout = std::chrono::milliseconds{0});

}  // namespace nvscope::sim

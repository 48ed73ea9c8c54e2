#include "nvscope/simulator.hpp"

#include <poll.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nvscope::sim {

using namespace protocol;

SimDevice::SimDevice(SimConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.params.validate();
    cfg_.field.validate();
    if (cfg_.adc_bits < 1 || cfg_.adc_bits > 16) throw std::invalid_argument("SimConfig: adc_bits must be in [1, 16]");
    if (cfg_.vref_mv == 0) throw std::invalid_argument("SimConfig: vref_mv must be > 0");
    if (!(cfg_.noise_sigma_mv >= 0.0)) throw std::invalid_argument("SimConfig: noise_sigma_mv must be >= 0");
    pair_ = physics::hamiltonian_resonances(cfg_.params, cfg_.field);
}

Frame SimDevice::error(DeviceErrorCode code, std::uint8_t seq) const {
    return to_frame(Err{static_cast<std::uint8_t>(code)}, seq);
}

AdcReading SimDevice::adc_quantize(double signal_mv) const {
    const double full = full_scale_counts();
    const double clamped = std::clamp(signal_mv, 0.0, static_cast<double>(cfg_.vref_mv));
    const auto counts = static_cast<std::uint16_t>(std::lround(clamped / cfg_.vref_mv * full));
    return {counts, to_x10(counts * static_cast<double>(cfg_.vref_mv) / full)};
}

std::uint16_t SimDevice::to_x10(double mv) const {
    return static_cast<std::uint16_t>(std::clamp(std::lround(mv * 10.0), 0L, 65535L));
}

double SimDevice::true_signal_mv(std::uint32_t f_khz) const {
    if (!cfg_.rf_on || f_khz == 0) return cfg_.params.baseline_mv;
    return physics::odmr_signal(cfg_.params, pair_, f_khz / 1000.0);
}

AdcReading SimDevice::read_averaged(std::uint32_t f_khz, std::uint16_t n_avg) {
    const double truth = true_signal_mv(f_khz);
    const double full = full_scale_counts();
    std::uint64_t sum = 0;
    for (std::uint16_t i = 0; i < n_avg; ++i) {
        const double noise = cfg_.noise_sigma_mv > 0.0 ? rng_.normal(0.0, cfg_.noise_sigma_mv) : 0.0;
        sum += adc_quantize(truth + noise).counts;
    }
    const double mean_counts = static_cast<double>(sum) / n_avg;
    return {static_cast<std::uint16_t>(std::lround(mean_counts)), to_x10(mean_counts * cfg_.vref_mv / full)};
}

std::vector<Frame> SimDevice::accept(const Frame& frame) {
    Command cmd;
    try {
        cmd = parse_command(frame);
    } catch (const ProtocolError& e) {
        const auto code = e.kind() == ProtocolErrorKind::UnknownType ? DeviceErrorCode::UnknownType
                                                                      : DeviceErrorCode::BadPayload;
        return {error(code, frame.seq)};
    }

    const std::uint8_t seq = frame.seq;
    const std::uint8_t code = frame.ftype;
    std::vector<Frame> out;

    if (sweep_ && !std::holds_alternative<Abort>(cmd) && !std::holds_alternative<Ping>(cmd)) {
        return {error(DeviceErrorCode::Busy, seq)};
    }

    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, Ping>) {
                out.push_back(reply(Pong{}, seq));
            } else if constexpr (std::is_same_v<T, GetInfo>) {
                out.push_back(reply(Info{cfg_.fw_version, cfg_.adc_bits, cfg_.vref_mv}, seq));
            } else if constexpr (std::is_same_v<T, SetFrequency>) {
                if (c.f_khz < cfg_.min_out_khz || c.f_khz > cfg_.max_out_khz) {
                    out.push_back(error(DeviceErrorCode::OutOfRange, seq));
                } else {
                    current_f_khz_ = c.f_khz;
                    out.push_back(reply(Ack{code}, seq));
                }
            } else if constexpr (std::is_same_v<T, SetRfEnable>) {
                cfg_.rf_on = c.on != 0;
                out.push_back(reply(Ack{code}, seq));
            } else if constexpr (std::is_same_v<T, ReadAdc>) {
                if (c.n_avg == 0) {
                    out.push_back(error(DeviceErrorCode::InvalidArgument, seq));
                } else {
                    const AdcReading r = read_averaged(current_f_khz_, c.n_avg);
                    out.push_back(reply(AdcValue{r.counts, r.millivolts_x10}, seq));
                }
            } else if constexpr (std::is_same_v<T, SweepStart>) {
                if (c.step_khz == 0 || c.n_avg == 0 || c.start_khz > c.stop_khz) {
                    out.push_back(error(DeviceErrorCode::InvalidArgument, seq));
                    return;
                }
                if (c.start_khz < cfg_.min_out_khz || c.stop_khz > cfg_.max_out_khz) {
                    out.push_back(error(DeviceErrorCode::OutOfRange, seq));
                    return;
                }
                const std::uint64_t count = (c.stop_khz - c.start_khz) / c.step_khz + 1ULL;
                if (count > 65535) {
                    out.push_back(error(DeviceErrorCode::InvalidArgument, seq));
                    return;
                }
                sweep_ = SweepProgress{c, seq, 0, static_cast<std::uint32_t>(count)};
            } else if constexpr (std::is_same_v<T, Abort>) {
                if (sweep_) {
                    out.push_back(reply(SweepDone{static_cast<std::uint16_t>(sweep_->next_index)}, sweep_->seq));
                    sweep_.reset();
                }
                out.push_back(reply(Ack{code}, seq));
            }
        },
        cmd);
    return out;
}

std::optional<Frame> SimDevice::poll() {
    if (!sweep_) return std::nullopt;
    SweepProgress& s = *sweep_;
    if (s.next_index == s.count) {
        Frame done = reply(SweepDone{static_cast<std::uint16_t>(s.count)}, s.seq);
        sweep_.reset();
        return done;
    }
    const std::uint32_t f_khz = s.request.start_khz + s.next_index * s.request.step_khz;
    current_f_khz_ = f_khz;
    const AdcReading r = read_averaged(f_khz, s.request.n_avg);
    Frame point = reply(SweepPoint{static_cast<std::uint16_t>(s.next_index), f_khz, r.millivolts_x10}, s.seq);
    ++s.next_index;
    return point;
}

std::vector<Frame> SimDevice::handle_frame(const Frame& frame) {
    std::vector<Frame> out = accept(frame);
    while (auto f = poll()) out.push_back(std::move(*f));
    return out;
}

namespace {

bool write_all(int fd, std::span<const std::uint8_t> bytes) {
    while (!bytes.empty()) {
        const ssize_t n = ::write(fd, bytes.data(), bytes.size());
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            return false;
        }
        bytes = bytes.subspan(static_cast<std::size_t>(n));
    }
    return true;
}

}  // namespace

void serve(SimDevice& device, int read_fd, int write_fd, const std::atomic<bool>& stop,
           std::chrono::milliseconds idle_timeout) {
    FrameDecoder decoder;
    std::vector<std::uint8_t> buf(1024);
    auto last_rx = std::chrono::steady_clock::now();

    while (!stop.load()) {
        // stream sweep points one at a time so an Abort can interleave
        const int wait_ms = device.sweep_active() ? 0 : 20;
        pollfd pfd{read_fd, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, wait_ms);
        if (ready < 0 && errno != EINTR) return;
        if (ready > 0) {
            if (pfd.revents & POLLIN) {
                const ssize_t n = ::read(read_fd, buf.data(), buf.size());
                if (n == 0) return;
                if (n < 0) {
                    if (errno == EINTR || errno == EAGAIN) continue;
                    return;
                }
                last_rx = std::chrono::steady_clock::now();
                const DecodeOutput decoded = decoder.feed(std::span(buf.data(), static_cast<std::size_t>(n)));
                for (const Frame& f : decoded.frames) {
                    for (const Frame& r : device.accept(f)) {
                        if (!write_all(write_fd, encode_frame(r))) return;
                    }
                }
            } else if (pfd.revents & (POLLHUP | POLLERR | POLLNVAL)) {
                return;
            }
        }
        if (device.sweep_active()) {
            if (auto f = device.poll()) {
                if (!write_all(write_fd, encode_frame(*f))) return;
            }
        } else if (idle_timeout.count() > 0 && std::chrono::steady_clock::now() - last_rx > idle_timeout) {
            return;
        }
    }
}

}  // namespace nvscope::sim

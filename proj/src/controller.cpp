#include "nvscope/controller.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <optional>
#include <vector>

#include "nvscope/protocol.hpp"

namespace nvscope::controller {

using namespace protocol;

const char* to_string(AcquisitionErrorKind k) {
    switch (k) {
        case AcquisitionErrorKind::Timeout: return "Timeout";
        case AcquisitionErrorKind::ProtocolError: return "ProtocolError";
        case AcquisitionErrorKind::DeviceError: return "DeviceError";
        case AcquisitionErrorKind::Cancelled: return "Cancelled";
    }
    return "?";
}

std::string utc_timestamp_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    ::gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

// Half-duplex request/response link with one in-flight command.
class Link {
public:
    Link(Transport& t, std::chrono::milliseconds timeout) : transport_(t), timeout_(timeout) {}

    std::uint8_t send(const Command& c) {
        const std::uint8_t seq = next_seq_++;
        transport_.write(encode_frame(c, seq));
        return seq;
    }

    /// Next decoded frame, or nullopt after timeout_ without one.
    std::optional<Frame> receive() {
        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        std::vector<std::uint8_t> buf(256);
        while (pending_.empty()) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() < 0) return std::nullopt;
            const std::size_t n = transport_.read(buf, left);
            if (n == 0) continue;
            DecodeOutput out = decoder_.feed(std::span(buf.data(), n));
            for (auto& f : out.frames) pending_.push_back(std::move(f));
        }
        Frame f = std::move(pending_.front());
        pending_.erase(pending_.begin());
        return f;
    }

private:
    Transport& transport_;
    std::chrono::milliseconds timeout_;
    FrameDecoder decoder_;
    std::vector<Frame> pending_;
    std::uint8_t next_seq_ = 0;
};

std::string device_error_text(std::uint8_t code) {
    switch (static_cast<DeviceErrorCode>(code)) {
        case DeviceErrorCode::UnknownType: return "device reported UnknownType";
        case DeviceErrorCode::BadPayload: return "device reported BadPayload";
        case DeviceErrorCode::OutOfRange: return "device reported OutOfRange";
        case DeviceErrorCode::InvalidArgument: return "device reported InvalidArgument";
        case DeviceErrorCode::Busy: return "device reported Busy";
    }
    return "device reported error code " + std::to_string(code);
}

std::string describe_device(const Info& info) {
    std::string s = (info.fw_version & kSimulatedFirmwareFlag) ? "simulator" : "device";
    s += " fw=" + std::to_string(info.fw_version & ~kSimulatedFirmwareFlag);
    s += " adc_bits=" + std::to_string(info.adc_bits);
    s += " vref_mv=" + std::to_string(info.vref_mv);
    return s;
}

}  // namespace

Spectrum run_sweep(Transport& transport, const SweepPlan& plan, std::chrono::milliseconds timeout,
                   SweepControl* control) {
    plan.validate();
    Link link(transport, timeout);
    const std::size_t expected = plan.point_count();

    auto fail = [&](AcquisitionErrorKind kind, const std::string& stage, std::size_t got, const std::string& what) -> AcquisitionError {
        return AcquisitionError(kind, stage, got,
                                std::string(to_string(kind)) + " during " + stage + " after " + std::to_string(got) + "/" +
                                    std::to_string(expected) + " points: " + what);
    };

    // device identification
    const std::uint8_t info_seq = link.send(GetInfo{});
    std::optional<Frame> reply = link.receive();
    if (!reply) throw fail(AcquisitionErrorKind::Timeout, "get-info", 0, "no Info response");
    if (reply->seq != info_seq) throw fail(AcquisitionErrorKind::ProtocolError, "get-info", 0, "sequence mismatch");
    Info info;
    try {
        const Response r = parse_response(*reply);
        if (const auto* e = std::get_if<Err>(&r)) {
            throw fail(AcquisitionErrorKind::DeviceError, "get-info", 0, device_error_text(e->code));
        }
        const auto* i = std::get_if<Info>(&r);
        if (i == nullptr) throw fail(AcquisitionErrorKind::ProtocolError, "get-info", 0, "unexpected response type");
        info = *i;
    } catch (const ProtocolError& e) {
        throw fail(AcquisitionErrorKind::ProtocolError, "get-info", 0, e.what());
    }

    Spectrum spec;
    spec.meta.plan = plan;
    spec.meta.timestamp = utc_timestamp_now();
    spec.meta.device = describe_device(info);
    spec.meta.source = (info.fw_version & kSimulatedFirmwareFlag) ? SpectrumSource::Simulated : SpectrumSource::Real;
    spec.points.reserve(expected);

    SweepStart start;
    start.start_khz = plan.start_khz();
    start.stop_khz = plan.stop_khz();
    start.step_khz = plan.step_khz();
    start.n_avg = plan.n_avg;
    start.settle_ms = plan.settle_ms;
    const std::uint8_t sweep_seq = link.send(start);

    auto abort_device = [&] {
        try {
            link.send(Abort{});
        } catch (const TransportError&) {
        }
    };

    for (;;) {
        if (control != nullptr && control->abort.load()) {
            abort_device();
            // drain until the device confirms
            for (int i = 0; i < 70000; ++i) {
                auto f = link.receive();
                if (!f || f->ftype == static_cast<std::uint8_t>(MsgType::Ack)) break;
            }
            throw fail(AcquisitionErrorKind::Cancelled, "sweep", spec.points.size(), "aborted by request");
        }
        reply = link.receive();
        if (!reply) {
            abort_device();
            throw fail(AcquisitionErrorKind::Timeout, "sweep", spec.points.size(),
                       "no frame within " + std::to_string(timeout.count()) + " ms");
        }
        Response r;
        try {
            r = parse_response(*reply);
        } catch (const ProtocolError& e) {
            abort_device();
            throw fail(AcquisitionErrorKind::ProtocolError, "sweep", spec.points.size(), e.what());
        }
        if (const auto* e = std::get_if<Err>(&r)) {
            throw fail(AcquisitionErrorKind::DeviceError, "sweep", spec.points.size(), device_error_text(e->code));
        }
        if (reply->seq != sweep_seq) {
            abort_device();
            throw fail(AcquisitionErrorKind::ProtocolError, "sweep", spec.points.size(), "sequence mismatch");
        }
        if (const auto* p = std::get_if<SweepPoint>(&r)) {
            const std::size_t idx = spec.points.size();
            if (p->index != idx || idx >= expected) {
                abort_device();
                throw fail(AcquisitionErrorKind::ProtocolError, "sweep", idx,
                           "point index " + std::to_string(p->index) + " where " + std::to_string(idx) + " was expected");
            }
            if (p->f_khz != plan.frequency_khz(idx)) {
                abort_device();
                throw fail(AcquisitionErrorKind::ProtocolError, "sweep", idx,
                           "point " + std::to_string(idx) + " reports " + std::to_string(p->f_khz) + " kHz");
            }
            spec.points.push_back({p->f_khz, p->millivolts_x10 / 10.0, plan.n_avg});
            if (control != nullptr) control->points_received.store(spec.points.size());
            continue;
        }
        if (const auto* d = std::get_if<SweepDone>(&r)) {
            if (d->count != expected || spec.points.size() != expected) {
                throw fail(AcquisitionErrorKind::ProtocolError, "sweep", spec.points.size(),
                           "SweepDone reports " + std::to_string(d->count) + " points");
            }
            break;
        }
        abort_device();
        throw fail(AcquisitionErrorKind::ProtocolError, "sweep", spec.points.size(),
                   std::string("unexpected ") + type_name(reply->ftype) + " frame");
    }
    spec.validate();
    return spec;
}

double plateau_level(const Spectrum& spec, double margin_fraction) {
    if (spec.size() < 10) throw BaselineError("baseline: spectrum needs at least 10 points (TooFewPoints)");
    if (!(margin_fraction > 0.0 && margin_fraction <= 1.0))
        throw BaselineError("baseline: margin_fraction must lie in (0, 1]");
    std::vector<double> v = spec.signals_mv();
    std::sort(v.begin(), v.end(), std::greater<>());
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(margin_fraction * static_cast<double>(v.size()))));
    // median of v[0..k)
    return (k % 2 == 1) ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

Spectrum baseline_adjust(const Spectrum& spec, double margin_fraction, BaselineMode mode) {
    if (spec.meta.baseline_applied) throw BaselineError("baseline: spectrum already adjusted (AlreadyAdjusted)");
    const double plateau = plateau_level(spec, margin_fraction);
    Spectrum out = spec;
    for (auto& p : out.points) {
        p.signal_mv = mode == BaselineMode::DipsNegative ? p.signal_mv - plateau : plateau - p.signal_mv;
    }
    out.meta.baseline_applied = true;
    return out;
}

}  // namespace nvscope::controller

#include "nvscope/protocol.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <type_traits>

namespace nvscope::protocol {

namespace {

constexpr std::array<std::uint16_t, 256> make_crc_table() {
    std::array<std::uint16_t, 256> t{};
    for (unsigned i = 0; i < 256; ++i) {
        std::uint16_t c = static_cast<std::uint16_t>(i << 8);
        for (int b = 0; b < 8; ++b) c = (c & 0x8000) ? static_cast<std::uint16_t>((c << 1) ^ 0x1021) : static_cast<std::uint16_t>(c << 1);
        t[i] = c;
    }
    return t;
}

constexpr auto kCrcTable = make_crc_table();

class Writer {
public:
    Writer& u8(std::uint8_t v) {
        out_.push_back(v);
        return *this;
    }
    Writer& u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        return *this;
    }
    Writer& u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    Reader(const Frame& f, std::size_t expected) : data_(f.payload) {
        if (data_.size() != expected) {
            throw ProtocolError(ProtocolErrorKind::BadPayload,
                                std::string(type_name(f.ftype)) + ": payload is " + std::to_string(data_.size()) +
                                    " bytes, expected " + std::to_string(expected));
        }
    }
    std::uint8_t u8() { return data_[at_++]; }
    std::uint16_t u16() {
        const auto v = static_cast<std::uint16_t>(data_[at_] | data_[at_ + 1] << 8);
        at_ += 2;
        return v;
    }
    std::uint32_t u32() {
        const std::uint32_t v = static_cast<std::uint32_t>(data_[at_]) | static_cast<std::uint32_t>(data_[at_ + 1]) << 8 |
                                static_cast<std::uint32_t>(data_[at_ + 2]) << 16 |
                                static_cast<std::uint32_t>(data_[at_ + 3]) << 24;
        at_ += 4;
        return v;
    }

private:
    const std::vector<std::uint8_t>& data_;
    std::size_t at_ = 0;
};

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::uint16_t crc16(std::span<const std::uint8_t> data) {
    std::uint16_t crc = 0xFFFF;
    for (const std::uint8_t b : data) crc = static_cast<std::uint16_t>((crc << 8) ^ kCrcTable[((crc >> 8) ^ b) & 0xFF]);
    return crc;
}

bool is_known_type(std::uint8_t code) { return (code >= 0x01 && code <= 0x07) || (code >= 0x81 && code <= 0x87); }

const char* type_name(std::uint8_t code) {
    switch (static_cast<MsgType>(code)) {
        case MsgType::Ping: return "Ping";
        case MsgType::GetInfo: return "GetInfo";
        case MsgType::SetFrequency: return "SetFrequency";
        case MsgType::SetRfEnable: return "SetRfEnable";
        case MsgType::ReadAdc: return "ReadAdc";
        case MsgType::SweepStart: return "SweepStart";
        case MsgType::Abort: return "Abort";
        case MsgType::Pong: return "Pong";
        case MsgType::Info: return "Info";
        case MsgType::Ack: return "Ack";
        case MsgType::AdcValue: return "AdcValue";
        case MsgType::SweepPoint: return "SweepPoint";
        case MsgType::SweepDone: return "SweepDone";
        case MsgType::Err: return "Err";
    }
    return "Unknown";
}

std::uint8_t type_code(const Command& c) {
    // variant alternatives are declared in wire-code order 0x01..0x07
    return static_cast<std::uint8_t>(0x01 + c.index());
}

std::uint8_t type_code(const Response& r) {
    return static_cast<std::uint8_t>(0x81 + r.index());
}

Frame to_frame(const Command& c, std::uint8_t seq) {
    Writer w;
    std::visit(Overloaded{
                   [](const Ping&) {},
                   [](const GetInfo&) {},
                   [&](const SetFrequency& m) { w.u32(m.f_khz); },
                   [&](const SetRfEnable& m) { w.u8(m.on); },
                   [&](const ReadAdc& m) { w.u16(m.n_avg); },
                   [&](const SweepStart& m) { w.u32(m.start_khz).u32(m.stop_khz).u32(m.step_khz).u16(m.n_avg).u16(m.settle_ms); },
                   [](const Abort&) {},
               },
               c);
    return {type_code(c), seq, w.take()};
}

Frame to_frame(const Response& r, std::uint8_t seq) {
    Writer w;
    std::visit(Overloaded{
                   [](const Pong&) {},
                   [&](const Info& m) { w.u16(m.fw_version).u8(m.adc_bits).u16(m.vref_mv); },
                   [&](const Ack& m) { w.u8(m.code); },
                   [&](const AdcValue& m) { w.u16(m.counts).u16(m.millivolts_x10); },
                   [&](const SweepPoint& m) { w.u16(m.index).u32(m.f_khz).u16(m.millivolts_x10); },
                   [&](const SweepDone& m) { w.u16(m.count); },
                   [&](const Err& m) { w.u8(m.code); },
               },
               r);
    return {type_code(r), seq, w.take()};
}

Command parse_command(const Frame& f) {
    switch (static_cast<MsgType>(f.ftype)) {
        case MsgType::Ping: Reader(f, 0); return Ping{};
        case MsgType::GetInfo: Reader(f, 0); return GetInfo{};
        case MsgType::SetFrequency: {
            Reader r(f, 4);
            return SetFrequency{r.u32()};
        }
        case MsgType::SetRfEnable: {
            Reader r(f, 1);
            return SetRfEnable{r.u8()};
        }
        case MsgType::ReadAdc: {
            Reader r(f, 2);
            return ReadAdc{r.u16()};
        }
        case MsgType::SweepStart: {
            Reader r(f, 16);
            SweepStart s;
            s.start_khz = r.u32();
            s.stop_khz = r.u32();
            s.step_khz = r.u32();
            s.n_avg = r.u16();
            s.settle_ms = r.u16();
            return s;
        }
        case MsgType::Abort: Reader(f, 0); return Abort{};
        default: break;
    }
    throw ProtocolError(ProtocolErrorKind::UnknownType, "not a command type: " + std::to_string(f.ftype));
}

Response parse_response(const Frame& f) {
    switch (static_cast<MsgType>(f.ftype)) {
        case MsgType::Pong: Reader(f, 0); return Pong{};
        case MsgType::Info: {
            Reader r(f, 5);
            Info m;
            m.fw_version = r.u16();
            m.adc_bits = r.u8();
            m.vref_mv = r.u16();
            return m;
        }
        case MsgType::Ack: {
            Reader r(f, 1);
            return Ack{r.u8()};
        }
        case MsgType::AdcValue: {
            Reader r(f, 4);
            AdcValue m;
            m.counts = r.u16();
            m.millivolts_x10 = r.u16();
            return m;
        }
        case MsgType::SweepPoint: {
            Reader r(f, 8);
            SweepPoint m;
            m.index = r.u16();
            m.f_khz = r.u32();
            m.millivolts_x10 = r.u16();
            return m;
        }
        case MsgType::SweepDone: {
            Reader r(f, 2);
            return SweepDone{r.u16()};
        }
        case MsgType::Err: {
            Reader r(f, 1);
            return Err{r.u8()};
        }
        default: break;
    }
    throw ProtocolError(ProtocolErrorKind::UnknownType, "not a response type: " + std::to_string(f.ftype));
}

std::vector<std::uint8_t> encode_frame(const Frame& f) {
    if (f.payload.size() > kMaxPayload) {
        throw ProtocolError(ProtocolErrorKind::PayloadTooLarge,
                            "payload of " + std::to_string(f.payload.size()) + " bytes exceeds 512");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kOverheadBytes + f.payload.size());
    const auto len = static_cast<std::uint16_t>(f.payload.size());
    out.push_back(kSof);
    out.push_back(f.ftype);
    out.push_back(f.seq);
    out.push_back(static_cast<std::uint8_t>(len));
    out.push_back(static_cast<std::uint8_t>(len >> 8));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    const std::uint16_t crc = crc16(std::span(out).subspan(1));
    out.push_back(static_cast<std::uint8_t>(crc));
    out.push_back(static_cast<std::uint8_t>(crc >> 8));
    return out;
}

std::vector<std::uint8_t> encode_frame(const Command& c, std::uint8_t seq) { return encode_frame(to_frame(c, seq)); }
std::vector<std::uint8_t> encode_frame(const Response& r, std::uint8_t seq) { return encode_frame(to_frame(r, seq)); }

const char* to_string(DecodeErrorKind k) {
    switch (k) {
        case DecodeErrorKind::BadCrc: return "BadCrc";
        case DecodeErrorKind::UnknownType: return "UnknownType";
        case DecodeErrorKind::LengthOverflow: return "LengthOverflow";
    }
    return "?";
}

void FrameDecoder::reset() {
    buf_.clear();
    consumed_ = 0;
    discarded_ = 0;
    peak_ = 0;
}

DecodeOutput FrameDecoder::feed(std::span<const std::uint8_t> chunk) {
    DecodeOutput out;
    feed(chunk, out);
    return out;
}

void FrameDecoder::feed(std::span<const std::uint8_t> chunk, DecodeOutput& out) {
    while (!chunk.empty()) {
        const std::size_t room = kMaxFrameBytes - buf_.size();
        const std::size_t take = std::min(room, chunk.size());
        buf_.insert(buf_.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(take));
        chunk = chunk.subspan(take);
        peak_ = std::max(peak_, buf_.size());
        drain(out);
    }
}

void FrameDecoder::drain(DecodeOutput& out) {
    std::size_t head = 0;
    auto drop = [&](std::size_t n) {
        head += n;
        discarded_ += n;
    };
    while (head < buf_.size()) {
        if (buf_[head] != kSof) {
            const auto it = std::find(buf_.begin() + static_cast<std::ptrdiff_t>(head), buf_.end(), kSof);
            drop(static_cast<std::size_t>(it - buf_.begin()) - head);
            continue;
        }
        const std::size_t avail = buf_.size() - head;
        if (avail < kHeaderBytes) break;
        const std::size_t len = buf_[head + 3] | static_cast<std::size_t>(buf_[head + 4]) << 8;
        if (len > kMaxPayload) {
            out.errors.push_back({DecodeErrorKind::LengthOverflow, consumed_ + head});
            drop(1);
            continue;
        }
        const std::size_t total = kOverheadBytes + len;
        if (avail < total) break;
        const std::span<const std::uint8_t> body(buf_.data() + head + 1, kHeaderBytes - 1 + len);
        const std::uint16_t got = static_cast<std::uint16_t>(buf_[head + 5 + len] | buf_[head + 6 + len] << 8);
        if (crc16(body) != got) {
            out.errors.push_back({DecodeErrorKind::BadCrc, consumed_ + head});
            drop(1);
            continue;
        }
        Frame f;
        f.ftype = buf_[head + 1];
        f.seq = buf_[head + 2];
        f.payload.assign(buf_.begin() + static_cast<std::ptrdiff_t>(head + kHeaderBytes),
                         buf_.begin() + static_cast<std::ptrdiff_t>(head + kHeaderBytes + len));
        if (!is_known_type(f.ftype)) out.errors.push_back({DecodeErrorKind::UnknownType, consumed_ + head});
        out.frames.push_back(std::move(f));
        head += total;
    }
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head));
    consumed_ += head;
}

std::string hex(std::span<const std::uint8_t> bytes) {
    std::string s;
    s.reserve(bytes.size() * 3);
    char tmp[4];
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        std::snprintf(tmp, sizeof tmp, "%02X", bytes[i]);
        if (i) s.push_back(' ');
        s += tmp;
    }
    return s;
}

}  // namespace nvscope::protocol

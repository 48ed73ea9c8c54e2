#pragma once

// Host <-> device binary framing.
//
//   A5 | type | seq | len (u16 LE) | payload[len] | crc (u16 LE)
//
// The CRC is CRC-16/CCITT-FALSE over type..payload. All multi-byte payload
// fields are little-endian. See docs/protocol.md for hex dumps.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace nvscope::protocol {

inline constexpr std::uint8_t kSof = 0xA5;
inline constexpr std::size_t kHeaderBytes = 5;  // sof, type, seq, len
inline constexpr std::size_t kOverheadBytes = 7;
inline constexpr std::size_t kMaxPayload = 512;
inline constexpr std::size_t kMaxFrameBytes = kMaxPayload + kOverheadBytes;

enum class MsgType : std::uint8_t {
    Ping = 0x01,
    GetInfo = 0x02,
    SetFrequency = 0x03,
    SetRfEnable = 0x04,
    ReadAdc = 0x05,
    SweepStart = 0x06,
    Abort = 0x07,

    Pong = 0x81,
    Info = 0x82,
    Ack = 0x83,
    AdcValue = 0x84,
    SweepPoint = 0x85,
    SweepDone = 0x86,
    Err = 0x87,
};

bool is_known_type(std::uint8_t code);
const char* type_name(std::uint8_t code);

/// Error codes carried by Err responses.
enum class DeviceErrorCode : std::uint8_t {
    UnknownType = 0x01,
    BadPayload = 0x02,
    OutOfRange = 0x03,
    InvalidArgument = 0x04,
    Busy = 0x05,  // command rejected while a sweep is streaming
};

std::uint16_t crc16(std::span<const std::uint8_t> data);

struct Frame {
    std::uint8_t ftype = 0;
    std::uint8_t seq = 0;
    std::vector<std::uint8_t> payload;

    bool operator==(const Frame&) const = default;
};

// Commands (host -> device)
struct Ping { bool operator==(const Ping&) const = default; };
struct GetInfo { bool operator==(const GetInfo&) const = default; };
struct SetFrequency {
    std::uint32_t f_khz = 0;
    bool operator==(const SetFrequency&) const = default;
};
struct SetRfEnable {
    std::uint8_t on = 0;
    bool operator==(const SetRfEnable&) const = default;
};
struct ReadAdc {
    std::uint16_t n_avg = 1;
    bool operator==(const ReadAdc&) const = default;
};
struct SweepStart {
    std::uint32_t start_khz = 0;
    std::uint32_t stop_khz = 0;
    std::uint32_t step_khz = 0;
    std::uint16_t n_avg = 1;
    std::uint16_t settle_ms = 0;
    bool operator==(const SweepStart&) const = default;
};
struct Abort { bool operator==(const Abort&) const = default; };

using Command = std::variant<Ping, GetInfo, SetFrequency, SetRfEnable, ReadAdc, SweepStart, Abort>;

// Responses (device -> host)
struct Pong { bool operator==(const Pong&) const = default; };
struct Info {
    std::uint16_t fw_version = 0;
    std::uint8_t adc_bits = 12;
    std::uint16_t vref_mv = 3000;
    bool operator==(const Info&) const = default;
};
struct Ack {
    std::uint8_t code = 0;  // type code of the acknowledged command
    bool operator==(const Ack&) const = default;
};
struct AdcValue {
    std::uint16_t counts = 0;
    std::uint16_t millivolts_x10 = 0;
    bool operator==(const AdcValue&) const = default;
};
struct SweepPoint {
    std::uint16_t index = 0;
    std::uint32_t f_khz = 0;
    std::uint16_t millivolts_x10 = 0;
    bool operator==(const SweepPoint&) const = default;
};
struct SweepDone {
    std::uint16_t count = 0;
    bool operator==(const SweepDone&) const = default;
};
struct Err {
    std::uint8_t code = 0;
    bool operator==(const Err&) const = default;
};

using Response = std::variant<Pong, Info, Ack, AdcValue, SweepPoint, SweepDone, Err>;

/// Firmware versions with this bit set identify the virtual instrument.
inline constexpr std::uint16_t kSimulatedFirmwareFlag = 0x8000;

enum class ProtocolErrorKind { PayloadTooLarge, UnknownType, BadPayload };

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(ProtocolErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ProtocolErrorKind kind() const noexcept { return kind_; }

private:
    ProtocolErrorKind kind_;
};

std::uint8_t type_code(const Command& c);
std::uint8_t type_code(const Response& r);

Frame to_frame(const Command& c, std::uint8_t seq);
Frame to_frame(const Response& r, std::uint8_t seq);

/// Throws ProtocolError (UnknownType / BadPayload).
Command parse_command(const Frame& f);
Response parse_response(const Frame& f);

/// Throws ProtocolError(PayloadTooLarge) when the payload exceeds 512 bytes.
std::vector<std::uint8_t> encode_frame(const Frame& f);
std::vector<std::uint8_t> encode_frame(const Command& c, std::uint8_t seq);
std::vector<std::uint8_t> encode_frame(const Response& r, std::uint8_t seq);

enum class DecodeErrorKind { BadCrc, UnknownType, LengthOverflow };

const char* to_string(DecodeErrorKind k);

struct DecodeError {
    DecodeErrorKind kind;
    std::uint64_t stream_offset;  // offset of the offending SOF byte in the input stream
    bool operator==(const DecodeError&) const = default;
};

struct DecodeOutput {
    std::vector<Frame> frames;
    std::vector<DecodeError> errors;
};

/// Incremental push parser. Buffers at most one maximum-size frame; bytes are
/// consumed only when they form a frame or are discarded while resynchronizing.
///
/// CRC-valid frames with a type code outside the command/response sets are
/// delivered and additionally reported as UnknownType, so a device can answer
/// them with Err.
class FrameDecoder {
public:
    DecodeOutput feed(std::span<const std::uint8_t> chunk);
    void feed(std::span<const std::uint8_t> chunk, DecodeOutput& out);

    std::size_t buffered() const { return buf_.size(); }
    std::size_t peak_buffered() const { return peak_; }
    std::uint64_t bytes_discarded() const { return discarded_; }
    void reset();

private:
    void drain(DecodeOutput& out);

    std::vector<std::uint8_t> buf_;
    std::uint64_t consumed_ = 0;  // stream offset of buf_[0]
    std::uint64_t discarded_ = 0;
    std::size_t peak_ = 0;
};

std::string hex(std::span<const std::uint8_t> bytes);

}  // namespace nvscope::protocol

#include <doctest.h>

#include <string>
#include <variant>

#include "nvscope/protocol.hpp"
#include "support.hpp"

using namespace nvscope::protocol;

namespace {

Command random_command(nvtest::Gen& g) {
    switch (g.integer(0, 6)) {
        case 0: return Ping{};
        case 1: return GetInfo{};
        case 2: return SetFrequency{static_cast<std::uint32_t>(g.integer(0, 0xFFFFFFFF))};
        case 3: return SetRfEnable{static_cast<std::uint8_t>(g.integer(0, 1))};
        case 4: return ReadAdc{static_cast<std::uint16_t>(g.integer(1, 65535))};
        case 5:
            return SweepStart{static_cast<std::uint32_t>(g.integer(0, 0xFFFFFFFF)),
                              static_cast<std::uint32_t>(g.integer(0, 0xFFFFFFFF)),
                              static_cast<std::uint32_t>(g.integer(0, 0xFFFFFFFF)),
                              static_cast<std::uint16_t>(g.integer(0, 65535)),
                              static_cast<std::uint16_t>(g.integer(0, 65535))};
        default: return Abort{};
    }
}

Response random_response(nvtest::Gen& g) {
    switch (g.integer(0, 6)) {
        case 0: return Pong{};
        case 1:
            return Info{static_cast<std::uint16_t>(g.integer(0, 65535)), static_cast<std::uint8_t>(g.integer(0, 255)),
                        static_cast<std::uint16_t>(g.integer(0, 65535))};
        case 2: return Ack{g.byte()};
        case 3: return AdcValue{static_cast<std::uint16_t>(g.integer(0, 65535)), static_cast<std::uint16_t>(g.integer(0, 65535))};
        case 4:
            return SweepPoint{static_cast<std::uint16_t>(g.integer(0, 65535)),
                              static_cast<std::uint32_t>(g.integer(0, 0xFFFFFFFF)),
                              static_cast<std::uint16_t>(g.integer(0, 65535))};
        case 5: return SweepDone{static_cast<std::uint16_t>(g.integer(0, 65535))};
        default: return Err{g.byte()};
    }
}

}  // namespace

TEST_SUITE("protocol") {

TEST_CASE("CRC-16/CCITT-FALSE check value") {
    const std::string s = "123456789";
    const std::span<const std::uint8_t> data(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    CHECK(crc16(data) == 0x29B1);
    CHECK(nvtest::crc16_bitwise(data) == 0x29B1);
    CHECK(crc16({}) == 0xFFFF);
}

TEST_CASE("table-driven CRC matches the bitwise definition") {
    nvtest::Gen g(3);
    for (int i = 0; i < 2000; ++i) {
        const auto data = g.bytes(g.integer(0, 600));
        REQUIRE(crc16(data) == nvtest::crc16_bitwise(data));
    }
}

TEST_CASE("ping frame layout") {
    const auto bytes = encode_frame(Command{Ping{}}, 0x01);
    REQUIRE(bytes.size() == 7);
    CHECK(bytes[0] == 0xA5);
    CHECK(bytes[1] == 0x01);
    CHECK(bytes[2] == 0x01);
    CHECK(bytes[3] == 0x00);
    CHECK(bytes[4] == 0x00);
    const std::uint16_t crc = nvtest::crc16_bitwise(std::span(bytes).subspan(1, 4));
    CHECK(bytes[5] == (crc & 0xFF));
    CHECK(bytes[6] == (crc >> 8));
}

TEST_CASE("type codes: commands 0x01..0x07, responses 0x81..0x87") {
    CHECK(type_code(Command{Ping{}}) == 0x01);
    CHECK(type_code(Command{SweepStart{}}) == 0x06);
    CHECK(type_code(Command{Abort{}}) == 0x07);
    CHECK(type_code(Response{Pong{}}) == 0x81);
    CHECK(type_code(Response{SweepPoint{}}) == 0x85);
    CHECK(type_code(Response{Err{}}) == 0x87);
}

TEST_CASE("payload sizes and little-endian fields") {
    const Frame f = to_frame(Command{SweepStart{2614000, 3126000, 4000, 6, 2}}, 9);
    CHECK(f.payload.size() == 16);
    CHECK(f.payload[0] == (2614000 & 0xFF));
    CHECK(f.payload[3] == (2614000 >> 24));
    const Frame p = to_frame(Response{SweepPoint{3, 2870000, 1999}}, 9);
    CHECK(p.payload.size() == 8);
    CHECK(p.payload[0] == 3);
    CHECK(to_frame(Response{Info{}}, 0).payload.size() == 5);
}

TEST_CASE("every message round-trips through its frame") {
    nvtest::Gen g(7);
    for (int i = 0; i < 3000; ++i) {
        const Command c = random_command(g);
        REQUIRE(parse_command(to_frame(c, g.byte())) == c);
        const Response r = random_response(g);
        REQUIRE(parse_response(to_frame(r, g.byte())) == r);
    }
}

TEST_CASE("payload length mismatches and unknown codes are rejected on parse") {
    Frame f = to_frame(Command{SetFrequency{1}}, 0);
    f.payload.pop_back();
    CHECK_THROWS_AS(parse_command(f), ProtocolError);
    Frame u{0x42, 0, {}};
    try {
        parse_command(u);
        FAIL("expected throw");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolErrorKind::UnknownType);
    }
    CHECK_THROWS_AS(parse_response(Frame{0x01, 0, {}}), ProtocolError);
}

TEST_CASE("oversized payloads cannot be encoded") {
    Frame f{0x01, 0, std::vector<std::uint8_t>(kMaxPayload + 1)};
    CHECK_THROWS_AS(encode_frame(f), ProtocolError);
    f.payload.resize(kMaxPayload);
    CHECK(encode_frame(f).size() == kMaxFrameBytes);
}

TEST_CASE("decoder reassembles frames under random chunking") {
    nvtest::Gen g(11);
    std::vector<Frame> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 500; ++i) {
        const Frame f = g.coin() ? to_frame(random_command(g), g.byte()) : to_frame(random_response(g), g.byte());
        sent.push_back(f);
        const auto enc = encode_frame(f);
        stream.insert(stream.end(), enc.begin(), enc.end());
    }
    FrameDecoder dec;
    std::vector<Frame> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        const std::size_t n = std::min<std::size_t>(g.integer(1, 40), stream.size() - pos);
        const auto out = dec.feed(std::span(stream).subspan(pos, n));
        REQUIRE(out.errors.empty());
        got.insert(got.end(), out.frames.begin(), out.frames.end());
        pos += n;
    }
    CHECK(got == sent);
    CHECK(dec.buffered() == 0);
}

TEST_CASE("decoder resynchronizes after a corrupted frame") {
    const auto good1 = encode_frame(Command{Ping{}}, 1);
    auto bad = encode_frame(Command{SetFrequency{2870000}}, 2);
    bad[6] ^= 0xFF;
    const auto good2 = encode_frame(Command{GetInfo{}}, 3);
    std::vector<std::uint8_t> stream{0x00, 0x13};
    for (const std::vector<std::uint8_t>* v : {&good1, static_cast<const std::vector<std::uint8_t>*>(&bad), &good2})
        stream.insert(stream.end(), v->begin(), v->end());

    FrameDecoder dec;
    const auto out = dec.feed(stream);
    REQUIRE(out.frames.size() == 2);
    CHECK(out.frames[0].seq == 1);
    CHECK(out.frames[1].seq == 3);
    REQUIRE(out.errors.size() == 1);
    CHECK(out.errors[0].kind == DecodeErrorKind::BadCrc);
    CHECK(out.errors[0].stream_offset == 2 + good1.size());
    CHECK(dec.bytes_discarded() >= 2);
}

TEST_CASE("length fields above the maximum payload are reported, not buffered") {
    std::vector<std::uint8_t> stream{0xA5, 0x01, 0x00, 0xFF, 0xFF};
    const auto good = encode_frame(Command{Ping{}}, 5);
    stream.insert(stream.end(), good.begin(), good.end());
    FrameDecoder dec;
    const auto out = dec.feed(stream);
    REQUIRE(out.frames.size() == 1);
    CHECK(out.frames[0].seq == 5);
    REQUIRE(!out.errors.empty());
    CHECK(out.errors[0].kind == DecodeErrorKind::LengthOverflow);
    CHECK(out.errors[0].stream_offset == 0);
}

TEST_CASE("CRC-valid frames of unknown type are delivered and flagged") {
    const auto bytes = encode_frame(Frame{0x42, 9, {1, 2, 3}});
    FrameDecoder dec;
    const auto out = dec.feed(bytes);
    REQUIRE(out.frames.size() == 1);
    CHECK(out.frames[0].ftype == 0x42);
    REQUIRE(out.errors.size() == 1);
    CHECK(out.errors[0].kind == DecodeErrorKind::UnknownType);
}

TEST_CASE("random noise never grows the buffer beyond one frame") {
    nvtest::Gen g(99);
    FrameDecoder dec;
    for (int i = 0; i < 2000; ++i) {
        auto chunk = g.bytes(g.integer(1, 64));
        if (g.integer(0, 9) == 0) chunk[0] = 0xA5;
        dec.feed(chunk);
        REQUIRE(dec.buffered() <= kMaxFrameBytes);
    }
    CHECK(dec.peak_buffered() <= kMaxFrameBytes);
}

TEST_CASE("hex formatting") {
    const std::vector<std::uint8_t> v{0xA5, 0x01, 0x0F};
    CHECK(hex(v) == "A5 01 0F");
}

}

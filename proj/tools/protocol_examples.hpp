#pragma once

// One representative frame per message type, as shown in docs/protocol.md.

#include <string>
#include <utility>
#include <vector>

#include "nvscope/protocol.hpp"

namespace nvscope::protocol {

inline std::vector<std::pair<std::string, Frame>> example_frames() {
    return {
        {"Ping", to_frame(Command{Ping{}}, 0x01)},
        {"GetInfo", to_frame(Command{GetInfo{}}, 0x02)},
        {"SetFrequency", to_frame(Command{SetFrequency{2870000}}, 0x03)},
        {"SetRfEnable", to_frame(Command{SetRfEnable{1}}, 0x04)},
        {"ReadAdc", to_frame(Command{ReadAdc{6}}, 0x05)},
        {"SweepStart", to_frame(Command{SweepStart{2614000, 3126000, 4000, 6, 2}}, 0x06)},
        {"Abort", to_frame(Command{Abort{}}, 0x07)},
        {"Pong", to_frame(Response{Pong{}}, 0x01)},
        {"Info", to_frame(Response{Info{0x8001, 12, 3000}}, 0x02)},
        {"Ack", to_frame(Response{Ack{0x03}}, 0x03)},
        {"AdcValue", to_frame(Response{AdcValue{273, 2000}}, 0x05)},
        {"SweepPoint", to_frame(Response{SweepPoint{0, 2614000, 1999}}, 0x06)},
        {"SweepDone", to_frame(Response{SweepDone{129}}, 0x06)},
        {"Err", to_frame(Response{Err{0x05}}, 0x04)},
    };
}

}  // namespace nvscope::protocol

// Prints the example frame of every message type as "Name: A5 .." lines.

#include <iostream>

#include "protocol_examples.hpp"

int main() {
    using namespace nvscope::protocol;
    for (const auto& [name, frame] : example_frames()) std::cout << name << ": " << hex(encode_frame(frame)) << '\n';
    return 0;
}

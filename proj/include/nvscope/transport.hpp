#pragma once

// Duplex byte transports used by the acquisition controller.

#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include "nvscope/protocol.hpp"
#include "nvscope/simulator.hpp"

namespace nvscope {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual void write(std::span<const std::uint8_t> bytes) = 0;
    /// Blocks up to timeout; returns 0 when nothing arrived.
    virtual std::size_t read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) = 0;
};

/// In-memory channel wired directly to a SimDevice. Sweep points are pulled
/// from the device one frame at a time as the host reads.
class SimTransport final : public Transport {
public:
    explicit SimTransport(sim::SimDevice& device) : device_(device) {}

    void write(std::span<const std::uint8_t> bytes) override;
    std::size_t read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;

    /// Stops delivering device output after this many more frames (fault injection).
    void go_silent_after(std::size_t frames) { silent_after_ = frames; }

private:
    bool pull_one();

    sim::SimDevice& device_;
    protocol::FrameDecoder decoder_;
    std::deque<std::uint8_t> outbound_;
    std::size_t silent_after_ = static_cast<std::size_t>(-1);
};

/// POSIX file-descriptor transport (serial port, pty, pipe pair).
class FdTransport final : public Transport {
public:
    /// Takes ownership of the descriptors when owns is true.
    FdTransport(int read_fd, int write_fd, bool owns);
    ~FdTransport() override;
    FdTransport(const FdTransport&) = delete;
    FdTransport& operator=(const FdTransport&) = delete;

    void write(std::span<const std::uint8_t> bytes) override;
    std::size_t read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;

private:
    int read_fd_;
    int write_fd_;
    bool owns_;
};

struct SerialSettings {
    std::string port;
    unsigned baud = 115200;  // 8N1, raw
};

/// Opens a serial device (or pty). Terminal settings are applied when the path
/// is a tty. Throws TransportError naming the port on failure.
std::unique_ptr<FdTransport> open_serial(const SerialSettings& settings);

/// Puts a terminal fd into raw 8N1 mode at the given baud rate.
void configure_raw_tty(int fd, unsigned baud);

/// Pseudo-terminal with a raw line discipline. The device side talks on
/// master_fd; a host opens slave_path like any serial port. A slave handle
/// is held open so the master never sees a hangup between host sessions.
class PtyPair {
public:
    PtyPair();
    ~PtyPair();
    PtyPair(const PtyPair&) = delete;
    PtyPair& operator=(const PtyPair&) = delete;

    int master_fd() const { return master_; }
    const std::string& slave_path() const { return slave_path_; }

private:
    int master_ = -1;
    int slave_keepalive_ = -1;
    std::string slave_path_;
};

}  // namespace nvscope

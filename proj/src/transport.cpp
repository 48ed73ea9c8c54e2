#include "nvscope/transport.hpp"

#include <fcntl.h>
#include <poll.h>
#include <termios.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace nvscope {

void SimTransport::write(std::span<const std::uint8_t> bytes) {
    const protocol::DecodeOutput decoded = decoder_.feed(bytes);
    for (const auto& frame : decoded.frames) {
        for (const auto& reply : device_.accept(frame)) {
            if (silent_after_ == 0) continue;
            if (silent_after_ != static_cast<std::size_t>(-1)) --silent_after_;
            const auto enc = protocol::encode_frame(reply);
            outbound_.insert(outbound_.end(), enc.begin(), enc.end());
        }
    }
}

bool SimTransport::pull_one() {
    if (silent_after_ == 0) return false;
    auto frame = device_.poll();
    if (!frame) return false;
    if (silent_after_ != static_cast<std::size_t>(-1)) --silent_after_;
    const auto enc = protocol::encode_frame(*frame);
    outbound_.insert(outbound_.end(), enc.begin(), enc.end());
    return true;
}

std::size_t SimTransport::read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
    if (outbound_.empty() && !pull_one()) {
        // nothing will ever arrive without further host writes; behave like a silent line
        std::this_thread::sleep_for(timeout);
        return 0;
    }
    const std::size_t n = std::min(out.size(), outbound_.size());
    std::copy_n(outbound_.begin(), n, out.begin());
    outbound_.erase(outbound_.begin(), outbound_.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
}

FdTransport::FdTransport(int read_fd, int write_fd, bool owns) : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {}

FdTransport::~FdTransport() {
    if (!owns_) return;
    ::close(read_fd_);
    if (write_fd_ != read_fd_) ::close(write_fd_);
}

void FdTransport::write(std::span<const std::uint8_t> bytes) {
    while (!bytes.empty()) {
        const ssize_t n = ::write(write_fd_, bytes.data(), bytes.size());
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw TransportError(std::string("write failed: ") + std::strerror(errno));
        }
        bytes = bytes.subspan(static_cast<std::size_t>(n));
    }
}

std::size_t FdTransport::read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
    pollfd pfd{read_fd_, POLLIN, 0};
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        const int ready = ::poll(&pfd, 1, static_cast<int>(std::max<std::int64_t>(0, left.count())));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("poll failed: ") + std::strerror(errno));
        }
        if (ready == 0) return 0;
        if (pfd.revents & POLLIN) {
            const ssize_t n = ::read(read_fd_, out.data(), out.size());
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                throw TransportError(std::string("read failed: ") + std::strerror(errno));
            }
            return static_cast<std::size_t>(n);
        }
        // hangup with nothing left to read behaves like silence
        if (pfd.revents & (POLLHUP | POLLERR | POLLNVAL)) return 0;
    }
}

namespace {
speed_t baud_constant(unsigned baud) {
    switch (baud) {
        case 9600: return B9600;
        case 19200: return B19200;
        case 38400: return B38400;
        case 57600: return B57600;
        case 115200: return B115200;
        case 230400: return B230400;
        case 460800: return B460800;
        case 921600: return B921600;
        default: throw TransportError("unsupported baud rate " + std::to_string(baud));
    }
}
}  // namespace

void configure_raw_tty(int fd, unsigned baud) {
    termios tio{};
    if (::tcgetattr(fd, &tio) != 0) throw TransportError(std::string("tcgetattr failed: ") + std::strerror(errno));
    ::cfmakeraw(&tio);
    tio.c_cflag &= ~static_cast<tcflag_t>(CSTOPB | PARENB | CSIZE);
    tio.c_cflag |= CS8 | CLOCAL | CREAD;
    tio.c_cc[VMIN] = 0;
    tio.c_cc[VTIME] = 0;
    const speed_t speed = baud_constant(baud);
    ::cfsetispeed(&tio, speed);
    ::cfsetospeed(&tio, speed);
    if (::tcsetattr(fd, TCSANOW, &tio) != 0) throw TransportError(std::string("tcsetattr failed: ") + std::strerror(errno));
}

std::unique_ptr<FdTransport> open_serial(const SerialSettings& settings) {
    if (settings.port.empty()) throw TransportError("no serial port given (use --port or NVSCOPE_PORT)");
    const int fd = ::open(settings.port.c_str(), O_RDWR | O_NOCTTY | O_CLOEXEC);
    if (fd < 0) {
        throw TransportError("cannot open serial port '" + settings.port + "': " + std::strerror(errno));
    }
    if (::isatty(fd)) {
        try {
            configure_raw_tty(fd, settings.baud);
        } catch (const TransportError& e) {
            ::close(fd);
            throw TransportError("serial port '" + settings.port + "': " + e.what());
        }
    }
    return std::make_unique<FdTransport>(fd, fd, true);
}

PtyPair::PtyPair() {
    master_ = ::posix_openpt(O_RDWR | O_NOCTTY | O_CLOEXEC);
    if (master_ < 0) throw TransportError(std::string("posix_openpt failed: ") + std::strerror(errno));
    if (::grantpt(master_) != 0 || ::unlockpt(master_) != 0) {
        const int err = errno;
        ::close(master_);
        throw TransportError(std::string("cannot unlock pty: ") + std::strerror(err));
    }
    char name[128];
    if (::ptsname_r(master_, name, sizeof name) != 0) {
        const int err = errno;
        ::close(master_);
        throw TransportError(std::string("ptsname failed: ") + std::strerror(err));
    }
    slave_path_ = name;
    slave_keepalive_ = ::open(name, O_RDWR | O_NOCTTY | O_CLOEXEC);
    if (slave_keepalive_ < 0) {
        const int err = errno;
        ::close(master_);
        throw TransportError("cannot open '" + slave_path_ + "': " + std::strerror(err));
    }
    configure_raw_tty(slave_keepalive_, 115200);
}

PtyPair::~PtyPair() {
    if (slave_keepalive_ >= 0) ::close(slave_keepalive_);
    if (master_ >= 0) ::close(master_);
}

}  // namespace nvscope

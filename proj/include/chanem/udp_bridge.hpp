// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams

#ifndef CHANEM_UDP_BRIDGE_HPP
#define CHANEM_UDP_BRIDGE_HPP

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanem/scenario.hpp"
#include "chanem/stream_io.hpp"
#include "chanem/tdl_engine.hpp"

namespace chanem {

struct UdpEndpoint {
    std::string host;
    uint16_t port = 0;
};

/// Parse "host:port". The host part may be a name or a dotted address.
inline UdpEndpoint parse_endpoint(std::string_view text) {
    const size_t colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size())
        throw std::invalid_argument("endpoint '" + std::string(text) +
                                    "' is not HOST:PORT");
    UdpEndpoint ep;
    ep.host = std::string(text.substr(0, colon));
    const std::string port_text(text.substr(colon + 1));
    char* end = nullptr;
    const long port = std::strtol(port_text.c_str(), &end, 10);
    if (end != port_text.c_str() + port_text.size() || port < 1 || port > 65535)
        throw std::invalid_argument("endpoint '" + std::string(text) + "': bad port");
    ep.port = static_cast<uint16_t>(port);
    return ep;
}

struct BridgeOptions {
    UdpEndpoint listen;          ///< frames arrive here
    UdpEndpoint destination;     ///< processed frames go here
    int idle_timeout_ms = 0;     ///< 0 = wait forever
    bool wall_clock = false;     ///< apply updates by elapsed time (non-reproducible)
};

struct BridgeStats {
    uint64_t frames_in = 0;
    uint64_t frames_out = 0;
    uint64_t samples = 0;
    uint64_t lost_frames = 0;
    uint64_t decode_errors = 0;
    bool ended_by_sentinel = false;
    bool ended_by_timeout = false;
};

namespace detail {

class UdpSocket {
public:
    UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
        if (fd_ < 0) throw std::runtime_error("socket() failed");
    }
    ~UdpSocket() {
        if (fd_ >= 0) ::close(fd_);
    }
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;

    int fd() const { return fd_; }

    void bind(const UdpEndpoint& ep) {
        const sockaddr_in addr = resolve(ep);
        const int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
            throw std::runtime_error("cannot bind UDP " + ep.host + ":" +
                                     std::to_string(ep.port));
    }

    void set_receive_timeout_ms(int ms) {
        if (ms <= 0) return;
        timeval tv{};
        tv.tv_sec = ms / 1000;
        tv.tv_usec = (ms % 1000) * 1000;
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    }

    /// Returns payload size; -1 on timeout. Empty datagrams return 0.
    ssize_t receive(std::vector<uint8_t>& buf) {
        buf.resize(65536);
        const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0, nullptr, nullptr);
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) return -1;
            throw std::runtime_error("recvfrom() failed");
        }
        buf.resize(static_cast<size_t>(n));
        return n;
    }

    void send_to(const UdpEndpoint& ep, const uint8_t* data, size_t size) {
        const sockaddr_in addr = resolve(ep);
        if (::sendto(fd_, data, size, 0, reinterpret_cast<const sockaddr*>(&addr),
                     sizeof addr) < 0)
            throw std::runtime_error("sendto " + ep.host + ":" + std::to_string(ep.port) +
                                     " failed");
    }

    static sockaddr_in resolve(const UdpEndpoint& ep) {
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_DGRAM;
        addrinfo* res = nullptr;
        if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
            throw std::runtime_error("cannot resolve host '" + ep.host + "'");
        addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
        freeaddrinfo(res);
        return addr;
    }

private:
    int fd_;
};

}  // namespace detail

/// Relay frames between two UDP endpoints through the channel engine,
/// strictly one frame at a time so sample order is preserved and nothing
/// buffers without bound. An empty datagram marks end of stream and is
/// forwarded. In the default deterministic mode schedule entries fire on
/// the cumulative received-sample count; with wall_clock they fire on
/// elapsed milliseconds instead (explicitly not reproducible).
inline BridgeStats run_udp_bridge(TdlEngine& engine, const Schedule* schedule,
                                  const BridgeOptions& options) {
    detail::UdpSocket sock;
    sock.bind(options.listen);
    sock.set_receive_timeout_ms(options.idle_timeout_ms);

    BridgeStats stats;
    FrameGapTracker gaps;
    std::vector<ScheduleEntry> entries;
    if (schedule != nullptr) entries = schedule->entries;
    ScheduleRunner runner(engine, entries);
    size_t next_timed = 0;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<uint8_t> buf;
    for (;;) {
        const ssize_t n = sock.receive(buf);
        if (n < 0) {
            stats.ended_by_timeout = true;
            break;
        }
        if (n == 0) {
            stats.ended_by_sentinel = true;
            const uint8_t dummy = 0;
            sock.send_to(options.destination, &dummy, 0);
            break;
        }
        UdpFrame frame;
        try {
            frame = decode_frame(buf);
        } catch (const std::exception&) {
            ++stats.decode_errors;
            continue;
        }
        ++stats.frames_in;
        stats.lost_frames += gaps.observe(frame.seq);
        stats.samples += frame.payload.size();

        UdpFrame out;
        out.seq = stats.frames_out;
        if (options.wall_clock) {
            const double elapsed_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          t0)
                    .count();
            while (next_timed < entries.size() && entries[next_timed].t_ms <= elapsed_ms) {
                engine.set_taps(entries[next_timed].taps);
                ++next_timed;
            }
            out.payload = engine.process_block(frame.payload);
        } else {
            out.payload = runner.process_block(frame.payload);
        }
        const auto bytes = encode_frame(out);
        sock.send_to(options.destination, bytes.data(), bytes.size());
        ++stats.frames_out;
    }
    return stats;
}

}  // namespace chanem

#endif  // CHANEM_UDP_BRIDGE_HPP

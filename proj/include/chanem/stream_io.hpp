// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams

#ifndef CHANEM_STREAM_IO_HPP
#define CHANEM_STREAM_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanem/fixed_point.hpp"

namespace chanem {

/// Interleaved raw capture formats, little-endian, I before Q.
/// sc16: signed 16-bit integer pairs (4 bytes/sample), full scale 32767.
/// cf32: 32-bit float pairs (8 bytes/sample), full scale 1.0.
enum class IqFormat { sc16, cf32 };

inline constexpr size_t bytes_per_sample(IqFormat f) {
    return f == IqFormat::sc16 ? 4 : 8;
}

inline const char* to_string(IqFormat f) { return f == IqFormat::sc16 ? "sc16" : "cf32"; }

inline IqFormat parse_iq_format(std::string_view name) {
    if (name == "sc16") return IqFormat::sc16;
    if (name == "cf32") return IqFormat::cf32;
    throw std::invalid_argument("unknown IQ format '" + std::string(name) +
                                "' (expected sc16 or cf32)");
}

struct IqFileMeta {
    IqFormat format = IqFormat::sc16;
    double sample_rate_hz = 0.0;
    uint64_t sample_count = 0;
};

namespace detail {

inline void put_u16le(uint16_t v, uint8_t* p) {
    p[0] = static_cast<uint8_t>(v & 0xff);
    p[1] = static_cast<uint8_t>(v >> 8);
}

inline uint16_t get_u16le(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (static_cast<uint16_t>(p[1]) << 8));
}

inline void put_u32le(uint32_t v, uint8_t* p) {
    for (int k = 0; k < 4; ++k) p[k] = static_cast<uint8_t>(v >> (8 * k));
}

inline uint32_t get_u32le(const uint8_t* p) {
    uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<uint32_t>(p[k]) << (8 * k);
    return v;
}

inline void put_u64le(uint64_t v, uint8_t* p) {
    for (int k = 0; k < 8; ++k) p[k] = static_cast<uint8_t>(v >> (8 * k));
}

inline uint64_t get_u64le(const uint8_t* p) {
    uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<uint64_t>(p[k]) << (8 * k);
    return v;
}

inline void put_f32le(float v, uint8_t* p) { put_u32le(std::bit_cast<uint32_t>(v), p); }

inline float get_f32le(const uint8_t* p) { return std::bit_cast<float>(get_u32le(p)); }

inline QuantizerConfig cf32_quantizer() { return QuantizerConfig{1.0, 16, 0.0}; }

}  // namespace detail

/// Decode a raw byte buffer. Throws if the length is not a whole number of
/// samples or, for cf32, if a component is not finite.
inline std::vector<IqSample16> decode_iq_bytes(std::span<const uint8_t> bytes, IqFormat fmt) {
    const size_t bps = bytes_per_sample(fmt);
    if (bytes.size() % bps != 0)
        throw std::runtime_error("truncated IQ data: " + std::to_string(bytes.size()) +
                                 " bytes is not a multiple of " + std::to_string(bps));
    const size_t count = bytes.size() / bps;
    std::vector<IqSample16> out(count);
    if (fmt == IqFormat::sc16) {
        for (size_t n = 0; n < count; ++n) {
            out[n].i = static_cast<int16_t>(detail::get_u16le(bytes.data() + 4 * n));
            out[n].q = static_cast<int16_t>(detail::get_u16le(bytes.data() + 4 * n + 2));
        }
    } else {
        const QuantizerConfig cfg = detail::cf32_quantizer();
        for (size_t n = 0; n < count; ++n) {
            const float re = detail::get_f32le(bytes.data() + 8 * n);
            const float im = detail::get_f32le(bytes.data() + 8 * n + 4);
            if (!std::isfinite(re) || !std::isfinite(im))
                throw std::runtime_error("cf32 data: non-finite sample at index " +
                                         std::to_string(n));
            out[n].i = quantize_component(re, cfg);
            out[n].q = quantize_component(im, cfg);
        }
    }
    return out;
}

inline std::vector<uint8_t> encode_iq_bytes(std::span<const IqSample16> samples, IqFormat fmt) {
    const size_t bps = bytes_per_sample(fmt);
    std::vector<uint8_t> out(samples.size() * bps);
    if (fmt == IqFormat::sc16) {
        for (size_t n = 0; n < samples.size(); ++n) {
            detail::put_u16le(static_cast<uint16_t>(samples[n].i), out.data() + 4 * n);
            detail::put_u16le(static_cast<uint16_t>(samples[n].q), out.data() + 4 * n + 2);
        }
    } else {
        // Every 16-bit code is exact in a 32-bit float, so this direction
        // round-trips bit-for-bit through decode.
        for (size_t n = 0; n < samples.size(); ++n) {
            detail::put_f32le(static_cast<float>(samples[n].i) / 32768.0f, out.data() + 8 * n);
            detail::put_f32le(static_cast<float>(samples[n].q) / 32768.0f,
                              out.data() + 8 * n + 4);
        }
    }
    return out;
}

inline std::vector<IqSample16> read_iq(const std::string& path, IqFormat fmt) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "' for reading");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (in.bad())
        throw std::runtime_error("I/O error reading '" + path + "'");
    try {
        return decode_iq_bytes(bytes, fmt);
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

inline void write_iq(std::span<const IqSample16> samples, const std::string& path,
                     IqFormat fmt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    const auto bytes = encode_iq_bytes(samples, fmt);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("I/O error writing '" + path + "'");
}

inline IqFileMeta probe_iq(const std::string& path, IqFormat fmt, double sample_rate_hz = 0.0) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    const auto size = static_cast<uint64_t>(in.tellg());
    const size_t bps = bytes_per_sample(fmt);
    if (size % bps != 0)
        throw std::runtime_error(path + ": truncated file, " + std::to_string(size) +
                                 " bytes is not a multiple of " + std::to_string(bps));
    return IqFileMeta{fmt, sample_rate_hz, size / bps};
}

/// Chunked reader for large captures; validates the length up front.
class IqFileReader {
public:
    IqFileReader(const std::string& path, IqFormat fmt)
        : meta_(probe_iq(path, fmt)), in_(path, std::ios::binary), fmt_(fmt) {
        if (!in_)
            throw std::runtime_error("cannot open '" + path + "' for reading");
        path_ = path;
    }

    const IqFileMeta& meta() const { return meta_; }

    /// Read up to max_samples; returns an empty vector at end of file.
    std::vector<IqSample16> read(size_t max_samples) {
        const size_t bps = bytes_per_sample(fmt_);
        buf_.resize(max_samples * bps);
        in_.read(reinterpret_cast<char*>(buf_.data()),
                 static_cast<std::streamsize>(buf_.size()));
        const auto got = static_cast<size_t>(in_.gcount());
        if (in_.bad())
            throw std::runtime_error("I/O error reading '" + path_ + "'");
        buf_.resize(got);
        return decode_iq_bytes(buf_, fmt_);
    }

private:
    IqFileMeta meta_;
    std::ifstream in_;
    IqFormat fmt_;
    std::string path_;
    std::vector<uint8_t> buf_;
};

class IqFileWriter {
public:
    IqFileWriter(const std::string& path, IqFormat fmt)
        : out_(path, std::ios::binary | std::ios::trunc), fmt_(fmt), path_(path) {
        if (!out_)
            throw std::runtime_error("cannot open '" + path + "' for writing");
    }

    void write(std::span<const IqSample16> samples) {
        const auto bytes = encode_iq_bytes(samples, fmt_);
        out_.write(reinterpret_cast<const char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
        if (!out_)
            throw std::runtime_error("I/O error writing '" + path_ + "'");
        written_ += samples.size();
    }

    uint64_t samples_written() const { return written_; }

private:
    std::ofstream out_;
    IqFormat fmt_;
    std::string path_;
    uint64_t written_ = 0;
};

/// One datagram of the sample bridge: an 8-byte sequence number and a
/// 4-byte sample count (both little-endian), then `count` sc16 samples.
struct UdpFrame {
    uint64_t seq = 0;
    std::vector<IqSample16> payload;  // count = payload.size(), >= 1

    friend bool operator==(const UdpFrame&, const UdpFrame&) = default;
};

inline constexpr size_t udp_frame_header_bytes = 12;

inline std::vector<uint8_t> encode_frame(const UdpFrame& frame) {
    if (frame.payload.empty())
        throw std::invalid_argument("encode_frame: payload must hold at least one sample");
    std::vector<uint8_t> out(udp_frame_header_bytes + 4 * frame.payload.size());
    detail::put_u64le(frame.seq, out.data());
    detail::put_u32le(static_cast<uint32_t>(frame.payload.size()), out.data() + 8);
    for (size_t n = 0; n < frame.payload.size(); ++n) {
        detail::put_u16le(static_cast<uint16_t>(frame.payload[n].i), out.data() + 12 + 4 * n);
        detail::put_u16le(static_cast<uint16_t>(frame.payload[n].q),
                          out.data() + 12 + 4 * n + 2);
    }
    return out;
}

inline UdpFrame decode_frame(std::span<const uint8_t> bytes) {
    if (bytes.size() < udp_frame_header_bytes)
        throw std::runtime_error("frame shorter than the 12-byte header");
    UdpFrame f;
    f.seq = detail::get_u64le(bytes.data());
    const uint32_t count = detail::get_u32le(bytes.data() + 8);
    if (count == 0)
        throw std::runtime_error("frame declares zero samples");
    if (bytes.size() != udp_frame_header_bytes + 4ull * count)
        throw std::runtime_error("frame declares " + std::to_string(count) + " samples but has " +
                                 std::to_string(bytes.size() - udp_frame_header_bytes) +
                                 " payload bytes");
    f.payload.resize(count);
    for (uint32_t n = 0; n < count; ++n) {
        f.payload[n].i = static_cast<int16_t>(detail::get_u16le(bytes.data() + 12 + 4 * n));
        f.payload[n].q = static_cast<int16_t>(detail::get_u16le(bytes.data() + 12 + 4 * n + 2));
    }
    return f;
}

/// Tracks sequence numbers of received frames and counts the holes.
/// Losses are only reported, never retransmitted, like an RF link.
class FrameGapTracker {
public:
    /// Feed the next received sequence number; returns how many frames were
    /// newly detected as lost (0 for in-order or stale/duplicate frames).
    uint64_t observe(uint64_t seq) {
        if (first_) {
            first_ = false;
            expected_ = seq + 1;
            return 0;
        }
        if (seq < expected_) return 0;  // stale or duplicate
        const uint64_t missed = seq - expected_;
        expected_ = seq + 1;
        lost_ += missed;
        return missed;
    }

    uint64_t lost() const { return lost_; }

private:
    bool first_ = true;
    uint64_t expected_ = 0;
    uint64_t lost_ = 0;
};

}  // namespace chanem

#endif  // CHANEM_STREAM_IO_HPP

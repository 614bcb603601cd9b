// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams

#ifndef CHANEM_FIXED_POINT_HPP
#define CHANEM_FIXED_POINT_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chanem {

/// One complex baseband sample as two signed 16-bit integer codes.
/// Full scale maps to code 32767; the negative range extends to -32768
/// (two's complement, asymmetric by one code).
struct IqSample16 {
    int16_t i = 0;
    int16_t q = 0;

    friend bool operator==(const IqSample16&, const IqSample16&) = default;
};

/// Converter settings at the real/integer boundary. `bits` is the effective
/// resolution; codes produced with bits < 16 are left-aligned, so their
/// (16 - bits) low bits are zero, the way a narrower converter feeds a
/// 16-bit bus.
struct QuantizerConfig {
    double full_scale = 1.0;       ///< real amplitude mapped to the top code
    int bits = 16;                 ///< effective resolution, 1..16
    double sample_period_s = 0.0;  ///< Ts, informational only

    /// Quantization step: full_scale / 2^(bits-1).
    double step() const { return full_scale / static_cast<double>(1 << (bits - 1)); }

    void validate() const {
        if (!std::isfinite(full_scale) || full_scale <= 0.0)
            throw std::invalid_argument("QuantizerConfig: full_scale must be positive and finite");
        if (bits < 1 || bits > 16)
            throw std::invalid_argument("QuantizerConfig: bits must be in [1, 16]");
    }
};

/// Quantize one real component: round x/step to the nearest integer with
/// ties away from zero, saturate to the bits-wide code range, left-align.
inline int16_t quantize_component(double x, const QuantizerConfig& cfg) {
    const long long top = (1LL << (cfg.bits - 1)) - 1;
    const long long bottom = -(1LL << (cfg.bits - 1));
    // Clamp in the real domain first so llround never sees an out-of-range
    // argument; anything beyond +-2^15 saturates regardless.
    const double t = std::clamp(x / cfg.step(), -65536.0, 65536.0);
    const long long code = std::clamp(std::llround(t), bottom, top);
    return static_cast<int16_t>(code << (16 - cfg.bits));
}

/// Inverse mapping: code -> code * step * 2^(bits-16). Left-aligned codes
/// produced by quantize_component map back onto the original grid.
inline double dequantize_component(int16_t code, const QuantizerConfig& cfg) {
    return static_cast<double>(code) * std::ldexp(cfg.step(), cfg.bits - 16);
}

/// Quantize a block of complex samples. Throws on the first non-finite
/// input component, naming its index.
inline std::vector<IqSample16> quantize(std::span<const std::complex<double>> block,
                                        const QuantizerConfig& cfg) {
    cfg.validate();
    std::vector<IqSample16> out(block.size());
    for (size_t n = 0; n < block.size(); ++n) {
        const double re = block[n].real();
        const double im = block[n].imag();
        if (!std::isfinite(re) || !std::isfinite(im))
            throw std::invalid_argument("quantize: non-finite sample at index " + std::to_string(n));
        out[n].i = quantize_component(re, cfg);
        out[n].q = quantize_component(im, cfg);
    }
    return out;
}

inline std::vector<std::complex<double>> dequantize(std::span<const IqSample16> block,
                                                    const QuantizerConfig& cfg) {
    cfg.validate();
    std::vector<std::complex<double>> out(block.size());
    for (size_t n = 0; n < block.size(); ++n)
        out[n] = {dequantize_component(block[n].i, cfg), dequantize_component(block[n].q, cfg)};
    return out;
}

}  // namespace chanem

#endif  // CHANEM_FIXED_POINT_HPP

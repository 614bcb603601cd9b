// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams

#ifndef CHANEM_TDL_ENGINE_HPP
#define CHANEM_TDL_ENGINE_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chanem/fixed_point.hpp"

namespace chanem {

/// Emulator geometry: sample clock, delay-line length, coefficient width
/// and the number of coarse bit-shift stages.
struct EngineParams {
    double clock_hz = 200e6;  ///< f: clock / sample rate of the delay line
    int taps_n = 42;          ///< N: delay-line length (max tap index N-1)
    int coeff_bits = 15;      ///< r: coefficients span [0, 2^r - 1]
    int shift_bits = 8;       ///< s: global right-shift spans [0, s]

    int max_coeff() const { return (1 << coeff_bits) - 1; }
    double delay_step_s() const { return 1.0 / clock_hz; }
    double max_delay_s() const { return static_cast<double>(taps_n - 1) / clock_hz; }

    void validate() const {
        if (!std::isfinite(clock_hz) || clock_hz <= 0.0)
            throw std::invalid_argument("EngineParams: clock_hz must be positive and finite");
        if (taps_n < 1)
            throw std::invalid_argument("EngineParams: taps_n must be >= 1");
        if (coeff_bits < 1 || coeff_bits > 15)
            throw std::invalid_argument("EngineParams: coeff_bits must be in [1, 15]");
        if (shift_bits < 0 || shift_bits > 31)
            throw std::invalid_argument("EngineParams: shift_bits must be in [0, 31]");
    }
};

/// One delayed-and-scaled signal component.
struct Tap {
    int index = 0;  ///< delay in samples, 0..N-1
    int coeff = 0;  ///< scale b, 0..2^r-1; 0 disables the tap

    friend bool operator==(const Tap&, const Tap&) = default;
};

/// The instantaneous channel: a global right-shift plus a sparse list of
/// taps with strictly increasing indices.
struct TapSet {
    int shift = 0;          ///< j: divides every output by 2^j
    std::vector<Tap> taps;

    friend bool operator==(const TapSet&, const TapSet&) = default;
};

inline void validate_taps(const TapSet& taps, const EngineParams& params) {
    if (taps.shift < 0 || taps.shift > params.shift_bits)
        throw std::invalid_argument("TapSet: shift " + std::to_string(taps.shift) +
                                    " outside [0, " + std::to_string(params.shift_bits) + "]");
    if (taps.taps.size() > static_cast<size_t>(params.taps_n))
        throw std::invalid_argument("TapSet: more taps than delay-line entries");
    int prev = -1;
    for (const Tap& t : taps.taps) {
        if (t.index < 0 || t.index >= params.taps_n)
            throw std::invalid_argument("TapSet: tap index " + std::to_string(t.index) +
                                        " outside [0, " + std::to_string(params.taps_n - 1) + "]");
        if (t.index <= prev)
            throw std::invalid_argument("TapSet: tap indices must be strictly increasing");
        if (t.coeff < 0 || t.coeff > params.max_coeff())
            throw std::invalid_argument("TapSet: coefficient " + std::to_string(t.coeff) +
                                        " outside [0, " + std::to_string(params.max_coeff()) + "]");
        prev = t.index;
    }
}

/// Identity channel: no shift, tap 0 at full coefficient (0 dB gain).
inline TapSet passthrough_taps(const EngineParams& params) {
    return TapSet{0, {Tap{0, params.max_coeff()}}};
}

struct ProcessStats {
    uint64_t samples_processed = 0;
    uint64_t clipped = 0;  ///< I and Q components count separately

    friend bool operator==(const ProcessStats&, const ProcessStats&) = default;
};

/// Where the coarse shift is applied relative to the FIR sum.
///
/// combined:       one exact accumulation, then a single rounded division by
///                 2^j * (2^r - 1). Error <= 0.5 LSB per component.
/// hardware_order: arithmetic right shift (truncation toward -inf) on each
///                 input sample before the FIR, then a rounded division by
///                 (2^r - 1). Mirrors a shift stage in front of the filter.
enum class FilterOrder { combined, hardware_order };

inline int64_t div_round_half_away(int64_t num, int64_t den) {
    // den > 0. Exact in 128-bit intermediates.
    using I = __int128;
    if (num >= 0)
        return static_cast<int64_t>((static_cast<I>(2) * num + den) / (static_cast<I>(2) * den));
    return -static_cast<int64_t>((static_cast<I>(2) * -num + den) / (static_cast<I>(2) * den));
}

/// The channel core. A sequential stateful processor: one logical user at a
/// time; distinct instances are independent. The delay line starts at zero
/// and keeps running across tap updates (it is never flushed by set_taps).
class TdlEngine {
public:
    explicit TdlEngine(const EngineParams& params, FilterOrder order = FilterOrder::combined)
        : params_(params), order_(order) {
        params_.validate();
        history_.assign(static_cast<size_t>(params_.taps_n - 1), IqSample16{});
        set_taps(passthrough_taps(params_));
    }

    const EngineParams& params() const { return params_; }
    FilterOrder order() const { return order_; }
    const TapSet& taps() const { return taps_; }
    const ProcessStats& stats() const { return stats_; }

    /// Swap in a new tap configuration; takes effect from the next sample.
    void set_taps(TapSet taps) {
        validate_taps(taps, params_);
        taps_ = std::move(taps);
    }

    /// Zero the delay line and the stats counters; taps are kept.
    void reset() {
        std::fill(history_.begin(), history_.end(), IqSample16{});
        stats_ = {};
    }

    /// Run one block through the channel. Output length equals input length;
    /// splitting a stream into blocks of any sizes yields identical output.
    std::vector<IqSample16> process_block(std::span<const IqSample16> input) {
        const size_t hist = history_.size();  // N - 1
        work_.resize(hist + input.size());
        std::copy(history_.begin(), history_.end(), work_.begin());
        std::copy(input.begin(), input.end(), work_.begin() + static_cast<ptrdiff_t>(hist));

        const int64_t unit = params_.max_coeff();
        const int64_t divisor =
            order_ == FilterOrder::combined ? unit << taps_.shift : unit;
        const bool preshift = order_ == FilterOrder::hardware_order && taps_.shift > 0;

        std::vector<IqSample16> out(input.size());
        for (size_t n = 0; n < input.size(); ++n) {
            const size_t pos = hist + n;
            int64_t acc_i = 0;
            int64_t acc_q = 0;
            for (const Tap& t : taps_.taps) {
                const IqSample16& x = work_[pos - static_cast<size_t>(t.index)];
                int64_t xi = x.i;
                int64_t xq = x.q;
                if (preshift) {
                    xi >>= taps_.shift;
                    xq >>= taps_.shift;
                }
                acc_i += static_cast<int64_t>(t.coeff) * xi;
                acc_q += static_cast<int64_t>(t.coeff) * xq;
            }
            out[n].i = saturate16(div_round_half_away(acc_i, divisor));
            out[n].q = saturate16(div_round_half_away(acc_q, divisor));
        }

        if (hist > 0)
            std::copy(work_.end() - static_cast<ptrdiff_t>(hist), work_.end(), history_.begin());
        stats_.samples_processed += input.size();
        return out;
    }

private:
    int16_t saturate16(int64_t v) {
        if (v > 32767) {
            ++stats_.clipped;
            return 32767;
        }
        if (v < -32768) {
            ++stats_.clipped;
            return -32768;
        }
        return static_cast<int16_t>(v);
    }

    EngineParams params_;
    FilterOrder order_;
    TapSet taps_;
    std::vector<IqSample16> history_;  // last N-1 inputs, oldest first
    std::vector<IqSample16> work_;
    ProcessStats stats_;
};

}  // namespace chanem

#endif  // CHANEM_TDL_ENGINE_HPP

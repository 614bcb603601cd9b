// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations. These stay independent of the
// library's arithmetic paths: big-integer convolution straight from the
// output definition, and exhaustive search over shift/coefficient pairs.

#ifndef CHANEM_TESTS_ORACLE_HPP
#define CHANEM_TESTS_ORACLE_HPP

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "chanem/planner.hpp"
#include "chanem/tdl_engine.hpp"

namespace oracle {

using boost::multiprecision::cpp_int;

inline cpp_int round_div_half_away(const cpp_int& num, const cpp_int& den) {
    // den > 0
    if (num >= 0) return (2 * num + den) / (2 * den);
    return -((2 * -num + den) / (2 * den));
}

/// Arbitrary-precision realization of the channel output definition:
/// exact accumulation of coeff * sample over the taps, one rounded
/// division (ties away from zero), saturation to 16 bits. The delay line
/// starts from zeros. `clipped` counts saturated components.
inline std::vector<chanem::IqSample16> convolve(std::span<const chanem::IqSample16> input,
                                                const chanem::TapSet& taps,
                                                const chanem::EngineParams& params,
                                                chanem::FilterOrder order,
                                                uint64_t* clipped = nullptr) {
    const size_t pad = static_cast<size_t>(params.taps_n - 1);
    std::vector<chanem::IqSample16> x(pad);
    x.insert(x.end(), input.begin(), input.end());

    cpp_int den = params.max_coeff();
    if (order == chanem::FilterOrder::combined)
        den <<= taps.shift;

    uint64_t clip_count = 0;
    std::vector<chanem::IqSample16> out(input.size());
    for (size_t n = 0; n < input.size(); ++n) {
        int64_t comp[2] = {0, 0};
        for (int c = 0; c < 2; ++c) {
            cpp_int acc = 0;
            for (const chanem::Tap& t : taps.taps) {
                const chanem::IqSample16& s = x[pad + n - static_cast<size_t>(t.index)];
                cpp_int v = (c == 0) ? s.i : s.q;
                if (order == chanem::FilterOrder::hardware_order && taps.shift > 0) {
                    // arithmetic right shift: floor division by 2^shift
                    const cpp_int two_j = cpp_int(1) << taps.shift;
                    cpp_int q = v / two_j;
                    if (v < 0 && q * two_j != v) q -= 1;
                    v = q;
                }
                acc += cpp_int(t.coeff) * v;
            }
            cpp_int y = round_div_half_away(acc, den);
            if (y > 32767) {
                y = 32767;
                ++clip_count;
            } else if (y < -32768) {
                y = -32768;
                ++clip_count;
            }
            comp[c] = static_cast<int64_t>(y);
        }
        out[n].i = static_cast<int16_t>(comp[0]);
        out[n].q = static_cast<int16_t>(comp[1]);
    }
    if (clipped) *clipped = clip_count;
    return out;
}

struct BestAtten {
    int shift = 0;
    int coeff = 0;
    double achieved_db = 0.0;
    double error_db = 0.0;  // achieved - target
};

/// Scan every legal (shift, coefficient) pair for the attenuation closest
/// to the target.
inline BestAtten exhaustive_best_atten(double target_db, const chanem::EngineParams& params) {
    BestAtten best;
    double best_abs = 1e300;
    const double step = chanem::shift_step_db();
    for (int j = 0; j <= params.shift_bits; ++j) {
        for (int b = 1; b <= params.max_coeff(); ++b) {
            const double achieved =
                j * step - 20.0 * std::log10(static_cast<double>(b) / params.max_coeff());
            const double err = achieved - target_db;
            if (std::fabs(err) < best_abs) {
                best_abs = std::fabs(err);
                best = {j, b, achieved, err};
            }
        }
    }
    return best;
}

// -------------------------------------------------------- generators ----

inline std::vector<chanem::IqSample16> noise_block(size_t count, std::mt19937& rng,
                                                   int amplitude = 32767) {
    std::uniform_int_distribution<int> dist(-amplitude, amplitude);
    std::vector<chanem::IqSample16> out(count);
    for (auto& s : out) {
        s.i = static_cast<int16_t>(dist(rng));
        s.q = static_cast<int16_t>(dist(rng));
    }
    return out;
}

/// Complex exponential at an irrational-ish frequency so rounding noise
/// does not line up with the tone phase.
inline std::vector<chanem::IqSample16> tone_block(size_t count, double amplitude,
                                                  double cycles_per_sample = 0.1234567) {
    std::vector<chanem::IqSample16> out(count);
    for (size_t n = 0; n < count; ++n) {
        const double ph = 2.0 * 3.14159265358979323846 * cycles_per_sample *
                          static_cast<double>(n);
        out[n].i = static_cast<int16_t>(std::llround(amplitude * std::cos(ph)));
        out[n].q = static_cast<int16_t>(std::llround(amplitude * std::sin(ph)));
    }
    return out;
}

inline chanem::TapSet random_tapset(std::mt19937& rng, const chanem::EngineParams& params,
                                    int max_taps = 8) {
    std::uniform_int_distribution<int> shift(0, params.shift_bits);
    std::uniform_int_distribution<int> coeff(0, params.max_coeff());
    std::uniform_int_distribution<int> count(1, std::min(params.taps_n, max_taps));
    std::uniform_int_distribution<int> index(0, params.taps_n - 1);
    chanem::TapSet ts;
    ts.shift = shift(rng);
    std::vector<int> indices;
    const int want = count(rng);
    while (static_cast<int>(indices.size()) < want) {
        const int i = index(rng);
        bool dup = false;
        for (int other : indices) dup = dup || other == i;
        if (!dup) indices.push_back(i);
    }
    std::sort(indices.begin(), indices.end());
    for (int i : indices) ts.taps.push_back(chanem::Tap{i, coeff(rng)});
    return ts;
}

}  // namespace oracle

#endif  // CHANEM_TESTS_ORACLE_HPP

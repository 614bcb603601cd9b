// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams

#ifndef CHANEM_VERIFY_HPP
#define CHANEM_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "chanem/fixed_point.hpp"

namespace chanem {

/// Estimates with a normalized-correlation peak below this are flagged
/// unreliable rather than rejected.
inline constexpr double corr_reliability_threshold = 0.2;

/// Result of a cross-correlation delay measurement.
struct DelayEstimate {
    int64_t lag_samples = 0;  ///< delay of `test` relative to `reference`, in samples
    double delay_s = 0.0;     ///< lag_samples / sample_rate
    double peak_corr = 0.0;   ///< normalized correlation magnitude at the peak, in [0, 1]
    bool reliable = true;
};

/// Delay of `test` relative to `reference` from the peak of the normalized
/// cross-correlation. The correlation at lag l is
///
///   c(l) = sum_n ref[n+l] * conj(test[n])
///          / sqrt(sum_n |ref[n+l]|^2 * sum_n |test[n]|^2)
///
/// with every sum running over the overlapping window only, so partial
/// overlaps are not penalized. Lags whose overlap is shorter than a quarter
/// of the shorter sequence are skipped: a one-sample overlap correlates
/// perfectly no matter the signals, which would make the peak meaningless.
/// The reported delay is the negative of the lag with the highest |c|; ties
/// break toward the smaller |lag|. Integer lags only: emulated delays are
/// whole sample periods by construction.
inline DelayEstimate estimate_delay(std::span<const IqSample16> reference,
                                    std::span<const IqSample16> test,
                                    double sample_rate_hz) {
    if (reference.empty() || test.empty())
        throw std::invalid_argument("estimate_delay: both sequences must be non-empty");
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
        throw std::invalid_argument("estimate_delay: sample rate must be > 0");

    uint64_t ref_energy = 0;
    for (const IqSample16& s : reference)
        ref_energy += static_cast<uint64_t>(static_cast<int64_t>(s.i) * s.i +
                                            static_cast<int64_t>(s.q) * s.q);
    if (ref_energy == 0)
        throw std::invalid_argument("estimate_delay: reference has zero energy");

    const int64_t R = static_cast<int64_t>(reference.size());
    const int64_t T = static_cast<int64_t>(test.size());
    const int64_t min_overlap = std::max<int64_t>(1, std::min(R, T) / 4);

    double best_score = -1.0;  // |c|^2
    int64_t best_lag = 0;
    for (int64_t lag = -(T - 1); lag <= R - 1; ++lag) {
        const int64_t n_lo = std::max<int64_t>(0, -lag);
        const int64_t n_hi = std::min<int64_t>(T, R - lag);  // exclusive
        if (n_hi - n_lo < min_overlap) continue;
        double cross_re = 0.0, cross_im = 0.0, e_ref = 0.0, e_test = 0.0;
        for (int64_t n = n_lo; n < n_hi; ++n) {
            const double ri = reference[static_cast<size_t>(n + lag)].i;
            const double rq = reference[static_cast<size_t>(n + lag)].q;
            const double ti = test[static_cast<size_t>(n)].i;
            const double tq = test[static_cast<size_t>(n)].q;
            cross_re += ri * ti + rq * tq;
            cross_im += rq * ti - ri * tq;
            e_ref += ri * ri + rq * rq;
            e_test += ti * ti + tq * tq;
        }
        if (e_ref == 0.0 || e_test == 0.0) continue;
        const double score = (cross_re * cross_re + cross_im * cross_im) / (e_ref * e_test);
        if (score > best_score ||
            (score == best_score && std::llabs(lag) < std::llabs(best_lag))) {
            best_score = score;
            best_lag = lag;
        }
    }

    DelayEstimate est;
    est.lag_samples = -best_lag;  // peak at a negative lag means `test` arrives late
    est.delay_s = static_cast<double>(est.lag_samples) / sample_rate_hz;
    est.peak_corr = best_score <= 0.0 ? 0.0 : std::min(1.0, std::sqrt(best_score));
    est.reliable = est.peak_corr >= corr_reliability_threshold;
    return est;
}

/// Mean block power referenced to digital full scale: a complex exponential
/// of amplitude 32767 measures 0 dBFS. An all-zero block reports -inf.
inline double measure_power_dbfs(std::span<const IqSample16> block) {
    if (block.empty())
        throw std::invalid_argument("measure_power_dbfs: empty block");
    uint64_t acc = 0;
    for (const IqSample16& s : block)
        acc += static_cast<uint64_t>(static_cast<int64_t>(s.i) * s.i +
                                     static_cast<int64_t>(s.q) * s.q);
    if (acc == 0)
        return -std::numeric_limits<double>::infinity();
    const double mean = static_cast<double>(acc) / static_cast<double>(block.size());
    return 10.0 * std::log10(mean / (32767.0 * 32767.0));
}

/// Power drop from `reference` to `test` in dB (positive = test is weaker).
inline double measure_attenuation_db(std::span<const IqSample16> reference,
                                     std::span<const IqSample16> test) {
    const double p_ref = measure_power_dbfs(reference);
    if (std::isinf(p_ref))
        throw std::invalid_argument("measure_attenuation_db: reference has zero power");
    return p_ref - measure_power_dbfs(test);
}

/// Input power from a receiver RSSI reading: P = rssi - offset. The offset
/// is the front-end gain fixed at design time (73 dB for a cc2538).
inline double rssi_to_power_dbm(double rssi_db, double offset_db = 73.0) {
    return rssi_db - offset_db;
}

struct VerificationReport {
    double requested_delay_s = 0.0;
    double measured_delay_s = 0.0;
    int64_t measured_lag_samples = 0;
    double requested_atten_db = 0.0;
    double measured_atten_db = 0.0;
    double atten_tolerance_db = 0.01;
    double peak_corr = 0.0;
    bool pass = false;
};

/// Identity-channel check: passes iff the measured delay is exactly zero
/// and the measured attenuation is within 0.01 dB.
inline VerificationReport passthrough_check(std::span<const IqSample16> input,
                                            std::span<const IqSample16> output,
                                            double sample_rate_hz = 1.0) {
    if (input.size() != output.size())
        throw std::invalid_argument("passthrough_check: length mismatch");
    VerificationReport rep;
    const DelayEstimate d = estimate_delay(input, output, sample_rate_hz);
    rep.measured_lag_samples = d.lag_samples;
    rep.measured_delay_s = d.delay_s;
    rep.peak_corr = d.peak_corr;
    rep.measured_atten_db = measure_attenuation_db(input, output);
    rep.pass = d.lag_samples == 0 &&
               std::fabs(rep.measured_atten_db) <= rep.atten_tolerance_db;
    return rep;
}

inline void write_report_kv(std::ostream& os, const VerificationReport& rep) {
    os << "requested_delay_s=" << rep.requested_delay_s << '\n'
       << "measured_delay_s=" << rep.measured_delay_s << '\n'
       << "measured_lag_samples=" << rep.measured_lag_samples << '\n'
       << "requested_atten_db=" << rep.requested_atten_db << '\n'
       << "measured_atten_db=" << rep.measured_atten_db << '\n'
       << "peak_corr=" << rep.peak_corr << '\n'
       << "pass=" << (rep.pass ? 1 : 0) << '\n';
}

inline void write_report_csv(std::ostream& os, const VerificationReport& rep) {
    os << "requested_delay_s,measured_delay_s,measured_lag_samples,requested_atten_db,"
          "measured_atten_db,peak_corr,pass\n"
       << rep.requested_delay_s << ',' << rep.measured_delay_s << ','
       << rep.measured_lag_samples << ',' << rep.requested_atten_db << ','
       << rep.measured_atten_db << ',' << rep.peak_corr << ',' << (rep.pass ? 1 : 0) << '\n';
}

}  // namespace chanem

#endif  // CHANEM_VERIFY_HPP

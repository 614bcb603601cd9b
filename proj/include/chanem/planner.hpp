// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams

#ifndef CHANEM_PLANNER_HPP
#define CHANEM_PLANNER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanem/tdl_engine.hpp"

namespace chanem {

inline constexpr double speed_of_light_mps = 299792458.0;

/// dB gained (or lost) per coarse shift stage: 20*log10(2) ~ 6.0206 dB.
inline double shift_step_db() { return 20.0 * std::log10(2.0); }

class DelayOutOfRange : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AttenOutOfRange : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PathCollision : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A physical channel request: propagation delay and attenuation.
struct PathSpec {
    double delay_ns = 0.0;
    double atten_db = 0.0;
};

/// Quantized realization of a PathSpec, with achieved-value errors.
struct PlannedPath {
    int tap_index = 0;
    int coeff = 0;
    int shift_needed = 0;
    double achieved_delay_ns = 0.0;
    double achieved_atten_db = 0.0;
    double delay_error_ns = 0.0;  ///< achieved - requested
    double atten_error_db = 0.0;  ///< achieved - requested
};

/// Gain of a single tap relative to full scale: 20*log10(b / (2^r - 1)).
/// Always <= 0; a disabled tap (b = 0) has no finite gain.
inline double tap_gain_db(int coeff, int coeff_bits) {
    const int max = (1 << coeff_bits) - 1;
    if (coeff < 1 || coeff > max)
        throw std::invalid_argument("tap_gain_db: coefficient " + std::to_string(coeff) +
                                    " outside [1, " + std::to_string(max) + "]");
    return 20.0 * std::log10(static_cast<double>(coeff) / static_cast<double>(max));
}

/// Gap to the next realizable gain at coefficient b: 20*log10((b+1)/b).
inline double atten_resolution_db(int coeff) {
    if (coeff < 1)
        throw std::invalid_argument("atten_resolution_db: coefficient must be >= 1");
    return 20.0 * std::log10((static_cast<double>(coeff) + 1.0) / static_cast<double>(coeff));
}

/// Dynamic range left when the resolution may not exceed max_res_db,
/// using coefficients alone: r*20*log10(2) + 20*log10(10^(max_res/20) - 1).
inline double reduced_dynamic_range_db(int coeff_bits, double max_res_db) {
    if (!(max_res_db > 0.0))
        throw std::invalid_argument("reduced_dynamic_range_db: max_res_db must be > 0");
    return coeff_bits * shift_step_db() +
           20.0 * std::log10(std::pow(10.0, max_res_db / 20.0) - 1.0);
}

/// Same bound with s coarse shift stages added: (r+s)*20*log10(2) + ...
inline double extended_dynamic_range_db(int coeff_bits, int shift_bits, double max_res_db) {
    if (shift_bits < 0)
        throw std::invalid_argument("extended_dynamic_range_db: shift_bits must be >= 0");
    if (!(max_res_db > 0.0))
        throw std::invalid_argument("extended_dynamic_range_db: max_res_db must be > 0");
    return (coeff_bits + shift_bits) * shift_step_db() +
           20.0 * std::log10(std::pow(10.0, max_res_db / 20.0) - 1.0);
}

/// Worst-case attenuation resolution when the coarse shift keeps the
/// coefficient in its top octave: 20*log10(10^(3/10) / 2^r + 1).
/// For r = 15 this evaluates to 0.000529 dB.
inline double worst_case_resolution_db(int coeff_bits) {
    if (coeff_bits < 1)
        throw std::invalid_argument("worst_case_resolution_db: coeff_bits must be >= 1");
    return 20.0 * std::log10(std::pow(10.0, 0.3) / std::pow(2.0, coeff_bits) + 1.0);
}

/// Deepest attenuation the planner accepts: every shift stage fully used
/// and the coefficient at its minimum useful span, (r+s)*20*log10(2).
inline double max_attenuation_db(const EngineParams& params) {
    return (params.coeff_bits + params.shift_bits) * shift_step_db();
}

/// Free-space path loss at distance d and carrier fc: 20*log10(4*pi*d*fc/c).
inline double fspl_db(double distance_m, double carrier_hz) {
    if (!(distance_m > 0.0) || !std::isfinite(distance_m))
        throw std::invalid_argument("fspl_db: distance must be positive and finite");
    if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz))
        throw std::invalid_argument("fspl_db: carrier must be positive and finite");
    constexpr double pi = 3.14159265358979323846;
    return 20.0 * std::log10(4.0 * pi * distance_m * carrier_hz / speed_of_light_mps);
}

namespace detail {

/// Nearest tap index for a requested delay, ties toward the lower index.
inline int plan_tap_index(double delay_ns, const EngineParams& params) {
    const double steps = delay_ns * params.clock_hz / 1e9;
    return static_cast<int>(std::ceil(steps - 0.5));
}

/// Best coefficient for the attenuation left after j shift stages.
inline int plan_coeff(double residual_db, const EngineParams& params) {
    const double exact =
        params.max_coeff() * std::pow(10.0, -residual_db / 20.0);
    const long long b = std::llround(exact);
    if (b > params.max_coeff())
        return params.max_coeff();
    return static_cast<int>(b);  // may be 0: caller decides whether that is fatal
}

inline void check_path_in_range(const PathSpec& spec, const EngineParams& params) {
    if (!std::isfinite(spec.delay_ns) || !std::isfinite(spec.atten_db))
        throw std::invalid_argument("plan_path: delay and attenuation must be finite");
    if (spec.delay_ns < 0.0)
        throw std::invalid_argument("plan_path: delay must be >= 0");
    if (spec.atten_db < 0.0)
        throw std::invalid_argument("plan_path: attenuation must be >= 0 (attenuation only)");
    const double max_delay_ns = params.max_delay_s() * 1e9;
    if (spec.delay_ns > max_delay_ns)
        throw DelayOutOfRange("requested delay " + std::to_string(spec.delay_ns) +
                              " ns exceeds maximum " + std::to_string(max_delay_ns) + " ns");
    const double max_atten = max_attenuation_db(params);
    if (spec.atten_db > max_atten)
        throw AttenOutOfRange("requested attenuation " + std::to_string(spec.atten_db) +
                              " dB exceeds maximum " + std::to_string(max_atten) + " dB");
}

inline PlannedPath realize_path(const PathSpec& spec, int shift, const EngineParams& params) {
    PlannedPath p;
    p.tap_index = plan_tap_index(spec.delay_ns, params);
    p.shift_needed = shift;
    const double residual = spec.atten_db - shift * shift_step_db();
    p.coeff = plan_coeff(residual, params);
    if (p.coeff < 1)
        throw AttenOutOfRange("attenuation " + std::to_string(spec.atten_db) +
                              " dB not realizable with shift " + std::to_string(shift));
    p.achieved_delay_ns = p.tap_index * params.delay_step_s() * 1e9;
    p.achieved_atten_db = shift * shift_step_db() - tap_gain_db(p.coeff, params.coeff_bits);
    p.delay_error_ns = p.achieved_delay_ns - spec.delay_ns;
    p.atten_error_db = p.achieved_atten_db - spec.atten_db;
    return p;
}

}  // namespace detail

/// Quantize one path: nearest tap (ties toward the shorter delay), the
/// largest shift not exceeding the requested attenuation, and the nearest
/// coefficient for the residual. While the shift stages are not exhausted
/// the attenuation error stays within worst_case_resolution_db(r).
inline PlannedPath plan_path(const PathSpec& spec, const EngineParams& params) {
    params.validate();
    detail::check_path_in_range(spec, params);
    const int shift = std::min(params.shift_bits,
                               static_cast<int>(std::floor(spec.atten_db / shift_step_db())));
    return detail::realize_path(spec, shift, params);
}

struct MultipathPlan {
    TapSet taps;
    std::vector<PlannedPath> paths;  ///< input order
    bool clip_warning = false;       ///< sum of coefficients exceeds full scale
};

/// Plan up to three concurrent paths. The shift stage is global, so the
/// smallest per-path shift is shared and every residual is re-planned
/// against it; a path that then needs more range than coefficients provide
/// raises AttenOutOfRange. Two paths quantizing to one tap index collide.
inline MultipathPlan plan_multipath(std::span<const PathSpec> specs, const EngineParams& params) {
    params.validate();
    if (specs.empty() || specs.size() > 3)
        throw std::invalid_argument("plan_multipath: 1 to 3 paths supported");

    int shared_shift = params.shift_bits;
    for (const PathSpec& s : specs) {
        detail::check_path_in_range(s, params);
        const int j = std::min(params.shift_bits,
                               static_cast<int>(std::floor(s.atten_db / shift_step_db())));
        shared_shift = std::min(shared_shift, j);
    }

    MultipathPlan plan;
    plan.taps.shift = shared_shift;
    int64_t coeff_sum = 0;
    for (size_t k = 0; k < specs.size(); ++k) {
        PlannedPath p;
        try {
            p = detail::realize_path(specs[k], shared_shift, params);
        } catch (const AttenOutOfRange& e) {
            throw AttenOutOfRange("path " + std::to_string(k + 1) + ": " + e.what() +
                                  " (shift shared across paths)");
        }
        for (const PlannedPath& other : plan.paths)
            if (other.tap_index == p.tap_index)
                throw PathCollision("paths quantize to the same tap index " +
                                    std::to_string(p.tap_index) +
                                    "; minimum spread is one delay step");
        coeff_sum += p.coeff;
        plan.paths.push_back(p);
    }
    plan.clip_warning = coeff_sum > params.max_coeff();

    for (const PlannedPath& p : plan.paths)
        plan.taps.taps.push_back(Tap{p.tap_index, p.coeff});
    std::sort(plan.taps.taps.begin(), plan.taps.taps.end(),
              [](const Tap& a, const Tap& b) { return a.index < b.index; });
    validate_taps(plan.taps, params);
    return plan;
}

/// The derived capability sheet for a given geometry and update rate.
struct SpecSheet {
    double delay_resolution_s = 0.0;
    double max_delay_s = 0.0;
    double distance_step_m = 0.0;
    double max_distance_m = 0.0;
    double worst_case_resolution_db = 0.0;
    double max_attenuation_db = 0.0;
    double max_velocity_mps = 0.0;
};

inline SpecSheet derive_specs(const EngineParams& params, double update_rate_hz) {
    params.validate();
    if (!(update_rate_hz >= 0.0) || !std::isfinite(update_rate_hz))
        throw std::invalid_argument("derive_specs: update rate must be >= 0");
    SpecSheet s;
    s.delay_resolution_s = params.delay_step_s();
    s.max_delay_s = params.max_delay_s();
    s.distance_step_m = speed_of_light_mps / params.clock_hz;
    s.max_distance_m = speed_of_light_mps * (params.taps_n - 1) / params.clock_hz;
    s.worst_case_resolution_db = worst_case_resolution_db(params.coeff_bits);
    s.max_attenuation_db = max_attenuation_db(params);
    s.max_velocity_mps = speed_of_light_mps * update_rate_hz / params.clock_hz;
    return s;
}

/// One row of the resolution-vs-attenuation table.
struct ResolutionPoint {
    double atten_db = 0.0;
    double res_with_shift_db = 0.0;     ///< coarse shift keeps b in its top octave
    double res_without_shift_db = 0.0;  ///< coefficient-only realization
};

/// Resolution achievable at each grid attenuation, with and without the
/// coarse shift stage. The with-shift column assumes enough shift stages
/// for the grid value (the dynamic-range limit is a separate figure), so
/// it stays bounded by worst_case_resolution_db; the without-shift column
/// degrades toward 20*log10(2) as the coefficient approaches 1.
inline std::vector<ResolutionPoint> resolution_curve(const EngineParams& params,
                                                     std::span<const double> atten_grid_db) {
    params.validate();
    const double max_atten = max_attenuation_db(params);
    std::vector<ResolutionPoint> out;
    out.reserve(atten_grid_db.size());
    for (double g : atten_grid_db) {
        if (!std::isfinite(g) || g < 0.0 || g > max_atten)
            throw std::invalid_argument("resolution_curve: grid value " + std::to_string(g) +
                                        " outside [0, " + std::to_string(max_atten) + "]");
        const int j = static_cast<int>(std::floor(g / shift_step_db()));
        const int b_shift = std::max(1, detail::plan_coeff(g - j * shift_step_db(), params));
        const int b_plain = std::max(1, detail::plan_coeff(g, params));
        out.push_back({g, atten_resolution_db(b_shift), atten_resolution_db(b_plain)});
    }
    return out;
}

/// CSV form: header then one row per grid point, '.' decimal separator.
inline void write_resolution_curve_csv(std::ostream& os,
                                       std::span<const ResolutionPoint> points) {
    os << "atten_db,res_with_shift_db,res_without_shift_db\n";
    char line[128];
    for (const ResolutionPoint& p : points) {
        std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g\n", p.atten_db,
                      p.res_with_shift_db, p.res_without_shift_db);
        os << line;
    }
}

}  // namespace chanem

#endif  // CHANEM_PLANNER_HPP

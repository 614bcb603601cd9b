// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams

#ifndef CHANEM_SCENARIO_HPP
#define CHANEM_SCENARIO_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chanem/planner.hpp"

namespace chanem {

/// Maximum speed an update rate u can emulate at delay resolution c/f.
inline double max_velocity_mps(double update_rate_hz, double clock_hz) {
    if (!(update_rate_hz >= 0.0) || !std::isfinite(update_rate_hz))
        throw std::invalid_argument("max_velocity_mps: update rate must be >= 0");
    if (!(clock_hz > 0.0) || !std::isfinite(clock_hz))
        throw std::invalid_argument("max_velocity_mps: clock must be > 0");
    return speed_of_light_mps * update_rate_hz / clock_hz;
}

struct ScenarioRow {
    double t_ms = 0.0;
    std::vector<PathSpec> paths;  // 1..3
};

/// A timed sequence of channel states in physical units.
struct Scenario {
    double update_rate_hz = 0.0;  ///< u, informational; bounds emulated velocity
    std::vector<ScenarioRow> rows;
};

/// One compiled channel state, pinned to an input-sample boundary.
struct ScheduleEntry {
    uint64_t sample_index = 0;
    double t_ms = 0.0;  ///< source row time; 0 when parsed from a compiled CSV
    TapSet taps;
    bool clip_warning = false;
};

/// A scenario compiled against a fixed geometry and sample rate. Entirely
/// sample-indexed: replaying the same input stream yields identical output
/// regardless of wall clock.
struct Schedule {
    std::vector<ScheduleEntry> entries;
    EngineParams params;
    double sample_rate_hz = 0.0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            cells.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return cells;
}

inline double parse_number(std::string_view cell, int row, const char* what) {
    const std::string text(cell);
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || text.empty() || !std::isfinite(v))
        throw std::invalid_argument("row " + std::to_string(row) + ": malformed " + what +
                                    " '" + text + "'");
    return v;
}

}  // namespace detail

/// Parse a scenario CSV. Schema: header
///   t_ms,delay_ns_1,atten_db_1,delay_ns_2,atten_db_2,delay_ns_3,atten_db_3
/// then one row per channel state. Trailing path columns may be omitted and
/// an empty delay/atten pair disables that path. Times must start at 0 and
/// increase strictly. Comma separator, '.' decimal point, LF or CRLF.
inline Scenario parse_scenario(std::string_view text, double update_rate_hz = 0.0) {
    Scenario sc;
    sc.update_rate_hz = update_rate_hz;

    std::vector<std::string_view> lines;
    size_t start = 0;
    for (size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            lines.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }

    bool header_seen = false;
    int row_no = 0;
    for (std::string_view raw : lines) {
        const std::string_view line = detail::trim(raw);
        if (line.empty()) continue;
        if (!header_seen) {
            if (!line.starts_with("t_ms"))
                throw std::invalid_argument("scenario: missing header line starting with 't_ms'");
            header_seen = true;
            continue;
        }
        ++row_no;
        const auto cells = detail::split_csv(line);
        if (cells.size() < 3)
            throw std::invalid_argument("scenario row " + std::to_string(row_no) +
                                        ": expected at least t_ms and one delay/atten pair");
        if (cells.size() > 7)
            throw std::invalid_argument("scenario row " + std::to_string(row_no) +
                                        ": more than 3 paths");
        if (cells.size() % 2 == 0)
            throw std::invalid_argument("scenario row " + std::to_string(row_no) +
                                        ": dangling delay column without attenuation");

        ScenarioRow row;
        row.t_ms = detail::parse_number(cells[0], row_no, "time");
        for (size_t c = 1; c + 1 < cells.size(); c += 2) {
            const bool have_delay = !cells[c].empty();
            const bool have_atten = !cells[c + 1].empty();
            if (have_delay != have_atten)
                throw std::invalid_argument("scenario row " + std::to_string(row_no) +
                                            ": half-empty path pair");
            if (!have_delay) continue;  // disabled path
            PathSpec p;
            p.delay_ns = detail::parse_number(cells[c], row_no, "delay");
            p.atten_db = detail::parse_number(cells[c + 1], row_no, "attenuation");
            row.paths.push_back(p);
        }
        if (row.paths.empty())
            throw std::invalid_argument("scenario row " + std::to_string(row_no) +
                                        ": no enabled path");

        if (sc.rows.empty()) {
            if (row.t_ms != 0.0)
                throw std::invalid_argument("scenario row 1: first row must be at t=0");
        } else if (!(row.t_ms > sc.rows.back().t_ms)) {
            throw std::invalid_argument("scenario row " + std::to_string(row_no) +
                                        ": time not strictly increasing");
        }
        sc.rows.push_back(std::move(row));
    }
    if (!header_seen)
        throw std::invalid_argument("scenario: empty input");
    if (sc.rows.empty())
        throw std::invalid_argument("scenario: no data rows");
    return sc;
}

/// Compile a scenario into sample-indexed tap updates. Each row is planned
/// with plan_multipath; its update lands at round(t_ms * Fs / 1000), taking
/// effect at exactly that input-sample boundary.
inline Schedule compile_schedule(const Scenario& sc, const EngineParams& params,
                                 double sample_rate_hz) {
    params.validate();
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
        throw std::invalid_argument("compile_schedule: sample rate must be > 0");
    Schedule sched;
    sched.params = params;
    sched.sample_rate_hz = sample_rate_hz;
    int row_no = 0;
    for (const ScenarioRow& row : sc.rows) {
        ++row_no;
        MultipathPlan plan;
        try {
            plan = plan_multipath(row.paths, params);
        } catch (const std::exception& e) {
            throw std::invalid_argument("scenario row " + std::to_string(row_no) + ": " +
                                        e.what());
        }
        ScheduleEntry entry;
        entry.sample_index =
            static_cast<uint64_t>(std::llround(row.t_ms * sample_rate_hz / 1000.0));
        entry.t_ms = row.t_ms;
        entry.taps = std::move(plan.taps);
        entry.clip_warning = plan.clip_warning;
        if (!sched.entries.empty() && entry.sample_index <= sched.entries.back().sample_index)
            throw std::invalid_argument("scenario row " + std::to_string(row_no) +
                                        ": maps to sample index " +
                                        std::to_string(entry.sample_index) +
                                        " already used by the previous row");
        sched.entries.push_back(std::move(entry));
    }
    return sched;
}

/// Inspection export: `sample_index,shift_j,tap_index:coeff;...` per entry.
inline std::string format_schedule_csv(const Schedule& sched) {
    std::ostringstream os;
    os << "sample_index,shift_j,taps\n";
    for (const ScheduleEntry& e : sched.entries) {
        os << e.sample_index << ',' << e.taps.shift << ',';
        for (size_t k = 0; k < e.taps.taps.size(); ++k) {
            if (k) os << ';';
            os << e.taps.taps[k].index << ':' << e.taps.taps[k].coeff;
        }
        os << '\n';
    }
    return os.str();
}

/// Parse the compiled form back. Accepts the export above with or without
/// its header line; validates tap sets against the given geometry.
inline std::vector<ScheduleEntry> parse_schedule_csv(std::string_view text,
                                                     const EngineParams& params) {
    params.validate();
    std::vector<ScheduleEntry> entries;
    size_t start = 0;
    int row_no = 0;
    for (size_t i = 0; i <= text.size(); ++i) {
        if (i != text.size() && text[i] != '\n') continue;
        const std::string_view line = detail::trim(text.substr(start, i - start));
        start = i + 1;
        if (line.empty()) continue;
        if (line.starts_with("sample_index")) continue;  // header
        ++row_no;
        const auto cells = detail::split_csv(line);
        if (cells.size() != 3)
            throw std::invalid_argument("schedule row " + std::to_string(row_no) +
                                        ": expected sample_index,shift_j,taps");
        ScheduleEntry e;
        e.sample_index = static_cast<uint64_t>(
            detail::parse_number(cells[0], row_no, "sample index"));
        e.taps.shift = static_cast<int>(detail::parse_number(cells[1], row_no, "shift"));
        size_t tap_start = 0;
        const std::string_view taps_field = cells[2];
        for (size_t k = 0; k <= taps_field.size(); ++k) {
            if (k != taps_field.size() && taps_field[k] != ';') continue;
            const std::string_view pair = taps_field.substr(tap_start, k - tap_start);
            tap_start = k + 1;
            if (pair.empty()) continue;
            const size_t colon = pair.find(':');
            if (colon == std::string_view::npos)
                throw std::invalid_argument("schedule row " + std::to_string(row_no) +
                                            ": tap entry '" + std::string(pair) +
                                            "' is not index:coeff");
            Tap t;
            t.index = static_cast<int>(
                detail::parse_number(pair.substr(0, colon), row_no, "tap index"));
            t.coeff = static_cast<int>(
                detail::parse_number(pair.substr(colon + 1), row_no, "coefficient"));
            e.taps.taps.push_back(t);
        }
        try {
            validate_taps(e.taps, params);
        } catch (const std::exception& ex) {
            throw std::invalid_argument("schedule row " + std::to_string(row_no) + ": " +
                                        ex.what());
        }
        if (entries.empty()) {
            if (e.sample_index != 0)
                throw std::invalid_argument("schedule: first entry must be at sample index 0");
        } else if (e.sample_index <= entries.back().sample_index) {
            throw std::invalid_argument("schedule row " + std::to_string(row_no) +
                                        ": sample index not strictly increasing");
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty())
        throw std::invalid_argument("schedule: no entries");
    return entries;
}

/// Streams a sample sequence through an engine while applying schedule
/// entries at their exact sample boundaries: sample n < boundary sees the
/// old taps, sample n >= boundary the new ones, for any block chunking.
class ScheduleRunner {
public:
    ScheduleRunner(TdlEngine& engine, std::span<const ScheduleEntry> entries)
        : engine_(engine), entries_(entries.begin(), entries.end()) {}

    uint64_t position() const { return position_; }
    uint64_t updates_applied() const { return updates_applied_; }

    std::vector<IqSample16> process_block(std::span<const IqSample16> input) {
        std::vector<IqSample16> out;
        out.reserve(input.size());
        size_t done = 0;
        while (done < input.size()) {
            while (next_ < entries_.size() && entries_[next_].sample_index == position_) {
                engine_.set_taps(entries_[next_].taps);
                ++next_;
                ++updates_applied_;
            }
            size_t run = input.size() - done;
            if (next_ < entries_.size()) {
                const uint64_t until = entries_[next_].sample_index - position_;
                run = std::min<uint64_t>(run, until);
            }
            const auto piece = engine_.process_block(input.subspan(done, run));
            out.insert(out.end(), piece.begin(), piece.end());
            done += run;
            position_ += run;
        }
        return out;
    }

private:
    TdlEngine& engine_;
    std::vector<ScheduleEntry> entries_;
    size_t next_ = 0;
    uint64_t position_ = 0;
    uint64_t updates_applied_ = 0;
};

}  // namespace chanem

#endif  // CHANEM_SCENARIO_HPP

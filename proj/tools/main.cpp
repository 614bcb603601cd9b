// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams
//
// Command-line front end. One binary, flags only, so every invocation is
// copy-paste reproducible. Exit codes: 0 success, 1 domain error (plan out
// of range, bad scenario, I/O failure), 2 usage error.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chanem/chanem.hpp"

namespace {

using namespace chanem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void print_kv(const char* key, double v) { std::printf("%s=%.10g\n", key, v); }
void print_kv(const char* key, int64_t v) { std::printf("%s=%" PRId64 "\n", key, v); }
void print_kv(const char* key, uint64_t v) { std::printf("%s=%" PRIu64 "\n", key, v); }

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("I/O error writing '" + path + "'");
}

void attach_engine_flags(CLI::App* cmd, EngineParams& p) {
    cmd->add_option("--clock-hz", p.clock_hz, "delay-line clock f in Hz")
        ->capture_default_str();
    cmd->add_option("--taps", p.taps_n, "delay-line length N")->capture_default_str();
    cmd->add_option("--coeff-bits", p.coeff_bits, "coefficient width r")
        ->capture_default_str();
    cmd->add_option("--shift-bits", p.shift_bits, "coarse shift stages s")
        ->capture_default_str();
}

// ---------------------------------------------------------------- spec ----

int cmd_spec(const EngineParams& params, double update_rate_hz,
             const std::string& curve_path) {
    const SpecSheet sheet = derive_specs(params, update_rate_hz);
    print_kv("clock_hz", params.clock_hz);
    print_kv("taps", static_cast<int64_t>(params.taps_n));
    print_kv("coeff_bits", static_cast<int64_t>(params.coeff_bits));
    print_kv("shift_bits", static_cast<int64_t>(params.shift_bits));
    print_kv("update_rate_hz", update_rate_hz);
    print_kv("delay_resolution_ns", 1e9 / params.clock_hz);
    print_kv("max_delay_ns", (params.taps_n - 1) * 1e9 / params.clock_hz);
    print_kv("distance_step_m", sheet.distance_step_m);
    print_kv("max_distance_m", sheet.max_distance_m);
    print_kv("attenuation_resolution_db", sheet.worst_case_resolution_db);
    print_kv("max_attenuation_db", sheet.max_attenuation_db);
    print_kv("max_velocity_mps", sheet.max_velocity_mps);
    if (params.coeff_bits == 15 && params.shift_bits == 8)
        std::printf(
            "note: the often-quoted ~144 dB maximum attenuation for this geometry "
            "disagrees with the dynamic-range formula; the formula value %.2f dB is "
            "reported above\n",
            sheet.max_attenuation_db);

    if (!curve_path.empty()) {
        std::vector<double> grid;
        const double max_atten = max_attenuation_db(params);
        for (int k = 0; k * 0.1 <= max_atten; ++k) grid.push_back(k * 0.1);
        const auto points = resolution_curve(params, grid);
        std::ofstream out(curve_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + curve_path + "' for writing");
        write_resolution_curve_csv(out, points);
        if (!out) throw std::runtime_error("I/O error writing '" + curve_path + "'");
        std::printf("resolution_curve=%s\n", curve_path.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------- plan ----

PathSpec parse_path_arg(const std::string& text) {
    const size_t comma = text.find(',');
    if (comma == std::string::npos)
        throw UsageError("--path expects DELAY_NS,ATTEN_DB, got '" + text + "'");
    try {
        return PathSpec{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw UsageError("--path expects two numbers, got '" + text + "'");
    }
}

void print_planned(const PlannedPath& p, const std::string& prefix = "") {
    print_kv((prefix + "tap_index").c_str(), static_cast<int64_t>(p.tap_index));
    print_kv((prefix + "coeff").c_str(), static_cast<int64_t>(p.coeff));
    print_kv((prefix + "shift").c_str(), static_cast<int64_t>(p.shift_needed));
    print_kv((prefix + "achieved_delay_ns").c_str(), p.achieved_delay_ns);
    print_kv((prefix + "delay_error_ns").c_str(), p.delay_error_ns);
    print_kv((prefix + "achieved_atten_db").c_str(), p.achieved_atten_db);
    print_kv((prefix + "atten_error_db").c_str(), p.atten_error_db);
}

int cmd_plan(const EngineParams& params, const std::vector<PathSpec>& paths) {
    if (paths.size() == 1) {
        print_planned(plan_path(paths[0], params));
        return 0;
    }
    const MultipathPlan plan = plan_multipath(paths, params);
    print_kv("shift", static_cast<int64_t>(plan.taps.shift));
    std::printf("taps=");
    for (size_t k = 0; k < plan.taps.taps.size(); ++k)
        std::printf("%s%d:%d", k ? ";" : "", plan.taps.taps[k].index, plan.taps.taps[k].coeff);
    std::printf("\n");
    print_kv("clip_warning", static_cast<int64_t>(plan.clip_warning ? 1 : 0));
    for (size_t k = 0; k < plan.paths.size(); ++k)
        print_planned(plan.paths[k], "path" + std::to_string(k + 1) + "_");
    return 0;
}

// ----------------------------------------------------------------- run ----

struct RunConfig {
    EngineParams params;
    std::string in_path, out_path;
    std::string format_name = "sc16";
    double sample_rate_hz = 0.0;
    std::string scenario_path, schedule_path, emit_schedule_path;
    std::string mode_name = "combined";
    std::string udp_in, udp_out;
    bool wall_clock = false;
    int idle_timeout_ms = 0;
};

std::vector<ScheduleEntry> load_entries(const RunConfig& cfg, bool* any_clip_warning) {
    std::vector<ScheduleEntry> entries;
    if (!cfg.scenario_path.empty()) {
        if (!(cfg.sample_rate_hz > 0.0))
            throw UsageError("--scenario requires --rate");
        const Scenario sc = parse_scenario(read_text_file(cfg.scenario_path));
        Schedule sched = compile_schedule(sc, cfg.params, cfg.sample_rate_hz);
        if (!cfg.emit_schedule_path.empty())
            write_text_file(cfg.emit_schedule_path, format_schedule_csv(sched));
        for (const ScheduleEntry& e : sched.entries)
            if (e.clip_warning && any_clip_warning) *any_clip_warning = true;
        entries = std::move(sched.entries);
    } else if (!cfg.schedule_path.empty()) {
        entries = parse_schedule_csv(read_text_file(cfg.schedule_path), cfg.params);
        if (!cfg.emit_schedule_path.empty()) {
            Schedule sched;
            sched.entries = entries;
            sched.params = cfg.params;
            sched.sample_rate_hz = cfg.sample_rate_hz;
            write_text_file(cfg.emit_schedule_path, format_schedule_csv(sched));
        }
    }
    return entries;
}

int cmd_run(const RunConfig& cfg) {
    const bool file_mode = !cfg.in_path.empty() || !cfg.out_path.empty();
    const bool udp_mode = !cfg.udp_in.empty() || !cfg.udp_out.empty();
    if (file_mode == udp_mode)
        throw UsageError("run needs either --in/--out or --udp-in/--udp-out");
    if (file_mode && (cfg.in_path.empty() || cfg.out_path.empty()))
        throw UsageError("file mode needs both --in and --out");
    if (udp_mode && (cfg.udp_in.empty() || cfg.udp_out.empty()))
        throw UsageError("bridge mode needs both --udp-in and --udp-out");
    if (!cfg.scenario_path.empty() && !cfg.schedule_path.empty())
        throw UsageError("--scenario and --schedule are mutually exclusive");
    if (cfg.wall_clock && (!udp_mode || cfg.scenario_path.empty()))
        throw UsageError("--wallclock needs bridge mode with --scenario");

    const FilterOrder order = [&] {
        if (cfg.mode_name == "combined") return FilterOrder::combined;
        if (cfg.mode_name == "hardware-order") return FilterOrder::hardware_order;
        throw UsageError("--mode must be combined or hardware-order");
    }();

    bool clip_warning = false;
    const std::vector<ScheduleEntry> entries = load_entries(cfg, &clip_warning);
    TdlEngine engine(cfg.params, order);
    if (clip_warning)
        std::fprintf(stderr,
                     "warning: coefficient sum exceeds full scale in at least one "
                     "schedule entry; output may clip\n");

    if (udp_mode) {
        BridgeOptions opt;
        opt.listen = parse_endpoint(cfg.udp_in);
        opt.destination = parse_endpoint(cfg.udp_out);
        opt.idle_timeout_ms = cfg.idle_timeout_ms;
        opt.wall_clock = cfg.wall_clock;
        Schedule sched;
        sched.entries = entries;
        sched.params = cfg.params;
        sched.sample_rate_hz = cfg.sample_rate_hz;
        const BridgeStats st = run_udp_bridge(engine, &sched, opt);
        print_kv("frames_in", st.frames_in);
        print_kv("frames_out", st.frames_out);
        print_kv("samples", st.samples);
        print_kv("lost_frames", st.lost_frames);
        print_kv("decode_errors", st.decode_errors);
        print_kv("clipped", engine.stats().clipped);
        print_kv("ended_by_sentinel", static_cast<int64_t>(st.ended_by_sentinel ? 1 : 0));
        return 0;
    }

    const IqFormat fmt = parse_iq_format(cfg.format_name);
    IqFileReader reader(cfg.in_path, fmt);
    IqFileWriter writer(cfg.out_path, fmt);
    ScheduleRunner runner(engine, entries);
    constexpr size_t chunk = 65536;
    for (;;) {
        const auto block = reader.read(chunk);
        if (block.empty()) break;
        writer.write(runner.process_block(block));
    }
    print_kv("samples", writer.samples_written());
    print_kv("clipped", engine.stats().clipped);
    print_kv("updates_applied", runner.updates_applied());
    return 0;
}

// -------------------------------------------------------------- verify ----

int cmd_verify_delay(const std::string& ref_path, const std::string& test_path,
                     double sample_rate_hz, const std::string& format_name) {
    const IqFormat fmt = parse_iq_format(format_name);
    const auto ref = read_iq(ref_path, fmt);
    const auto test = read_iq(test_path, fmt);
    const DelayEstimate est = estimate_delay(ref, test, sample_rate_hz);
    print_kv("lag_samples", est.lag_samples);
    print_kv("delay_s", est.delay_s);
    print_kv("delay_ns", est.delay_s * 1e9);
    print_kv("peak_corr", est.peak_corr);
    print_kv("reliable", static_cast<int64_t>(est.reliable ? 1 : 0));
    return 0;
}

int cmd_verify_atten(const std::string& ref_path, const std::string& test_path,
                     const std::string& format_name) {
    const IqFormat fmt = parse_iq_format(format_name);
    const auto ref = read_iq(ref_path, fmt);
    const auto test = read_iq(test_path, fmt);
    print_kv("ref_power_dbfs", measure_power_dbfs(ref));
    print_kv("test_power_dbfs", measure_power_dbfs(test));
    print_kv("measured_atten_db", measure_attenuation_db(ref, test));
    return 0;
}

// ----------------------------------------------------------- selfcheck ----

// Reference channel written straight from the output definition, kept
// separate from TdlEngine so the two can disagree.
std::vector<IqSample16> reference_channel(std::span<const IqSample16> input, const TapSet& ts,
                                          const EngineParams& params, FilterOrder order) {
    std::vector<IqSample16> padded(static_cast<size_t>(params.taps_n - 1));
    padded.insert(padded.end(), input.begin(), input.end());
    std::vector<IqSample16> out(input.size());
    const size_t base = static_cast<size_t>(params.taps_n - 1);
    for (size_t n = 0; n < input.size(); ++n) {
        for (int comp = 0; comp < 2; ++comp) {
            __int128 acc = 0;
            for (const Tap& t : ts.taps) {
                const IqSample16& x = padded[base + n - static_cast<size_t>(t.index)];
                int64_t v = comp == 0 ? x.i : x.q;
                if (order == FilterOrder::hardware_order) v >>= ts.shift;
                acc += static_cast<__int128>(t.coeff) * v;
            }
            __int128 den = params.max_coeff();
            if (order == FilterOrder::combined) den <<= ts.shift;
            __int128 y;
            if (acc >= 0)
                y = (2 * acc + den) / (2 * den);
            else
                y = -((2 * -acc + den) / (2 * den));
            if (y > 32767) y = 32767;
            if (y < -32768) y = -32768;
            if (comp == 0)
                out[n].i = static_cast<int16_t>(y);
            else
                out[n].q = static_cast<int16_t>(y);
        }
    }
    return out;
}

int cmd_selfcheck(const EngineParams& params) {
    std::mt19937 rng(0x5eed);
    bool all_ok = true;
    const auto report = [&](const char* name, bool ok, const std::string& detail = "") {
        if (ok)
            std::printf("ok   %s\n", name);
        else
            std::printf("FAIL %s%s%s\n", name, detail.empty() ? "" : ": ", detail.c_str());
        all_ok = all_ok && ok;
    };

    {  // quantizer: round trip within half a step, idempotent on codes
        const QuantizerConfig cfg{1.0, 16, 0.0};
        std::uniform_real_distribution<double> dist(-0.999, 0.999);
        bool ok = true;
        for (int k = 0; k < 4096 && ok; ++k) {
            const double x = dist(rng);
            const int16_t c = quantize_component(x, cfg);
            ok = std::fabs(x - dequantize_component(c, cfg)) <= cfg.step() / 2 &&
                 quantize_component(dequantize_component(c, cfg), cfg) == c;
        }
        report("quantizer round trip", ok);
    }

    {  // engine output matches the reference channel bit for bit
        std::uniform_int_distribution<int> sample(-32768, 32767);
        std::uniform_int_distribution<int> coeff(0, params.max_coeff());
        std::uniform_int_distribution<int> shift(0, params.shift_bits);
        std::uniform_int_distribution<int> ntaps(1, std::min(params.taps_n, 4));
        bool ok = true;
        for (int rep = 0; rep < 24 && ok; ++rep) {
            TapSet ts;
            ts.shift = shift(rng);
            const int want = ntaps(rng);
            std::uniform_int_distribution<int> idx(0, params.taps_n - 1);
            std::vector<int> indices;
            while (static_cast<int>(indices.size()) < want) {
                const int i = idx(rng);
                if (std::find(indices.begin(), indices.end(), i) == indices.end())
                    indices.push_back(i);
            }
            std::sort(indices.begin(), indices.end());
            for (int i : indices) ts.taps.push_back(Tap{i, coeff(rng)});
            std::vector<IqSample16> input(512);
            for (auto& s : input) {
                s.i = static_cast<int16_t>(sample(rng));
                s.q = static_cast<int16_t>(sample(rng));
            }
            const FilterOrder order =
                rep % 2 ? FilterOrder::hardware_order : FilterOrder::combined;
            TdlEngine engine(params, order);
            engine.set_taps(ts);
            ok = engine.process_block(input) == reference_channel(input, ts, params, order);
        }
        report("engine matches reference channel", ok);
    }

    {  // planner: greedy error within the worst-case bound while shifts last
        const double bound = worst_case_resolution_db(params.coeff_bits);
        // Once every shift stage is in use the coefficient keeps shrinking;
        // the half-step rounding error stays within `bound` while
        // b >= 1 / (10^(bound/10) - 1).
        const double b_floor = 1.0 / (std::pow(10.0, bound / 10.0) - 1.0);
        const double guaranteed = params.shift_bits * shift_step_db() +
                                  20.0 * std::log10(params.max_coeff() / b_floor) - 0.1;
        bool ok = true;
        std::string detail;
        for (double g = 0.0; g <= std::min(guaranteed, max_attenuation_db(params));
             g += 0.37) {
            const PlannedPath p = plan_path(PathSpec{0.0, g}, params);
            if (std::fabs(p.atten_error_db) > bound) {
                ok = false;
                detail = "G=" + std::to_string(g) +
                         " err=" + std::to_string(p.atten_error_db);
                break;
            }
        }
        report("planner within worst-case resolution", ok, detail);
    }

    {  // exact delay recovery through the engine
        std::uniform_int_distribution<int> sample(-20000, 20000);
        std::vector<IqSample16> noise(1024);
        for (auto& s : noise) {
            s.i = static_cast<int16_t>(sample(rng));
            s.q = static_cast<int16_t>(sample(rng));
        }
        bool ok = true;
        std::string detail;
        for (int k : {0, 1, params.taps_n / 2, params.taps_n - 1}) {
            TdlEngine engine(params);
            engine.set_taps(TapSet{0, {Tap{k, params.max_coeff()}}});
            const auto out = engine.process_block(noise);
            const DelayEstimate est = estimate_delay(noise, out, params.clock_hz);
            if (est.lag_samples != k) {
                ok = false;
                detail = "tap " + std::to_string(k) + " measured " +
                         std::to_string(est.lag_samples);
                break;
            }
        }
        report("delay recovery exact", ok, detail);
    }

    {  // attenuation loop: measured power drop tracks the planned value
        std::vector<IqSample16> tone(4096);
        for (size_t n = 0; n < tone.size(); ++n) {
            const double ph = 2.0 * 3.14159265358979323846 * 0.1234567 * n;
            tone[n].i = static_cast<int16_t>(std::llround(32767.0 * std::cos(ph)));
            tone[n].q = static_cast<int16_t>(std::llround(32767.0 * std::sin(ph)));
        }
        bool ok = true;
        std::string detail;
        for (double g = 0.0; g <= 40.0; g += 10.0) {
            const PlannedPath p = plan_path(PathSpec{0.0, g}, params);
            TdlEngine engine(params);
            engine.set_taps(TapSet{p.shift_needed, {Tap{0, p.coeff}}});
            const auto out = engine.process_block(tone);
            const double measured = measure_attenuation_db(tone, out);
            if (std::fabs(measured - p.achieved_atten_db) > 0.05) {
                ok = false;
                detail = "G=" + std::to_string(g) + " measured " + std::to_string(measured) +
                         " planned " + std::to_string(p.achieved_atten_db);
                break;
            }
        }
        report("attenuation round trip", ok, detail);
    }

    std::printf("selfcheck=%s\n", all_ok ? "pass" : "fail");
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chanem: deterministic tapped-delay-line channel emulator"};
    app.require_subcommand(1);

    // spec
    EngineParams spec_params;
    double spec_update_rate = 0.0;
    std::string spec_curve_path;
    CLI::App* spec = app.add_subcommand("spec", "print the capability sheet");
    attach_engine_flags(spec, spec_params);
    spec->add_option("--update-rate", spec_update_rate, "channel updates per second")
        ->capture_default_str();
    spec->add_option("--resolution-curve", spec_curve_path,
                     "write the resolution-vs-attenuation CSV here");

    // plan
    EngineParams plan_params;
    double plan_delay_ns = 0.0, plan_atten_db = 0.0;
    std::vector<std::string> plan_path_args;
    CLI::App* plan = app.add_subcommand("plan", "quantize path specs to taps");
    attach_engine_flags(plan, plan_params);
    CLI::Option* delay_opt = plan->add_option("--delay-ns", plan_delay_ns,
                                              "requested delay in ns");
    CLI::Option* atten_opt = plan->add_option("--atten-db", plan_atten_db,
                                              "requested attenuation in dB");
    plan->add_option("--path", plan_path_args,
                     "DELAY_NS,ATTEN_DB (repeat for up to 3 paths)");

    // run
    RunConfig run_cfg;
    CLI::App* run = app.add_subcommand("run", "process an IQ stream through the channel");
    attach_engine_flags(run, run_cfg.params);
    run->add_option("--in", run_cfg.in_path, "input IQ file");
    run->add_option("--out", run_cfg.out_path, "output IQ file");
    run->add_option("--format", run_cfg.format_name, "sc16 or cf32")->capture_default_str();
    run->add_option("--rate", run_cfg.sample_rate_hz, "stream sample rate Fs in Hz");
    run->add_option("--scenario", run_cfg.scenario_path, "scenario CSV (physical units)");
    run->add_option("--schedule", run_cfg.schedule_path, "compiled schedule CSV");
    run->add_option("--emit-schedule", run_cfg.emit_schedule_path,
                    "write the compiled schedule CSV here");
    run->add_option("--mode", run_cfg.mode_name, "combined or hardware-order")
        ->capture_default_str();
    run->add_option("--udp-in", run_cfg.udp_in, "bridge mode: listen HOST:PORT");
    run->add_option("--udp-out", run_cfg.udp_out, "bridge mode: destination HOST:PORT");
    run->add_flag("--wallclock", run_cfg.wall_clock,
                  "bridge mode: apply updates by elapsed time (not reproducible)");
    run->add_option("--idle-timeout-ms", run_cfg.idle_timeout_ms,
                    "bridge mode: stop after this long without frames");

    // verify
    CLI::App* verify = app.add_subcommand("verify", "measure a processed stream");
    verify->require_subcommand(1);
    std::string v_ref, v_test, v_format = "sc16";
    double v_rate = 200e6;
    CLI::App* vdelay = verify->add_subcommand("delay", "cross-correlation delay estimate");
    vdelay->add_option("--ref", v_ref, "reference IQ file")->required();
    vdelay->add_option("--test", v_test, "test IQ file")->required();
    vdelay->add_option("--rate", v_rate, "sample rate in Hz")->capture_default_str();
    vdelay->add_option("--format", v_format, "sc16 or cf32")->capture_default_str();
    CLI::App* vatten = verify->add_subcommand("atten", "power-drop measurement");
    vatten->add_option("--ref", v_ref, "reference IQ file")->required();
    vatten->add_option("--test", v_test, "test IQ file")->required();
    vatten->add_option("--format", v_format, "sc16 or cf32")->capture_default_str();

    // selfcheck
    EngineParams selfcheck_params;
    CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the built-in oracle suites");
    attach_engine_flags(selfcheck, selfcheck_params);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (spec->parsed()) return cmd_spec(spec_params, spec_update_rate, spec_curve_path);
        if (plan->parsed()) {
            std::vector<PathSpec> paths;
            const bool have_pair = delay_opt->count() > 0 || atten_opt->count() > 0;
            if (!plan_path_args.empty()) {
                if (have_pair)
                    throw UsageError("use either --path or --delay-ns/--atten-db, not both");
                for (const std::string& a : plan_path_args) paths.push_back(parse_path_arg(a));
            } else {
                if (!have_pair)
                    throw UsageError("plan needs --delay-ns/--atten-db or --path");
                paths.push_back(PathSpec{plan_delay_ns, plan_atten_db});
            }
            return cmd_plan(plan_params, paths);
        }
        if (run->parsed()) return cmd_run(run_cfg);
        if (vdelay->parsed()) return cmd_verify_delay(v_ref, v_test, v_rate, v_format);
        if (vatten->parsed()) return cmd_verify_atten(v_ref, v_test, v_format);
        if (selfcheck->parsed()) return cmd_selfcheck(selfcheck_params);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

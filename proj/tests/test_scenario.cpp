// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include "chanem/scenario.hpp"
#include "oracle.hpp"

using namespace chanem;

namespace {
const EngineParams defaults{};

const char* kHeader =
    "t_ms,delay_ns_1,atten_db_1,delay_ns_2,atten_db_2,delay_ns_3,atten_db_3\n";

bool same_schedule(const Schedule& a, const Schedule& b) {
    if (a.entries.size() != b.entries.size()) return false;
    for (size_t k = 0; k < a.entries.size(); ++k)
        if (a.entries[k].sample_index != b.entries[k].sample_index ||
            !(a.entries[k].taps == b.entries[k].taps))
            return false;
    return true;
}
}  // namespace

TEST_CASE("parse a single-row scenario") {
    const Scenario sc = parse_scenario(std::string(kHeader) + "0,0,0\n");
    REQUIRE(sc.rows.size() == 1);
    REQUIRE(sc.rows[0].paths.size() == 1);
    CHECK(sc.rows[0].t_ms == 0.0);
    CHECK(sc.rows[0].paths[0].delay_ns == 0.0);
    CHECK(sc.rows[0].paths[0].atten_db == 0.0);
}

TEST_CASE("parse a three-row scenario with varying attenuation") {
    const Scenario sc =
        parse_scenario(std::string(kHeader) + "0,0,0\n1,0,10\n2,0,20\n");
    REQUIRE(sc.rows.size() == 3);
    CHECK(sc.rows[2].t_ms == 2.0);
    CHECK(sc.rows[2].paths[0].atten_db == 20.0);
}

TEST_CASE("parse scenario with CRLF line endings and blank lines") {
    const Scenario sc =
        parse_scenario("t_ms,delay_ns_1,atten_db_1\r\n0,5,1\r\n\r\n2.5,10,2\r\n");
    REQUIRE(sc.rows.size() == 2);
    CHECK(sc.rows[1].t_ms == 2.5);
    CHECK(sc.rows[1].paths[0].delay_ns == 10.0);
}

TEST_CASE("parse scenario with a disabled middle path") {
    const Scenario sc = parse_scenario(std::string(kHeader) + "0,0,0,,,100,20\n");
    REQUIRE(sc.rows[0].paths.size() == 2);
    CHECK(sc.rows[0].paths[1].delay_ns == 100.0);
}

TEST_CASE("scenario validation errors") {
    // non-monotone time names the offending row
    try {
        parse_scenario(std::string(kHeader) + "0,0,0\n2,0,0\n1,0,0\n");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
    // first row must sit at t=0
    CHECK_THROWS_AS(parse_scenario(std::string(kHeader) + "1,0,0\n"),
                    std::invalid_argument);
    // more than 3 paths
    CHECK_THROWS_AS(parse_scenario(std::string(kHeader) + "0,0,0,1,1,2,2,3,3\n"),
                    std::invalid_argument);
    // malformed number
    CHECK_THROWS_AS(parse_scenario(std::string(kHeader) + "0,zero,0\n"),
                    std::invalid_argument);
    // half-empty pair
    CHECK_THROWS_AS(parse_scenario(std::string(kHeader) + "0,0,0,5,\n"),
                    std::invalid_argument);
    // dangling delay column
    CHECK_THROWS_AS(parse_scenario(std::string(kHeader) + "0,0,0,5\n"),
                    std::invalid_argument);
    // no rows, missing header
    CHECK_THROWS_AS(parse_scenario(std::string(kHeader)), std::invalid_argument);
    CHECK_THROWS_AS(parse_scenario("0,0,0\n"), std::invalid_argument);
    // all paths disabled
    CHECK_THROWS_AS(parse_scenario(std::string(kHeader) + "0,,,,,,\n"),
                    std::invalid_argument);
}

TEST_CASE("compile: time to sample index") {
    const Scenario sc = parse_scenario(std::string(kHeader) + "0,0,0\n1,0,10\n");
    const Schedule sched = compile_schedule(sc, defaults, 1e6);
    REQUIRE(sched.entries.size() == 2);
    CHECK(sched.entries[0].sample_index == 0);
    CHECK(sched.entries[1].sample_index == 1000);
}

TEST_CASE("compile: one second of rows at the update rate") {
    const double u = 1000.0;
    std::string text = kHeader;
    for (int k = 0; k <= 1000; ++k)
        text += std::to_string(k * (1000.0 / u)) + ",0," + std::to_string(k % 40) + "\n";
    const Scenario sc = parse_scenario(text, u);
    const Schedule sched = compile_schedule(sc, defaults, 1e6);
    CHECK(sched.entries.size() == 1001);  // u + 1 entries for [0, 1] s inclusive
    CHECK(sched.entries.back().sample_index == 1000000);
}

TEST_CASE("compile: planning failures carry the row number") {
    const Scenario sc = parse_scenario(std::string(kHeader) + "0,0,0\n1,300,0\n");
    try {
        compile_schedule(sc, defaults, 1e6);
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("delay") != std::string::npos);
    }
}

TEST_CASE("compile: rows collapsing onto one sample index") {
    const Scenario sc =
        parse_scenario(std::string(kHeader) + "0,0,0\n0.0001,0,10\n");  // 0.1 us apart
    CHECK_THROWS_AS(compile_schedule(sc, defaults, 1e6), std::invalid_argument);
}

TEST_CASE("compile is deterministic") {
    const Scenario sc =
        parse_scenario(std::string(kHeader) + "0,0,0\n1,55,10,100,20\n2,0,30\n");
    const Schedule a = compile_schedule(sc, defaults, 2e6);
    const Schedule b = compile_schedule(sc, defaults, 2e6);
    CHECK(same_schedule(a, b));
}

TEST_CASE("max velocity") {
    CHECK(max_velocity_mps(1000.0, 200e6) == Catch::Approx(1500.0).epsilon(0.005));
    CHECK(max_velocity_mps(100.0, 200e6) == Catch::Approx(150.0).epsilon(0.005));
    CHECK(max_velocity_mps(100.0, 200e6) ==
          Catch::Approx(max_velocity_mps(1000.0, 200e6) / 10.0).margin(1e-12));
    CHECK(max_velocity_mps(0.0, 200e6) == 0.0);
    CHECK_THROWS_AS(max_velocity_mps(-1.0, 200e6), std::invalid_argument);
    CHECK_THROWS_AS(max_velocity_mps(1.0, 0.0), std::invalid_argument);
    // inversely linear in the clock
    CHECK(max_velocity_mps(1000.0, 400e6) ==
          Catch::Approx(max_velocity_mps(1000.0, 200e6) / 2.0).margin(1e-12));
    // agrees with the capability sheet
    CHECK(max_velocity_mps(1000.0, defaults.clock_hz) ==
          derive_specs(defaults, 1000.0).max_velocity_mps);
}

TEST_CASE("schedule CSV export and re-import") {
    const Scenario sc =
        parse_scenario(std::string(kHeader) + "0,0,0\n1,55,10,100,20\n");
    const Schedule sched = compile_schedule(sc, defaults, 1e6);
    const std::string csv = format_schedule_csv(sched);
    CHECK(csv.starts_with("sample_index,shift_j,taps\n"));
    CHECK(csv.find("0,0,0:32767\n") != std::string::npos);

    const auto entries = parse_schedule_csv(csv, defaults);
    REQUIRE(entries.size() == sched.entries.size());
    for (size_t k = 0; k < entries.size(); ++k) {
        CHECK(entries[k].sample_index == sched.entries[k].sample_index);
        CHECK(entries[k].taps == sched.entries[k].taps);
    }
}

TEST_CASE("schedule CSV validation") {
    CHECK_THROWS_AS(parse_schedule_csv("", defaults), std::invalid_argument);
    CHECK_THROWS_AS(parse_schedule_csv("5,0,0:32767\n", defaults),
                    std::invalid_argument);  // must start at 0
    CHECK_THROWS_AS(parse_schedule_csv("0,0,0:32767\n0,0,0:100\n", defaults),
                    std::invalid_argument);  // strictly increasing
    CHECK_THROWS_AS(parse_schedule_csv("0,0,0-32767\n", defaults),
                    std::invalid_argument);  // bad tap syntax
    CHECK_THROWS_AS(parse_schedule_csv("0,0,60:100\n", defaults),
                    std::invalid_argument);  // tap index out of range
}

TEST_CASE("updates land exactly on their sample boundary") {
    std::mt19937 rng(21);
    const auto input = oracle::noise_block(2000, rng, 20000);

    // passthrough until sample 1000, then 6 dB down
    const Scenario sc = parse_scenario(std::string(kHeader) + "0,0,0\n1,0,6.0206\n");
    const Schedule sched = compile_schedule(sc, defaults, 1e6);
    REQUIRE(sched.entries[1].sample_index == 1000);

    TdlEngine engine(defaults);
    ScheduleRunner runner(engine, sched.entries);
    const auto out = runner.process_block(input);

    // reference: the first 1000 samples under the first tap set, the rest
    // under the second, with the delay line carried across the boundary
    const auto ref_head =
        oracle::convolve(input, sched.entries[0].taps, defaults, FilterOrder::combined);
    const auto ref_tail =
        oracle::convolve(input, sched.entries[1].taps, defaults, FilterOrder::combined);
    for (size_t n = 0; n < 1000; ++n) CHECK(out[n] == ref_head[n]);
    for (size_t n = 1000; n < input.size(); ++n) CHECK(out[n] == ref_tail[n]);
    CHECK(runner.updates_applied() == 2);
}

TEST_CASE("schedule runner output is invariant to chunking") {
    std::mt19937 rng(22);
    const auto input = oracle::noise_block(4000, rng);
    const Scenario sc = parse_scenario(std::string(kHeader) +
                                       "0,0,0\n0.5,10,3\n1.7,25,12,5,1\n3.1,0,30\n");
    const Schedule sched = compile_schedule(sc, defaults, 1e6);

    TdlEngine whole(defaults);
    ScheduleRunner whole_runner(whole, sched.entries);
    const auto expected = whole_runner.process_block(input);

    for (size_t chunk : {size_t{1}, size_t{7}, size_t{64}, size_t{4096}}) {
        TdlEngine engine(defaults);
        ScheduleRunner runner(engine, sched.entries);
        std::vector<IqSample16> got;
        for (size_t at = 0; at < input.size(); at += chunk) {
            const size_t len = std::min(chunk, input.size() - at);
            const auto piece = runner.process_block(std::span(input).subspan(at, len));
            got.insert(got.end(), piece.begin(), piece.end());
        }
        CHECK(got == expected);
    }
}

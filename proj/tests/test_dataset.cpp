#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "helpers.hpp"
#include "hydrofit/dataset.hpp"
#include "hydrofit/simulator.hpp"

using namespace hydrofit;
using hydrofit::testing::sampled_trajectory;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_csv happy path and schema errors") {
    const auto ok = write_temp("hf_ok.csv", "t,v,p\n0.0,1.0,2.0\n0.04,1.5,2.5\n0.08,2.0,3.0\n");
    const Dataset ds = load_csv(ok);
    CHECK(ds.n_samples() == 3);
    CHECK(ds.trajectories.size() == 1);
    CHECK(ds.trajectories[0].samples()[1].v == 1.5);
    CHECK_FALSE(ds.has_vdot());

    const auto missing = write_temp("hf_missing.csv", "t,v\n0.0,1.0\n");
    CHECK_THROWS_AS(load_csv(missing), SchemaError);

    const auto bad_field = write_temp("hf_bad.csv", "t,v,p\n0.0,1.0,2.0\n0.04,oops,2.5\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_field), doctest::Contains("line 3"), ParseError);
}

TEST_CASE("load_csv reports non-monotone time with its row") {
    std::string content = "t,v,p\n";
    for (int i = 0; i < 6; ++i) {
        content += std::to_string(i * 0.04) + ",1.0,2.0\n";
    }
    content += "0.12,1.0,2.0\n";  // data row 7: t goes backwards
    const auto path = write_temp("hf_nonmono.csv", content);
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("data row 7"), InvariantError);
}

TEST_CASE("load_csv accepts CRLF, column reordering, and a cycle column") {
    const auto path = write_temp("hf_crlf.csv",
                                 "p,cycle,t,v\r\n2.0,0,0.0,1.0\r\n2.5,0,0.04,1.5\r\n"
                                 "3.0,1,0.0,1.0\r\n3.5,1,0.04,1.5\r\n");
    const Dataset ds = load_csv(path);
    CHECK(ds.trajectories.size() == 2);
    CHECK(ds.trajectories[1].cycle_id() == 1);
    CHECK(ds.trajectories[1].samples()[0].p == 3.0);
}

TEST_CASE("csv round-trips bit-exactly through write_csv/load_csv") {
    const ActuatorTruth truth;
    Protocol proto = hydrofit::testing::small_protocol(7, 1);
    proto.flow_rates = {60.0, 100.0};
    const Dataset ds = generate(truth, proto);
    const auto path = std::filesystem::temp_directory_path() / "hf_roundtrip.csv";
    write_csv(ds, path);
    const Dataset back = load_csv(path);

    REQUIRE(back.trajectories.size() == ds.trajectories.size());
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        const auto& a = ds.trajectories[i].samples();
        const auto& b = back.trajectories[i].samples();
        REQUIRE(a.size() == b.size());
        for (std::size_t s = 0; s < a.size(); ++s) {
            CHECK(a[s].t == b[s].t);
            CHECK(a[s].v == b[s].v);
            CHECK(a[s].v_dot == b[s].v_dot);
            CHECK(a[s].p == b[s].p);
        }
    }
}

TEST_CASE("differentiate on a linear ramp") {
    const Trajectory traj = sampled_trajectory([](double t) { return 100.0 * t; }, 30);
    const Trajectory diffed = differentiate(traj);
    for (const Sample& s : diffed.samples()) {
        CHECK(s.v_dot == doctest::Approx(100.0).epsilon(1e-11));
        CHECK(std::abs(s.v_ddot) < 1e-8);
    }
    CHECK(diffed.has_vdot());
    CHECK(diffed.has_vddot());
}

TEST_CASE("differentiate on constant volume") {
    const Trajectory traj = sampled_trajectory([](double) { return 5.0; }, 12);
    const Trajectory diffed = differentiate(traj);
    for (const Sample& s : diffed.samples()) {
        CHECK(s.v_dot == 0.0);  // symmetric sums cancel exactly
        CHECK(s.v_ddot == 0.0);
    }
}

TEST_CASE("differentiate recovers the second derivative of t^2") {
    const Trajectory traj = sampled_trajectory([](double t) { return t * t; }, 40);
    const Trajectory diffed = differentiate(traj);
    const auto& samples = diffed.samples();
    for (std::size_t i = 2; i + 2 < samples.size(); ++i) {
        CHECK(samples[i].v_ddot == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(samples[i].v_dot == doctest::Approx(2.0 * samples[i].t).epsilon(1e-6));
    }
}

TEST_CASE("differentiate requires five samples") {
    const Trajectory traj = sampled_trajectory([](double t) { return t; }, 4);
    CHECK_THROWS_AS(differentiate(traj), TooShortError);
}

TEST_CASE("differentiate then trapezoid-integrate recovers smooth volume") {
    const Trajectory traj = sampled_trajectory(
        [](double t) { return 200.0 + 150.0 * std::sin(2.0 * M_PI * 0.2 * t); }, 250);
    const Trajectory diffed = differentiate(traj);
    const auto& samples = diffed.samples();
    double integral = samples[0].v;
    double worst = 0.0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const double dt = samples[i].t - samples[i - 1].t;
        integral += 0.5 * (samples[i].v_dot + samples[i - 1].v_dot) * dt;
        worst = std::max(worst, std::abs(integral - samples[i].v));
    }
    CHECK(worst <= 0.001 * 300.0);  // 0.1% of the volume range
}

TEST_CASE("segment_cycles splits a triangle wave into alternating phases") {
    // 3 periods, |v_dot| = 50 mm^3/s, period 4 s.
    const Trajectory traj = sampled_trajectory(
        [](double t) {
            const double phase = std::fmod(t, 4.0);
            return phase < 2.0 ? 50.0 * phase : 100.0 - 50.0 * (phase - 2.0);
        },
        300);
    const auto segments = segment_cycles(differentiate(traj));
    REQUIRE(segments.size() == 6);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        CHECK(segments[i].phase() == (i % 2 == 0 ? Phase::Inflation : Phase::Deflation));
    }

    std::size_t total = 0;
    for (const auto& segment : segments) total += segment.size();
    CHECK(total == traj.size());
}

TEST_CASE("segment_cycles keeps a monotone ramp whole") {
    const Trajectory traj = sampled_trajectory([](double t) { return 40.0 * t; }, 50);
    const auto segments = segment_cycles(differentiate(traj));
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].phase() == Phase::Inflation);
    CHECK(segments[0].size() == 50);
}

TEST_CASE("segment_cycles attaches dwell samples to the preceding segment") {
    // Hand-built 20-sample trace: 8 up at +50, 6 dwell, 6 down at -50.
    std::vector<Sample> samples;
    double v = 0.0;
    for (int i = 0; i < 20; ++i) {
        double v_dot = 0.0;
        if (i < 8) {
            v_dot = 50.0;
        } else if (i >= 14) {
            v_dot = -50.0;
        }
        samples.emplace_back(i * 0.04, v, v_dot, 0.0, 0.0);
        v = std::max(0.0, v + v_dot * 0.04);
    }
    const Trajectory traj(samples, 25.0, 3, Phase::Mixed, true, false);
    const auto segments = segment_cycles(traj);
    REQUIRE(segments.size() == 2);
    // Applying the rule by hand: samples 0..13 (ramp + dwell) are Inflation,
    // samples 14..19 Deflation.
    CHECK(segments[0].phase() == Phase::Inflation);
    CHECK(segments[0].size() == 14);
    CHECK(segments[1].phase() == Phase::Deflation);
    CHECK(segments[1].size() == 6);
    CHECK(segments[0].cycle_id() == 3);
}

TEST_CASE("segment_cycles tags an all-dwell trace Mixed") {
    const Trajectory traj = sampled_trajectory([](double) { return 10.0; }, 30);
    const auto segments = segment_cycles(differentiate(traj));
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].phase() == Phase::Mixed);
}

TEST_CASE("split is deterministic and uses the floor rule") {
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 20; ++i) {
        trajs.push_back(sampled_trajectory([i](double t) { return 10.0 * (i + 1) + t; }, 10, 25.0, i));
    }
    const Dataset ds(trajs, 0);

    const auto [train, test] = split(ds, 0.8, 1);
    CHECK(train.trajectories.size() == 16);
    CHECK(test.trajectories.size() == 4);

    const auto [train2, test2] = split(ds, 0.8, 1);
    CHECK(dataset_fingerprint(train) == dataset_fingerprint(train2));
    CHECK(dataset_fingerprint(test) == dataset_fingerprint(test2));

    const auto [other, _] = split(ds, 0.8, 2);
    CHECK(dataset_fingerprint(train) != dataset_fingerprint(other));

    trajs.push_back(sampled_trajectory([](double t) { return 500.0 + t; }, 10, 25.0, 20));
    const Dataset odd(trajs, 0);
    const auto [a, b] = split(odd, 0.5, 9);
    CHECK(a.trajectories.size() == 10);  // floor(21 * 0.5)
    CHECK(b.trajectories.size() == 11);
}

TEST_CASE("split rejects degenerate inputs") {
    const Dataset ds({sampled_trajectory([](double t) { return t; }, 10)}, 0);
    CHECK_THROWS_AS(split(ds, 0.5, 0), InsufficientTrajectoriesError);
    const Dataset ds2({sampled_trajectory([](double t) { return t; }, 10),
                       sampled_trajectory([](double t) { return 2 * t; }, 10)},
                      0);
    CHECK_THROWS_AS(split(ds2, 0.0, 0), InvariantError);
    CHECK_THROWS_AS(split(ds2, 1.0, 0), InvariantError);
}

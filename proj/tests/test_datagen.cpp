// Calibration-protocol and grasp-collection data generator: cell enumeration,
// canonical ordering, determinism across schedules, CSV round-trips, and the
// physical sanity of the logged labels.

#include "fingersim/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fingersim/errors.hpp"

using namespace fingersim;

namespace {

// Rig matching the default index-joint hardware; tests override pieces of it.
datagen::RigConfig test_rig() {
    datagen::RigConfig rig;
    rig.routing = {0.012, 0.018, 0.25, 0.15, 0.0030};
    rig.plant.link_inertia = 1.5e-4;
    rig.plant.viscous_friction = 4.0e-3;
    rig.plant.coulomb_friction = 1.5e-3;
    rig.plant.weight_mass = 0.0;  // calibration cells override per load
    rig.plant.weight_arm = 0.08;
    rig.plant.stop_lo = -0.2;
    rig.plant.stop_hi = 1.8;
    rig.muscle = {40.0, 300.0, 5.0, 50.0, 200.0, 0.03};
    rig.motion.q_low = 0.15;
    rig.motion.q_high = 1.05;
    rig.motion.hold_time = 0.5;
    return rig;
}

datagen::NoiseModel test_noise() { return {}; }

bool records_equal(const gpr::SampleRecord& a, const gpr::SampleRecord& b) {
    for (std::size_t i = 0; i < a.features.size(); ++i) {
        if (a.features[i] != b.features[i]) return false;
    }
    return a.torque == b.torque;
}

bool runs_equal(const std::vector<gpr::SampleRecord>& a, const std::vector<gpr::SampleRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!records_equal(a[i], b[i])) return false;
    }
    return true;
}

double mean_of(const std::vector<gpr::SampleRecord>& rows, std::size_t begin, std::size_t end,
               std::size_t feature_or_torque /* 6 = torque */) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        acc += feature_or_torque < 6 ? rows[i].features[feature_or_torque] : rows[i].torque;
    }
    return acc / static_cast<double>(end - begin);
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "fingersim_datagen_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

template <typename Fn>
void expect_validation(Fn&& fn, const std::string& needle) {
    try {
        fn();
        FAIL_CHECK("expected ValidationError mentioning '" << needle << "', nothing thrown");
    } catch (const ValidationError& e) {
        CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                      "message '" << e.what() << "' does not mention '" << needle << "'");
    }
}

}  // namespace

TEST_CASE("protocol cell and row arithmetic") {
    datagen::CalibrationProtocol proto;  // stock protocol
    plant::SimTimings timings;           // 100 Hz control, 1 kHz plant

    auto loads = proto.loads();
    REQUIRE(loads.size() == 20);
    CHECK(loads.front() == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(loads.back() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(loads[1] - loads[0] == doctest::Approx(0.05).epsilon(1e-9));

    CHECK(proto.cell_count() == 80);                 // 20 loads x 4 temperatures x 1 rep
    CHECK(proto.rows_per_cell(timings) == 3000);     // 30 s at 100 Hz
    CHECK(proto.cell_count() * proto.rows_per_cell(timings) == 240000);

    datagen::CalibrationProtocol custom;
    custom.load_min = 0.2;
    custom.load_max = 0.4;
    custom.load_step = 0.2;
    custom.temperatures = {20.0, 30.0, 40.0};
    custom.repetitions = 3;
    custom.duration_per_cell = 2.5;
    CHECK(custom.loads().size() == 2);
    CHECK(custom.cell_count() == 18);
    CHECK(custom.rows_per_cell(timings) == 250);
}

TEST_CASE("calibration cells appear in canonical repetition/load/temperature order") {
    datagen::CalibrationProtocol proto;
    proto.load_min = 0.1;
    proto.load_max = 0.2;
    proto.load_step = 0.1;
    proto.temperatures = {20.0, 40.0};
    proto.duration_per_cell = 2.0;
    proto.repetitions = 2;
    proto.seed = 42;

    auto rig = test_rig();
    auto rows = datagen::run_calibration(proto, rig, test_noise(), ExecPolicy::Serial);

    const std::size_t per_cell = proto.rows_per_cell(rig.timings);
    REQUIRE(per_cell == 200);
    REQUIRE(rows.size() == 8 * per_cell);

    // Temperature identifies the innermost loop: blocks alternate 20, 40.
    for (std::size_t b = 0; b < 8; ++b) {
        double expected_temp = proto.temperatures[b % 2];
        double got = mean_of(rows, b * per_cell, (b + 1) * per_cell, 5);
        CHECK_MESSAGE(std::abs(got - expected_temp) < 0.3,
                      "block " << b << " mean temperature " << got << " != " << expected_temp);
    }

    // The torque label scales with the hanging load: within a repetition the
    // two heavier-load blocks (2, 3) outweigh the lighter ones (0, 1).
    double light = 0.5 * (mean_of(rows, 0, per_cell, 6) +
                          mean_of(rows, per_cell, 2 * per_cell, 6));
    double heavy = 0.5 * (mean_of(rows, 2 * per_cell, 3 * per_cell, 6) +
                          mean_of(rows, 3 * per_cell, 4 * per_cell, 6));
    CHECK(heavy > light + 0.03);

    // Repetitions re-run the same condition with fresh noise substreams: same
    // block-level statistics, different samples.
    std::vector<gpr::SampleRecord> rep0(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(per_cell));
    std::vector<gpr::SampleRecord> rep1(rows.begin() + static_cast<std::ptrdiff_t>(4 * per_cell),
                                        rows.begin() + static_cast<std::ptrdiff_t>(5 * per_cell));
    CHECK(!runs_equal(rep0, rep1));
    double rep1_temp = mean_of(rows, 4 * per_cell, 5 * per_cell, 5);
    CHECK(std::abs(rep1_temp - 20.0) < 0.3);
}

TEST_CASE("generated data is deterministic across reruns and schedules") {
    datagen::CalibrationProtocol proto;
    proto.load_min = 0.15;
    proto.load_max = 0.3;
    proto.load_step = 0.15;
    proto.temperatures = {20.0, 35.0};
    proto.duration_per_cell = 1.5;
    proto.seed = 1234;

    auto rig = test_rig();
    auto noise = test_noise();

    auto serial_a = datagen::run_calibration(proto, rig, noise, ExecPolicy::Serial);
    auto serial_b = datagen::run_calibration(proto, rig, noise, ExecPolicy::Serial);
    auto parallel = datagen::run_calibration(proto, rig, noise, ExecPolicy::Parallel);

    CHECK(runs_equal(serial_a, serial_b));
    CHECK(runs_equal(serial_a, parallel));

    // A different seed must actually change the data.
    proto.seed = 1235;
    auto reseeded = datagen::run_calibration(proto, rig, noise, ExecPolicy::Serial);
    CHECK(!runs_equal(serial_a, reseeded));
}

TEST_CASE("sample csv round-trips bit-exactly") {
    datagen::CalibrationProtocol proto;
    proto.load_min = 0.2;
    proto.load_max = 0.2;
    proto.load_step = 0.1;
    proto.temperatures = {25.0};
    proto.duration_per_cell = 1.0;
    proto.seed = 9;

    auto rig = test_rig();
    rig.motion.hold_time = 0.2;  // short cell: leave ramp time inside 1 s
    auto rows = datagen::run_calibration(proto, rig, test_noise(), ExecPolicy::Serial);
    REQUIRE(rows.size() == 100);

    // Add hand-built awkward values: tiny magnitudes, negative zero, long
    // mantissas.  All must survive the text format unchanged.
    gpr::SampleRecord nasty;
    nasty.features = {0.1 + 1e-17, -2.5e-7, 1.0 / 3.0, 3.999999999999999, -0.0, 35.123456789};
    nasty.torque = -1.25e-12;
    rows.push_back(nasty);

    auto path = temp_dir() / "roundtrip.csv";
    datagen::write_csv(path, rows);
    auto back = datagen::read_csv(path);

    REQUIRE(back.size() == rows.size());
    CHECK(runs_equal(rows, back));

    // Writing the same rows twice produces byte-identical files.
    auto path2 = temp_dir() / "roundtrip2.csv";
    datagen::write_csv(path2, rows);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(!s1.empty());
}

TEST_CASE("sample csv rejects malformed input") {
    auto dir = temp_dir();

    SUBCASE("wrong header") {
        auto path = dir / "bad_header.csv";
        std::ofstream out(path);
        out << "motor_current,motor_pos,motor_vel,joint_vel,joint_pos,temperature,torque\n";
        out << "0,0,0,0,0,20,0\n";
        out.close();
        CHECK_THROWS_AS(datagen::read_csv(path), ValidationError);
    }

    SUBCASE("ragged row") {
        auto path = dir / "ragged.csv";
        std::ofstream out(path);
        out << "motor_current,motor_pos,motor_vel,joint_pos,joint_vel,temperature,torque\n";
        out << "0,0,0,0,0,20\n";  // one column short
        out.close();
        CHECK_THROWS_AS(datagen::read_csv(path), ValidationError);
    }

    SUBCASE("non-numeric cell") {
        auto path = dir / "text_cell.csv";
        std::ofstream out(path);
        out << "motor_current,motor_pos,motor_vel,joint_pos,joint_vel,temperature,torque\n";
        out << "0,0,oops,0,0,20,0\n";
        out.close();
        CHECK_THROWS_AS(datagen::read_csv(path), ValidationError);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(datagen::read_csv(dir / "does_not_exist.csv"), IoError);
    }
}

TEST_CASE("tracking controller covers the commanded motion range") {
    datagen::CalibrationProtocol proto;
    proto.load_min = 0.3;
    proto.load_max = 0.3;
    proto.load_step = 0.1;
    proto.temperatures = {20.0};
    proto.duration_per_cell = 6.0;
    proto.seed = 7;

    auto rig = test_rig();
    auto rows = datagen::run_calibration(proto, rig, test_noise(), ExecPolicy::Serial);
    REQUIRE(rows.size() == 600);

    double q_min = 1e9, q_max = -1e9, v_abs_max = 0.0;
    for (const auto& r : rows) {
        q_min = std::min(q_min, r.features[3]);
        q_max = std::max(q_max, r.features[3]);
        v_abs_max = std::max(v_abs_max, std::abs(r.features[4]));
    }
    // The ramp must actually reach the top of the range and come back without
    // running away: bounded positions and sane velocities are the core check.
    CHECK(q_max > rig.motion.q_high - 0.15);
    CHECK(q_max < rig.motion.q_high + 0.35);
    CHECK(q_min > rig.plant.stop_lo - 1e-9);
    CHECK(q_min < rig.motion.q_low + 0.1);
    CHECK(v_abs_max < 12.0);

    // Labels stay within the physical envelope of a 0.3 kg weight on an
    // 0.08 m lever (plus label noise): |torque| <= mg*arm + margin.
    double bound = 0.3 * 9.81 * 0.08 + 0.05;
    for (const auto& r : rows) {
        CHECK(std::abs(r.torque) < bound);
    }
}

TEST_CASE("grasp trials produce contact-dominated labels and are deterministic") {
    std::vector<plant::ContactObject> objects = {
        {"block-a", 20000.0, 3.0, 0.6},
        {"pad-b", 500.0, 1.0, 0.6},
    };
    auto rig = test_rig();  // weight_mass 0: labels are contact torque only
    auto noise = test_noise();

    const double duration = 2.5;
    auto rows = datagen::run_grasp_collection(objects, 2, duration, rig, noise, 99,
                                              ExecPolicy::Serial);
    const std::size_t per_trial =
        static_cast<std::size_t>(std::llround(duration * rig.timings.control_rate));
    REQUIRE(per_trial == 250);
    REQUIRE(rows.size() == 4 * per_trial);

    auto rerun = datagen::run_grasp_collection(objects, 2, duration, rig, noise, 99,
                                               ExecPolicy::Parallel);
    CHECK(runs_equal(rows, rerun));

    for (std::size_t trial = 0; trial < 4; ++trial) {
        std::size_t base = trial * per_trial;
        bool stiff = trial < 2;  // trials are grouped by object

        // Before the reference leaves the start pose the fingertip is far from
        // the object, so the external torque is label noise only.
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(std::abs(rows[base + i].torque) < 0.02);
        }
        // By the end of the trial the finger presses the object.
        double late = mean_of(rows, base + per_trial - 30, base + per_trial, 6);
        CHECK_MESSAGE(late > (stiff ? 0.2 : 0.03),
                      "trial " << trial << " late-window torque " << late);
    }

    // Trials of the same object draw different randomizations.
    std::vector<gpr::SampleRecord> t0(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(per_trial));
    std::vector<gpr::SampleRecord> t1(rows.begin() + static_cast<std::ptrdiff_t>(per_trial),
                                      rows.begin() + static_cast<std::ptrdiff_t>(2 * per_trial));
    CHECK(!runs_equal(t0, t1));
}

TEST_CASE("generator rejects inconsistent setups with named errors") {
    auto rig = test_rig();
    auto noise = test_noise();
    datagen::CalibrationProtocol proto;
    proto.load_min = 0.1;
    proto.load_max = 0.2;
    proto.load_step = 0.1;
    proto.temperatures = {20.0};
    proto.duration_per_cell = 2.0;

    SUBCASE("load grid must divide evenly") {
        auto bad = proto;
        bad.load_min = 0.05;
        bad.load_max = 0.2;
        bad.load_step = 0.07;
        expect_validation([&] { (void)datagen::run_calibration(bad, rig, noise, ExecPolicy::Serial); },
                          "load_step");
    }
    SUBCASE("holds must leave time to ramp") {
        auto bad = proto;
        bad.duration_per_cell = 0.9;  // two 0.5 s holds already exceed this
        expect_validation([&] { (void)datagen::run_calibration(bad, rig, noise, ExecPolicy::Serial); },
                          "ramp");
    }
    SUBCASE("at least one temperature") {
        auto bad = proto;
        bad.temperatures.clear();
        expect_validation([&] { (void)datagen::run_calibration(bad, rig, noise, ExecPolicy::Serial); },
                          "temperature");
    }
    SUBCASE("repetitions must be positive") {
        auto bad = proto;
        bad.repetitions = 0;
        expect_validation([&] { (void)datagen::run_calibration(bad, rig, noise, ExecPolicy::Serial); },
                          "repetitions");
    }
    SUBCASE("motion range must respect the hard stops") {
        auto bad_rig = rig;
        bad_rig.motion.q_high = 2.5;  // beyond stop_hi = 1.8
        expect_validation([&] { (void)datagen::run_calibration(proto, bad_rig, noise, ExecPolicy::Serial); },
                          "stops");
    }
    SUBCASE("velocity damping must be non-negative") {
        auto bad_rig = rig;
        bad_rig.motion.vel_damping = -0.1;
        expect_validation([&] { (void)datagen::run_calibration(proto, bad_rig, noise, ExecPolicy::Serial); },
                          "vel_damping");
    }
    SUBCASE("noise levels must be non-negative") {
        auto bad_noise = noise;
        bad_noise.encoder_noise_std = -1e-3;
        expect_validation([&] { (void)datagen::run_calibration(proto, rig, bad_noise, ExecPolicy::Serial); },
                          "encoder_noise_std");
    }
    SUBCASE("grasp collection needs objects, trials, and time") {
        expect_validation([&] {
            (void)datagen::run_grasp_collection({}, 1, 2.0, rig, noise, 0, ExecPolicy::Serial);
        }, "object");
        std::vector<plant::ContactObject> objs = {{"thing", 100.0, 1.0, 0.5}};
        expect_validation([&] {
            (void)datagen::run_grasp_collection(objs, 0, 2.0, rig, noise, 0, ExecPolicy::Serial);
        }, "trials_per_object");
        expect_validation([&] {
            (void)datagen::run_grasp_collection(objs, 1, 0.4, rig, noise, 0, ExecPolicy::Serial);
        }, "trial_duration");
    }
}

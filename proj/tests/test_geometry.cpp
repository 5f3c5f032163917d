#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "fingersim/geometry.hpp"
#include "fingersim/rng.hpp"
#include "oracles.hpp"

using namespace fingersim;
using geometry::TendonRouting;

using testing::draw_feasible_routing;

TEST_CASE("moment arm matches the tangent-point reference across random routings") {
    Rng rng(substream_seed(913, 77));
    for (int i = 0; i < 2000; ++i) {
        auto c = draw_feasible_routing(rng);
        double got = geometry::moment_arm(c.routing, c.q).moment_arm;
        double want = testing::oracle_moment_arm(c.routing, c.q);
        CAPTURE(i);
        CAPTURE(c.q);
        CHECK(std::abs(got - want) < 1e-9);
    }
}

TEST_CASE("symmetric right-angle layout has a closed-form arm") {
    // Unit offsets, quarter-turn separation, radius 0.2: the tangent geometry
    // collapses to exact decimals (arm = 0.8).
    TendonRouting r{1.0, 1.0, 0.0, 0.0, 0.2};
    auto res = geometry::moment_arm(r, std::numbers::pi / 2.0);
    CHECK(std::abs(res.moment_arm - 0.8) < 1e-12);
    CHECK(std::abs(res.chord_len - std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(res.wrap_angle - std::asin(0.2 / std::sqrt(2.0))) < 1e-12);
    CHECK(std::abs(res.anchor_vertex_angle - std::numbers::pi / 4.0) < 1e-12);
}

TEST_CASE("external torque is linear in tension") {
    TendonRouting r{0.015, 0.02, 0.3, 0.1, 0.003};
    double q = 0.7;
    double arm = geometry::moment_arm(r, q).moment_arm;
    CHECK(geometry::external_torque(r, q, 0.0) == 0.0);
    CHECK(std::abs(geometry::external_torque(r, q, 2.5) - 2.5 * arm) < 1e-15);
    CHECK(std::abs(geometry::external_torque(r, q, 10.0) -
                   4.0 * geometry::external_torque(r, q, 2.5)) < 1e-12);
}

TEST_CASE("tension must be a finite non-negative number") {
    TendonRouting r{0.015, 0.02, 0.3, 0.1, 0.003};
    CHECK_THROWS_AS(geometry::external_torque(r, 0.5, -1.0), ValidationError);
    CHECK_THROWS_AS(geometry::external_torque(r, 0.5, std::nan("")), ValidationError);
    CHECK_THROWS_AS(geometry::external_torque(r, std::nan(""), 1.0), ValidationError);
}

TEST_CASE("degenerate chord raises a numeric error") {
    // Equal offsets and zero separation put the pulley center on the anchor.
    TendonRouting r{0.02, 0.02, 0.0, 0.0, 0.004};
    CHECK_THROWS_AS(geometry::moment_arm(r, 0.0), NumericError);
}

TEST_CASE("anchor inside the pulley circle raises a numeric error") {
    // Offsets differ by 1 mm, radius 1.5 mm: at zero separation the chord is
    // shorter than the radius.
    TendonRouting r{0.02, 0.021, 0.0, 0.0, 0.0015};
    CHECK_THROWS_AS(geometry::moment_arm(r, 0.0), NumericError);
}

TEST_CASE("routing validation rejects unphysical parameters") {
    TendonRouting good{0.015, 0.02, 0.3, 0.1, 0.003};
    CHECK_NOTHROW(good.validate());

    TendonRouting r = good;
    r.pulley_radius = -0.001;
    CHECK_THROWS_AS(r.validate(), ValidationError);

    r = good;
    r.pulley_radius = 0.016;  // >= pulley_offset_len
    CHECK_THROWS_AS(r.validate(), ValidationError);

    r = good;
    r.pulley_offset_len = 0.0;
    CHECK_THROWS_AS(r.validate(), ValidationError);

    r = good;
    r.anchor_angle = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(r.validate(), ValidationError);
}

TEST_CASE("angle-chain variant agrees with the vector construction") {
    Rng rng(substream_seed(913, 78));
    for (int i = 0; i < 2000; ++i) {
        auto c = draw_feasible_routing(rng);
        auto a = geometry::moment_arm(c.routing, c.q);
        auto b = geometry::moment_arm_sine_rule(c.routing, c.q);
        CAPTURE(i);
        CHECK(std::abs(a.moment_arm - b.moment_arm) < 1e-9);
        CHECK(std::abs(a.anchor_vertex_angle - b.anchor_vertex_angle) < 1e-9);
        CHECK(std::abs(a.wrap_angle - b.wrap_angle) < 1e-12);
        CHECK(std::abs(a.chord_len - b.chord_len) < 1e-12);
    }
}

TEST_CASE("angle-chain variant handles an obtuse anchor angle") {
    // Long pulley offset and short anchor offset make the anchor-vertex angle
    // obtuse over part of the stroke; the naive arcsine would fold it back
    // into the acute range and report the wrong arm.
    TendonRouting r{0.03, 0.01, 0.0, 0.0, 0.002};
    bool saw_obtuse = false;
    for (double q = 0.15; q < 1.2; q += 0.01) {
        auto a = geometry::moment_arm(r, q);
        auto b = geometry::moment_arm_sine_rule(r, q);
        if (b.anchor_vertex_angle > std::numbers::pi / 2.0) saw_obtuse = true;
        CHECK(std::abs(a.moment_arm - b.moment_arm) < 1e-9);
    }
    CHECK(saw_obtuse);
}

TEST_CASE("moment arm never exceeds the anchor offset") {
    Rng rng(substream_seed(913, 79));
    for (int i = 0; i < 500; ++i) {
        auto c = draw_feasible_routing(rng);
        double arm = geometry::moment_arm(c.routing, c.q).moment_arm;
        CHECK(arm >= 0.0);
        CHECK(arm <= c.routing.anchor_offset_len + 1e-12);
    }
}

TEST_CASE("joint limit validation") {
    geometry::JointLimits lim{-0.2, 1.8};
    CHECK_NOTHROW(lim.validate());
    CHECK_THROWS_AS((geometry::JointLimits{1.0, 1.0}.validate()), ValidationError);
    CHECK_THROWS_AS((geometry::JointLimits{0.0, std::nan("")}.validate()), ValidationError);
}

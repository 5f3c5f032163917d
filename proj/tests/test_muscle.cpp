#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "fingersim/muscle.hpp"

using namespace fingersim;
using muscle::MuscleParams;
using muscle::MuscleState;

namespace {

MuscleParams reference_params() {
    // gain 2 N/A, kp 5 1/m, kd1 1.0, kd2 0.1, ks 50 N/m, rest 0.02 m
    return MuscleParams{2.0, 5.0, 1.0, 0.1, 50.0, 0.02};
}

}  // namespace

TEST_CASE("force law reproduces a hand-computed reference point") {
    // current 0.5 A, length error 0.1 m, rate error 0.5 m/s, stretch 0.01 m:
    //   2*0.5 + e^{5*0.1} + (1.0*0.5 + 0.1)*0.5 + 50*0.01
    // = 1 + e^0.5 + 0.3 + 0.5
    MuscleParams p = reference_params();
    MuscleState s;
    s.current = 0.5;
    s.cable_len = 0.30;
    s.cable_len_desired = 0.40;
    s.cable_vel = 0.2;
    s.cable_vel_desired = 0.7;
    s.spring_len = 0.03;
    const double expected = 1.0 + std::exp(0.5) + 0.3 + 0.5;
    CHECK(std::abs(muscle::tendon_force(p, s) - expected) < 1e-12);
    CHECK(std::abs(expected - 3.4487212707001282) < 1e-15);
}

TEST_CASE("at zero tracking error the force is gain*current plus one") {
    // Length and rate errors zero, spring at rest: only the active term and
    // e^0 = 1 remain.
    MuscleParams p = reference_params();
    for (double current : {0.0, 0.25, 1.0, 4.0}) {
        MuscleState s;
        s.current = current;
        s.cable_len = s.cable_len_desired = 0.35;
        s.cable_vel = s.cable_vel_desired = 0.0;
        s.spring_len = p.spring_rest_len;
        CHECK(muscle::tendon_force(p, s) == p.current_gain * current + 1.0);
    }
}

TEST_CASE("a slack cable transmits no force") {
    // Large negative length error (actual much longer than desired) drives the
    // raw expression negative; tension clamps at zero.
    MuscleParams p = reference_params();
    MuscleState s;
    s.current = 0.0;
    s.cable_len = 0.80;
    s.cable_len_desired = 0.30;
    s.cable_vel = 5.0;
    s.cable_vel_desired = 0.0;
    s.spring_len = 0.001;  // compressed spring pulls the expression down too
    CHECK(muscle::tendon_force(p, s) == 0.0);
}

TEST_CASE("force increases monotonically with current and with length error") {
    MuscleParams p = reference_params();
    MuscleState s;
    s.cable_len = 0.30;
    s.cable_len_desired = 0.32;
    s.spring_len = p.spring_rest_len;

    double prev = -1.0;
    for (double current = 0.0; current <= 2.0; current += 0.1) {
        s.current = current;
        double f = muscle::tendon_force(p, s);
        CHECK(f > prev);
        prev = f;
    }

    s.current = 0.5;
    prev = -1.0;
    for (double desired = 0.30; desired <= 0.50; desired += 0.01) {
        s.cable_len_desired = desired;
        double f = muscle::tendon_force(p, s);
        CHECK(f > prev);
        prev = f;
    }
}

TEST_CASE("saturated exponential raises a numeric error") {
    MuscleParams p = reference_params();
    p.kp = 10000.0;
    MuscleState s;
    s.current = 0.1;
    s.cable_len = 0.30;
    s.cable_len_desired = 0.40;  // exponent 10000 * 0.1 = 1000 > limit
    s.spring_len = p.spring_rest_len;
    CHECK_THROWS_AS(muscle::tendon_force(p, s), NumericError);

    // Large negative exponents saturate too (the term is just 0 physically,
    // but an exponent this size signals a configuration error).
    s.cable_len = 0.40;
    s.cable_len_desired = 0.30;
    CHECK_THROWS_AS(muscle::tendon_force(p, s), NumericError);
}

TEST_CASE("state validation rejects unphysical inputs") {
    MuscleParams p = reference_params();
    MuscleState good;
    good.current = 0.1;
    good.cable_len = good.cable_len_desired = 0.3;
    good.spring_len = p.spring_rest_len;
    CHECK_NOTHROW(muscle::tendon_force(p, good));

    MuscleState s = good;
    s.current = -0.1;
    CHECK_THROWS_AS(muscle::tendon_force(p, s), ValidationError);

    s = good;
    s.cable_len = 0.0;
    CHECK_THROWS_AS(muscle::tendon_force(p, s), ValidationError);

    s = good;
    s.cable_len_desired = -0.2;
    CHECK_THROWS_AS(muscle::tendon_force(p, s), ValidationError);

    s = good;
    s.spring_len = 0.0;
    CHECK_THROWS_AS(muscle::tendon_force(p, s), ValidationError);

    s = good;
    s.cable_vel = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(muscle::tendon_force(p, s), ValidationError);
}

TEST_CASE("parameter validation") {
    MuscleParams p = reference_params();
    CHECK_NOTHROW(p.validate());

    p = reference_params();
    p.current_gain = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);

    p = reference_params();
    p.kp = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);

    p = reference_params();
    p.kd1 = -1.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);

    p = reference_params();
    p.spring_rest_len = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("passive force reflects only the spring stretch") {
    MuscleParams p = reference_params();
    // stretch 0.01 m: 0 (current) + e^0 + 0 (rates) + 50*0.01 = 1.5
    CHECK(std::abs(muscle::passive_force(p, 0.01) - 1.5) < 1e-12);
    CHECK(std::abs(muscle::passive_force(p, 0.0) - 1.0) < 1e-12);

    // A stiff spring compressed within its travel can slacken the cable:
    // 1 + 200 * (-0.01) < 0 clamps to zero.
    MuscleParams stiff = reference_params();
    stiff.ks = 200.0;
    CHECK(muscle::passive_force(stiff, -0.01) == 0.0);

    // A compression that would push the spring length to zero or below is a
    // modeling error, not a force.
    CHECK_THROWS_AS(muscle::passive_force(p, -0.02), ValidationError);
}

#include "fingersim/muscle.hpp"

#include <cmath>

#include <fmt/format.h>

namespace fingersim::muscle {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw ValidationError(fmt::format("muscle: {} must be finite, got {}", name, v));
    }
}

}  // namespace

void MuscleParams::validate() const {
    require_finite(current_gain, "current_gain");
    require_finite(kp, "kp");
    require_finite(kd1, "kd1");
    require_finite(kd2, "kd2");
    require_finite(ks, "ks");
    require_finite(spring_rest_len, "spring_rest_len");
    if (current_gain <= 0.0) {
        throw ValidationError(fmt::format("muscle: current_gain must be > 0, got {}", current_gain));
    }
    if (kp <= 0.0) {
        throw ValidationError(fmt::format("muscle: kp must be > 0, got {}", kp));
    }
    if (kd1 < 0.0 || kd2 < 0.0 || ks < 0.0) {
        throw ValidationError(fmt::format(
            "muscle: rate/spring gains must be >= 0, got kd1={} kd2={} ks={}", kd1, kd2, ks));
    }
    if (spring_rest_len <= 0.0) {
        throw ValidationError(fmt::format(
            "muscle: spring_rest_len must be > 0, got {}", spring_rest_len));
    }
}

double tendon_force(const MuscleParams& p, const MuscleState& s) {
    require_finite(s.current, "state.current");
    require_finite(s.cable_len, "state.cable_len");
    require_finite(s.cable_len_desired, "state.cable_len_desired");
    require_finite(s.cable_vel, "state.cable_vel");
    require_finite(s.cable_vel_desired, "state.cable_vel_desired");
    require_finite(s.spring_len, "state.spring_len");
    if (s.current < 0.0) {
        throw ValidationError(fmt::format("muscle: drive current must be >= 0, got {}", s.current));
    }
    if (s.cable_len <= 0.0 || s.cable_len_desired <= 0.0 || s.spring_len <= 0.0) {
        throw ValidationError(fmt::format(
            "muscle: lengths must be > 0, got cable_len={} cable_len_desired={} spring_len={}",
            s.cable_len, s.cable_len_desired, s.spring_len));
    }

    double exponent = p.kp * (s.cable_len_desired - s.cable_len);
    if (std::abs(exponent) > kForceLawExpLimit) {
        throw NumericError(fmt::format(
            "muscle force law saturated: length-error exponent {} exceeds {} "
            "(kp={}, length error={} m)",
            exponent, kForceLawExpLimit, p.kp, s.cable_len_desired - s.cable_len));
    }

    double active = p.current_gain * s.current;
    double length_term = std::exp(exponent);
    double rate_term = (p.kd1 * s.current + p.kd2) * (s.cable_vel_desired - s.cable_vel);
    double spring_term = p.ks * (s.spring_len - p.spring_rest_len);

    double force = active + length_term + rate_term + spring_term;
    // A slack cable cannot transmit compression.
    return force < 0.0 ? 0.0 : force;
}

double passive_force(const MuscleParams& p, double stretch) {
    require_finite(stretch, "stretch");
    MuscleState s;
    s.current = 0.0;
    s.cable_len = 1.0;
    s.cable_len_desired = 1.0;
    s.cable_vel = 0.0;
    s.cable_vel_desired = 0.0;
    s.spring_len = p.spring_rest_len + stretch;
    return tendon_force(p, s);
}

}  // namespace fingersim::muscle

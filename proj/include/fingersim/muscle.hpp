#pragma once

#include "fingersim/errors.hpp"

namespace fingersim::muscle {

// Coefficients of the actuator force law for one twisted-coil artificial
// muscle driving one tendon.  The model produces the cable tension from the
// drive current, the tracking error between desired and actual cable length
// (and its rate), and the stretch of the series elastic element.
struct MuscleParams {
    double current_gain = 1.0;   // tension per ampere from active contraction [N/A], > 0
    double kp = 0.0;             // exponential length-error gain [1/m], > 0
    double kd1 = 0.0;            // current-dependent rate gain [N s/(A m)], >= 0
    double kd2 = 0.0;            // constant rate gain [N s/m], >= 0
    double ks = 0.0;             // series-spring stiffness [N/m], >= 0
    double spring_rest_len = 0.0;  // series-spring rest (muscle-side) length [m], > 0

    void validate() const;
};

// Instantaneous actuator state.  Desired quantities come from the reference
// trajectory; actual quantities from the plant.
struct MuscleState {
    double current = 0.0;            // drive current [A], >= 0
    double cable_len = 0.0;          // actual cable length [m], > 0
    double cable_len_desired = 0.0;  // reference cable length [m], > 0
    double cable_vel = 0.0;          // actual cable length rate [m/s]
    double cable_vel_desired = 0.0;  // reference cable length rate [m/s]
    double spring_len = 0.0;         // series-spring current length [m], > 0
};

// Exponent magnitude beyond which the length-error term is reported as
// saturated instead of evaluated (exp would overflow / lose meaning).
inline constexpr double kForceLawExpLimit = 700.0;

// Cable tension [N] produced by the actuator:
//
//   tension = gain * current
//           + exp(kp * (desired_len - actual_len))
//           + (kd1 * current + kd2) * (desired_rate - actual_rate)
//           + ks * (spring_len - spring_rest_len)
//
// The result is clamped at zero: a slack cable transmits no force.  Throws
// ValidationError on invalid state and NumericError when the exponential
// saturates (|kp * length error| > kForceLawExpLimit).
double tendon_force(const MuscleParams& p, const MuscleState& s);

// Passive tension when the drive current is zero, tracking error is zero, and
// the series spring is stretched by `stretch` meters beyond rest.
double passive_force(const MuscleParams& p, double stretch);

}  // namespace fingersim::muscle

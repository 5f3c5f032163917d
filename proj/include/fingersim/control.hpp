#pragma once

#include <cstdint>

#include "fingersim/errors.hpp"

namespace fingersim::control {

// Second-order admittance filter on the deviation from the planned joint
// trajectory: the estimated external torque drives a virtual mass-damper-
// spring whose displacement is added to the reference, so contact makes the
// finger yield instead of fighting.
struct AdmittanceParams {
    double virtual_inertia = 0.0;   // [kg m^2], > 0
    double virtual_damping = 0.0;   // [Nm s/rad], >= 0
    double virtual_stiffness = 0.0; // [Nm/rad], > 0
    double load_torque_offset = 0.0;  // expected load torque subtracted from the input [Nm]

    void validate() const;
};

// Deviation magnitude beyond which the filter reports divergence instead of
// integrating further (an exploding virtual state is a configuration error,
// not a usable command).
inline constexpr double kAdmittanceDivergenceLimit = 1e3;

class AdmittanceFilter {
public:
    explicit AdmittanceFilter(const AdmittanceParams& p);

    // Advances the virtual dynamics by dt with the latest external-torque
    // estimate and returns the updated deviation.  Explicit Euler with the
    // velocity refreshed first and the position advanced with the
    // previous-step velocity:
    //
    //   accel    = (tau_ext - offset - damping * vel - stiffness * dev) / inertia
    //   vel'     = vel + accel * dt
    //   dev'     = dev + vel * dt        (old velocity)
    //
    // Throws NumericError when the state leaves the divergence band or stops
    // being finite, reporting the step count.
    double step(double tau_ext, double dt);

    double deviation() const { return dev_; }
    double deviation_rate() const { return vel_; }
    std::uint64_t steps() const { return steps_; }
    void reset();

private:
    AdmittanceParams p_;
    double dev_ = 0.0;
    double vel_ = 0.0;
    std::uint64_t steps_ = 0;
};

struct PidParams {
    double kp = 0.0;              // > 0
    double ki = 0.0;              // >= 0
    double kd = 0.0;              // >= 0
    double integral_limit = 0.0;  // clamp on the integral term magnitude, > 0 when ki > 0

    void validate() const;
};

// Position PID on joint angle; the output is a motor-current command.  The
// integral accumulator is clamped so that a long saturation cannot wind up.
// The derivative acts on the error signal; on the first step after reset the
// derivative term is zero.
class PidController {
public:
    explicit PidController(const PidParams& p);

    double step(double target, double measured, double dt);
    void reset();
    double integral_term() const;

private:
    PidParams p_;
    double integral_ = 0.0;   // clamped integral term (ki already applied)
    double prev_error_ = 0.0;
    bool has_prev_ = false;
};

// Latching contact stop: once the estimated external torque magnitude crosses
// the threshold, the reference is frozen at the pose where contact was
// detected; it unlatches only after the estimate falls below the threshold by
// the hysteresis fraction.
struct ContactStopParams {
    double torque_threshold = 0.05;  // [Nm], > 0
    double hysteresis = 0.10;        // release below threshold*(1-hysteresis), in [0, 1)
    double release_dwell = 0.25;     // [s] the estimate must stay below the release
                                     // level this long before the latch opens; 0
                                     // releases on the first sub-level sample

    void validate() const;
};

class ContactStop {
public:
    explicit ContactStop(const ContactStopParams& p);

    // Returns the reference to track: `reference` while unlatched, the frozen
    // pose while latched.  `dt` is the time since the previous call; the latch
    // opens only after the estimate has stayed below the release level for
    // release_dwell seconds, so a noisy estimate cannot chatter the reference
    // between the frozen pose and a press target that sits beyond the surface.
    double filter(double tau_ext_estimate, double reference, double current_pose, double dt);
    bool latched() const { return latched_; }
    void reset();

private:
    ContactStopParams p_;
    bool latched_ = false;
    double frozen_reference_ = 0.0;
    double below_time_ = 0.0;
};

}  // namespace fingersim::control

#include "fingersim/control.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace fingersim::control {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw ValidationError(fmt::format("control: {} must be finite, got {}", name, v));
    }
}

}  // namespace

void AdmittanceParams::validate() const {
    require_finite(virtual_inertia, "virtual_inertia");
    require_finite(virtual_damping, "virtual_damping");
    require_finite(virtual_stiffness, "virtual_stiffness");
    require_finite(load_torque_offset, "load_torque_offset");
    if (virtual_inertia <= 0.0) {
        throw ValidationError(fmt::format(
            "admittance: virtual_inertia must be > 0, got {}", virtual_inertia));
    }
    if (virtual_damping < 0.0) {
        throw ValidationError(fmt::format(
            "admittance: virtual_damping must be >= 0, got {}", virtual_damping));
    }
    if (virtual_stiffness <= 0.0) {
        throw ValidationError(fmt::format(
            "admittance: virtual_stiffness must be > 0 (the deviation must return to zero "
            "when contact ends), got {}",
            virtual_stiffness));
    }
}

AdmittanceFilter::AdmittanceFilter(const AdmittanceParams& p) : p_(p) { p_.validate(); }

double AdmittanceFilter::step(double tau_ext, double dt) {
    require_finite(tau_ext, "tau_ext");
    if (!(std::isfinite(dt) && dt > 0.0)) {
        throw ValidationError(fmt::format("admittance: dt must be > 0, got {}", dt));
    }
    double accel = (tau_ext - p_.load_torque_offset - p_.virtual_damping * vel_ -
                    p_.virtual_stiffness * dev_) /
                   p_.virtual_inertia;
    double old_vel = vel_;
    vel_ += accel * dt;
    dev_ += old_vel * dt;
    ++steps_;
    if (!std::isfinite(dev_) || !std::isfinite(vel_) ||
        std::abs(dev_) > kAdmittanceDivergenceLimit) {
        throw NumericError(fmt::format(
            "admittance filter diverged at step {}: deviation={}, rate={} "
            "(check virtual parameters against the loop period)",
            steps_, dev_, vel_));
    }
    return dev_;
}

void AdmittanceFilter::reset() {
    dev_ = 0.0;
    vel_ = 0.0;
    steps_ = 0;
}

void PidParams::validate() const {
    require_finite(kp, "kp");
    require_finite(ki, "ki");
    require_finite(kd, "kd");
    require_finite(integral_limit, "integral_limit");
    if (kp <= 0.0) {
        throw ValidationError(fmt::format("pid: kp must be > 0, got {}", kp));
    }
    if (ki < 0.0 || kd < 0.0) {
        throw ValidationError(fmt::format("pid: ki and kd must be >= 0, got ki={} kd={}", ki, kd));
    }
    if (ki > 0.0 && integral_limit <= 0.0) {
        throw ValidationError(fmt::format(
            "pid: integral_limit must be > 0 when ki > 0, got {}", integral_limit));
    }
}

PidController::PidController(const PidParams& p) : p_(p) { p_.validate(); }

double PidController::step(double target, double measured, double dt) {
    require_finite(target, "target");
    require_finite(measured, "measured");
    if (!(std::isfinite(dt) && dt > 0.0)) {
        throw ValidationError(fmt::format("pid: dt must be > 0, got {}", dt));
    }
    double error = target - measured;
    integral_ += p_.ki * error * dt;
    integral_ = std::clamp(integral_, -p_.integral_limit, p_.integral_limit);
    double derivative = has_prev_ ? (error - prev_error_) / dt : 0.0;
    prev_error_ = error;
    has_prev_ = true;
    return p_.kp * error + integral_ + p_.kd * derivative;
}

void PidController::reset() {
    integral_ = 0.0;
    prev_error_ = 0.0;
    has_prev_ = false;
}

double PidController::integral_term() const { return integral_; }

void ContactStopParams::validate() const {
    require_finite(torque_threshold, "torque_threshold");
    require_finite(hysteresis, "hysteresis");
    if (torque_threshold <= 0.0) {
        throw ValidationError(fmt::format(
            "contact stop: torque_threshold must be > 0, got {}", torque_threshold));
    }
    if (hysteresis < 0.0 || hysteresis >= 1.0) {
        throw ValidationError(fmt::format(
            "contact stop: hysteresis must be in [0, 1), got {}", hysteresis));
    }
    if (!(std::isfinite(release_dwell) && release_dwell >= 0.0)) {
        throw ValidationError(fmt::format(
            "contact stop: release_dwell must be finite and >= 0, got {}", release_dwell));
    }
}

ContactStop::ContactStop(const ContactStopParams& p) : p_(p) { p_.validate(); }

double ContactStop::filter(double tau_ext_estimate, double reference, double current_pose,
                           double dt) {
    require_finite(tau_ext_estimate, "tau_ext_estimate");
    require_finite(reference, "reference");
    require_finite(current_pose, "current_pose");
    if (!(std::isfinite(dt) && dt >= 0.0)) {
        throw ValidationError(fmt::format("contact stop: dt must be finite and >= 0, got {}", dt));
    }
    double mag = std::abs(tau_ext_estimate);
    if (!latched_) {
        if (mag > p_.torque_threshold) {
            latched_ = true;
            frozen_reference_ = current_pose;
            below_time_ = 0.0;
        }
    } else {
        if (mag < p_.torque_threshold * (1.0 - p_.hysteresis)) {
            below_time_ += dt;
            if (below_time_ >= p_.release_dwell) {
                latched_ = false;
                below_time_ = 0.0;
            }
        } else {
            below_time_ = 0.0;
        }
    }
    return latched_ ? frozen_reference_ : reference;
}

void ContactStop::reset() {
    latched_ = false;
    frozen_reference_ = 0.0;
    below_time_ = 0.0;
}

}  // namespace fingersim::control

#include "fingersim/plant.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace fingersim::plant {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw ValidationError(fmt::format("plant: {} must be finite, got {}", name, v));
    }
}

void require_positive(double v, const char* name) {
    require_finite(v, name);
    if (v <= 0.0) {
        throw ValidationError(fmt::format("plant: {} must be > 0, got {}", name, v));
    }
}

void require_non_negative(double v, const char* name) {
    require_finite(v, name);
    if (v < 0.0) {
        throw ValidationError(fmt::format("plant: {} must be >= 0, got {}", name, v));
    }
}

// Viscous coefficient at the given temperature, floored at zero (a large
// negative temperature coefficient must not turn friction into a power
// source).
double viscous_at(const PlantParams& pp, double temperature) {
    double b = pp.viscous_friction * (1.0 + pp.temp_viscous_coeff * (temperature - 20.0));
    return std::max(b, 0.0);
}

double effective_inertia(const PlantParams& pp) {
    return pp.link_inertia + pp.weight_mass * pp.weight_arm * pp.weight_arm;
}

}  // namespace

void PlantParams::validate() const {
    require_positive(link_inertia, "link_inertia");
    require_non_negative(viscous_friction, "viscous_friction");
    require_non_negative(coulomb_friction, "coulomb_friction");
    require_positive(coulomb_smoothing_vel, "coulomb_smoothing_vel");
    require_finite(temp_viscous_coeff, "temp_viscous_coeff");
    require_non_negative(weight_mass, "weight_mass");
    require_positive(weight_arm, "weight_arm");
    require_positive(gravity, "gravity");
    require_non_negative(return_spring_stiffness, "return_spring_stiffness");
    require_positive(fingertip_lever, "fingertip_lever");
    if (fingertip_lever < 1e-4) {
        throw ValidationError(fmt::format(
            "plant: fingertip_lever {} m is too small to convert torque to fingertip force",
            fingertip_lever));
    }
    require_positive(tension_limit, "tension_limit");
    require_positive(gear_ratio, "gear_ratio");
    require_positive(capstan_radius, "capstan_radius");
    require_finite(stop_lo, "stop_lo");
    require_finite(stop_hi, "stop_hi");
    if (stop_hi <= stop_lo) {
        throw ValidationError(fmt::format(
            "plant: stop_hi ({}) must be > stop_lo ({})", stop_hi, stop_lo));
    }
}

void ContactObject::validate() const {
    require_non_negative(stiffness, "contact stiffness");
    require_non_negative(damping, "contact damping");
    require_finite(engage_angle, "engage_angle");
}

double contact_torque(const PlantParams& pp, const ContactObject& obj, double joint_pos,
                      double joint_vel) {
    if (obj.stiffness == 0.0) return 0.0;  // placeholder object: no contact
    double pen = (joint_pos - obj.engage_angle) * pp.fingertip_lever;
    if (pen <= 0.0) return 0.0;
    double pen_rate = joint_vel * pp.fingertip_lever;
    // The damping term fades in over the first kContactDampingRamp of
    // penetration so the total force is continuous at engagement.
    double ramp = std::min(pen / kContactDampingRamp, 1.0);
    double force = obj.stiffness * pen + obj.damping * pen_rate * ramp;
    if (force < 0.0) force = 0.0;  // the object can push, never pull
    return force * pp.fingertip_lever;
}

double ground_truth_torque(const PlantParams& pp, const PlantState& s,
                           const std::optional<ContactObject>& obj) {
    double tau = pp.weight_mass * pp.gravity * pp.weight_arm * std::cos(s.joint_pos);
    if (obj.has_value()) {
        tau += contact_torque(pp, *obj, s.joint_pos, s.joint_vel);
    }
    return tau;
}

PlantState plant_step(const PlantParams& pp, const geometry::TendonRouting& routing,
                      const muscle::MuscleParams& mp, const muscle::MuscleState& ms,
                      const std::optional<ContactObject>& obj, const PlantState& s,
                      double dt, double disturbance_torque) {
    if (!(std::isfinite(dt) && dt > 0.0)) {
        throw ValidationError(fmt::format("plant: dt must be > 0, got {}", dt));
    }

    double arm = geometry::moment_arm(routing, s.joint_pos).moment_arm;
    double tension = std::min(muscle::tendon_force(mp, ms), pp.tension_limit);

    double tau = tension * arm;
    tau -= pp.weight_mass * pp.gravity * pp.weight_arm * std::cos(s.joint_pos);
    tau -= viscous_at(pp, s.temperature) * s.joint_vel;
    tau -= pp.coulomb_friction * std::tanh(s.joint_vel / pp.coulomb_smoothing_vel);
    tau -= pp.return_spring_stiffness * s.joint_pos;
    if (obj.has_value()) {
        tau -= contact_torque(pp, *obj, s.joint_pos, s.joint_vel);
    }
    tau += disturbance_torque;

    double accel = tau / effective_inertia(pp);

    PlantState out = s;
    out.joint_vel = s.joint_vel + accel * dt;
    out.joint_pos = s.joint_pos + out.joint_vel * dt;

    if (out.joint_pos > pp.stop_hi) {
        out.joint_pos = pp.stop_hi;
        if (out.joint_vel > 0.0) out.joint_vel = 0.0;
    } else if (out.joint_pos < pp.stop_lo) {
        out.joint_pos = pp.stop_lo;
        if (out.joint_vel < 0.0) out.joint_vel = 0.0;
    }

    if (!std::isfinite(out.joint_pos) || !std::isfinite(out.joint_vel)) {
        throw NumericError(fmt::format(
            "plant state diverged: joint_pos={}, joint_vel={}", out.joint_pos, out.joint_vel));
    }

    // The motor shaft is slaved to cable take-up through the capstan;
    // trapezoidal integration over this step's joint motion.
    double arm_new = geometry::moment_arm(routing, out.joint_pos).moment_arm;
    double takeup_delta = 0.5 * (arm + arm_new) * (out.joint_pos - s.joint_pos);
    double shaft_per_takeup = pp.gear_ratio / pp.capstan_radius;
    out.motor_pos = s.motor_pos + takeup_delta * shaft_per_takeup;
    out.motor_vel = arm_new * out.joint_vel * shaft_per_takeup;

    if (!std::isfinite(out.motor_pos)) {
        throw NumericError(fmt::format(
            "plant state diverged: motor_pos={} (joint_pos={}, joint_vel={})",
            out.motor_pos, out.joint_pos, out.joint_vel));
    }
    return out;
}

double pendulum_energy(const PlantParams& pp, const PlantState& s) {
    double kinetic = 0.5 * effective_inertia(pp) * s.joint_vel * s.joint_vel;
    double potential = pp.weight_mass * pp.gravity * pp.weight_arm * std::sin(s.joint_pos);
    return kinetic + potential;
}

}  // namespace fingersim::plant

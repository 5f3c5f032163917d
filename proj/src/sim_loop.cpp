#include "fingersim/sim_loop.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fingersim/bands.hpp"

namespace fingersim::plant {

void SimTimings::validate() const {
    if (!(std::isfinite(control_rate) && control_rate > 0.0)) {
        throw ValidationError(fmt::format("timings: control_rate must be > 0, got {}", control_rate));
    }
    if (!(std::isfinite(plant_rate) && plant_rate > 0.0)) {
        throw ValidationError(fmt::format("timings: plant_rate must be > 0, got {}", plant_rate));
    }
    double ratio = plant_rate / control_rate;
    double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
        throw ValidationError(fmt::format(
            "timings: plant_rate ({}) must be a positive integer multiple of control_rate ({})",
            plant_rate, control_rate));
    }
}

void FingerSim::Config::validate() const {
    plant.validate();
    routing.validate();
    muscle.validate();
    if (object.has_value()) object->validate();
    if (!(std::isfinite(base_cable_len) && base_cable_len > 0.0)) {
        throw ValidationError(fmt::format(
            "sim: base_cable_len must be > 0, got {}", base_cable_len));
    }
    if (!std::isfinite(spring_stretch_per_takeup) || spring_stretch_per_takeup < 0.0) {
        throw ValidationError(fmt::format(
            "sim: spring_stretch_per_takeup must be >= 0, got {}", spring_stretch_per_takeup));
    }
    if (!std::isfinite(initial_joint_pos) || initial_joint_pos < plant.stop_lo ||
        initial_joint_pos > plant.stop_hi) {
        throw ValidationError(fmt::format(
            "sim: initial_joint_pos {} outside the stops [{}, {}]", initial_joint_pos,
            plant.stop_lo, plant.stop_hi));
    }
    if (!std::isfinite(temperature) || temperature < kTemperatureSaneLo ||
        temperature > kTemperatureSaneHi) {
        throw ValidationError(fmt::format(
            "sim: temperature {} outside the sanity band [{}, {}]", temperature,
            kTemperatureSaneLo, kTemperatureSaneHi));
    }
}

FingerSim::FingerSim(const Config& cfg) : cfg_(cfg) {
    cfg_.validate();
    state_.joint_pos = cfg_.initial_joint_pos;
    state_.joint_vel = 0.0;
    state_.motor_pos = 0.0;
    state_.motor_vel = 0.0;
    state_.temperature = cfg_.temperature;
    q_ref_prev_ = cfg_.initial_joint_pos;
    takeup_ref_ = cfg_.base_cable_len;
}

FingerSim::StepTelemetry FingerSim::advance(double current_cmd, double q_ref, double q_ref_vel,
                                            const SimTimings& timings,
                                            double disturbance_torque) {
    timings.validate();
    if (!std::isfinite(current_cmd)) {
        throw ValidationError(fmt::format("sim: current command must be finite, got {}", current_cmd));
    }
    // Motor drivers cannot source negative current into this actuator.
    if (current_cmd < 0.0) current_cmd = 0.0;

    // Advance the reference take-up along the commanded joint path
    // (trapezoidal, mirroring the plant's own take-up bookkeeping).
    double arm_ref_prev = geometry::moment_arm(cfg_.routing, q_ref_prev_).moment_arm;
    double arm_ref = geometry::moment_arm(cfg_.routing, q_ref).moment_arm;
    takeup_ref_ += 0.5 * (arm_ref_prev + arm_ref) * (q_ref - q_ref_prev_);
    q_ref_prev_ = q_ref;

    const double dt = timings.plant_dt();
    const int n = timings.substeps();
    const double shaft_per_takeup = cfg_.plant.gear_ratio / cfg_.plant.capstan_radius;

    muscle::MuscleState ms;
    double tension = 0.0;
    double arm = 0.0;
    for (int i = 0; i < n; ++i) {
        arm = geometry::moment_arm(cfg_.routing, state_.joint_pos).moment_arm;
        double takeup = cfg_.base_cable_len + state_.motor_pos / shaft_per_takeup;

        ms.current = current_cmd;
        ms.cable_len = takeup;
        ms.cable_len_desired = takeup_ref_;
        ms.cable_vel = arm * state_.joint_vel;
        ms.cable_vel_desired = arm_ref * q_ref_vel;
        ms.spring_len = cfg_.muscle.spring_rest_len +
                        cfg_.spring_stretch_per_takeup * (takeup - cfg_.base_cable_len);

        tension = std::min(muscle::tendon_force(cfg_.muscle, ms), cfg_.plant.tension_limit);
        try {
            state_ = plant_step(cfg_.plant, cfg_.routing, cfg_.muscle, ms, cfg_.object, state_,
                                dt, disturbance_torque);
        } catch (const NumericError& e) {
            throw NumericError(fmt::format("{} (plant step {})", e.what(), plant_steps_ + 1));
        }
        ++plant_steps_;
    }

    StepTelemetry t;
    t.state = state_;
    t.tendon_force = tension;
    t.moment_arm = arm;
    t.applied_torque = tension * arm;
    t.true_external_torque = ground_truth_torque(cfg_.plant, state_, cfg_.object);
    t.cable_takeup = cfg_.base_cable_len + state_.motor_pos / shaft_per_takeup;
    t.cable_takeup_ref = takeup_ref_;
    return t;
}

}  // namespace fingersim::plant

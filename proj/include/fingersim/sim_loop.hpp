#pragma once

#include <cstdint>
#include <optional>

#include "fingersim/geometry.hpp"
#include "fingersim/muscle.hpp"
#include "fingersim/plant.hpp"

namespace fingersim::plant {

// Loop rates: the controller runs at control_rate with zero-order hold; the
// plant integrates at plant_rate in between.
struct SimTimings {
    double control_rate = 100.0;  // [Hz], > 0
    double plant_rate = 1000.0;   // [Hz], positive integer multiple of control_rate

    void validate() const;
    int substeps() const { return static_cast<int>(plant_rate / control_rate + 0.5); }
    double control_dt() const { return 1.0 / control_rate; }
    double plant_dt() const { return 1.0 / plant_rate; }
};

// Closed simulation of one finger joint: plant integration plus the cable
// bookkeeping that connects the joint back to the actuator force law.
//
// Cable take-up is the length of cable the actuator has reeled in, measured
// from a fixed positive base offset; it advances with the moment arm
// (trapezoidal integration over joint motion), and the motor shaft angle is
// take-up divided by the capstan radius times the gear ratio.  The reference
// take-up follows the commanded joint trajectory through the same geometry,
// so the force law's length error is the geometric tracking error.
class FingerSim {
public:
    struct Config {
        PlantParams plant;
        geometry::TendonRouting routing;
        muscle::MuscleParams muscle;
        std::optional<ContactObject> object;
        double base_cable_len = 0.05;  // take-up bookkeeping offset [m], > 0
        double spring_stretch_per_takeup = 0.0;  // series-spring stretch per meter of take-up
        double initial_joint_pos = 0.0;
        double temperature = 20.0;     // held for the whole run [deg C]

        void validate() const;
    };

    struct StepTelemetry {
        PlantState state;                  // at the end of the control period
        double tendon_force = 0.0;         // [N], after the tension limit
        double moment_arm = 0.0;           // [m]
        double applied_torque = 0.0;       // tendon_force * moment_arm [Nm]
        double true_external_torque = 0.0; // ideal-sensor label at the new state [Nm]
        double cable_takeup = 0.0;         // actual take-up incl. base [m]
        double cable_takeup_ref = 0.0;     // reference take-up incl. base [m]
    };

    explicit FingerSim(const Config& cfg);

    // Advances one control period: holds `current_cmd` and the reference
    // (q_ref, q_ref_vel) for timings.substeps() plant steps.  The optional
    // disturbance torque models unmodeled interaction and is *not* part of
    // the ground-truth label.  Throws NumericError (with the step count) if
    // the plant state diverges.
    StepTelemetry advance(double current_cmd, double q_ref, double q_ref_vel,
                          const SimTimings& timings, double disturbance_torque = 0.0);

    const PlantState& state() const { return state_; }
    std::uint64_t plant_steps() const { return plant_steps_; }

private:
    Config cfg_;
    PlantState state_;
    double q_ref_prev_ = 0.0;
    double takeup_ref_ = 0.0;  // incl. base
    std::uint64_t plant_steps_ = 0;
};

}  // namespace fingersim::plant

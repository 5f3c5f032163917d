#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fingersim/control.hpp"
#include "fingersim/errors.hpp"
#include "fingersim/exec.hpp"
#include "fingersim/gpr.hpp"
#include "fingersim/sim_loop.hpp"

namespace fingersim::datagen {

// Calibration sweep: for every (repetition, hanging load, temperature) cell
// the joint tracks a slow ramp-and-hold trajectory while samples are logged
// at the control rate.  Cells are enumerated in canonical order (repetition,
// then load, then temperature) and each cell owns an independent random
// substream, so the output is byte-identical for a given seed regardless of
// how cells are scheduled.
struct CalibrationProtocol {
    double load_min = 0.05;   // [kg]
    double load_max = 1.0;    // [kg]
    double load_step = 0.05;  // [kg], > 0
    std::vector<double> temperatures = {20.0, 30.0, 40.0, 50.0};  // [deg C]
    double duration_per_cell = 30.0;  // [s]
    int repetitions = 1;
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<double> loads() const;
    std::size_t cell_count() const;
    // Samples each cell contributes at the given control rate.
    std::size_t rows_per_cell(const plant::SimTimings& t) const;
};

// Sensor/process noise injected into the logged features and into the plant.
// The disturbance term is an Ornstein-Uhlenbeck torque acting on the joint
// that the feature set does not observe; it models unmodeled interaction
// (cable snags, housing rubs) and bounds how well any estimator can do.
struct NoiseModel {
    double current_noise_std = 0.01;      // [A]
    double encoder_noise_std = 0.0017;    // [rad] on both joint and motor angle
    double velocity_noise_factor = 20.0;  // velocity noise = encoder std * factor [1/s]
    double temperature_noise_std = 0.05;  // [deg C]
    double torque_label_noise_std = 0.001;  // [Nm] on the logged target
    double disturbance_torque_std = 0.015;  // [Nm] OU stationary std
    double disturbance_corr_time = 1.0;     // [s] OU correlation time, > 0

    void validate() const;
};

// Joint trajectory and tracking controller used while collecting data.  The
// position loop is deliberately soft (the integral term carries the gravity
// load) because the encoder is noisy; rate feedback comes from the measured
// joint velocity via vel_damping rather than from differentiating position.
struct CollectionMotion {
    double q_low = 0.15;       // [rad]
    double q_high = 1.05;      // [rad], > q_low
    double hold_time = 0.5;    // [s] dwell at each end
    double settle_time = 1.5;  // [s] unlogged dwell at the start angle before
                               // recording, so the loop is at equilibrium when
                               // the first row lands
    control::PidParams pid{3.0, 10.0, 0.0, 2.0};
    double vel_damping = 0.25;  // [A s/rad] on measured joint velocity, >= 0

    void validate() const;
};

// Everything that defines the simulated rig for data collection.
struct RigConfig {
    plant::PlantParams plant;
    geometry::TendonRouting routing;
    muscle::MuscleParams muscle;
    plant::SimTimings timings;
    CollectionMotion motion;
    double base_cable_len = 0.05;

    void validate() const;
};

// Runs the calibration protocol and returns all rows in canonical cell order.
// Serial and Parallel schedules return identical vectors.
std::vector<gpr::SampleRecord> run_calibration(const CalibrationProtocol& proto,
                                               const RigConfig& rig, const NoiseModel& noise,
                                               ExecPolicy policy);

// Randomized grasp closes against one object per trial: the reference ramps
// past the engage angle and holds, producing contact-dominated samples.
// Trial t of object o draws from substream (seed, o, t).
std::vector<gpr::SampleRecord> run_grasp_collection(
    const std::vector<plant::ContactObject>& objects, int trials_per_object,
    double trial_duration, const RigConfig& rig, const NoiseModel& noise,
    std::uint64_t seed, ExecPolicy policy);

// CSV with the canonical header (see gpr::kFeatureNames + torque), shortest
// round-trip number formatting, '\n' line endings.
void write_csv(const std::filesystem::path& path, const std::vector<gpr::SampleRecord>& rows);
std::vector<gpr::SampleRecord> read_csv(const std::filesystem::path& path);

}  // namespace fingersim::datagen

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fingersim/control.hpp"
#include "fingersim/datagen.hpp"
#include "fingersim/gpr.hpp"

namespace fingersim::harness {

// One named joint of the rig (the hand has several, each with its own routing
// and friction character).
struct JointConfig {
    std::string name;
    datagen::RigConfig rig;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Torque-estimation experiment: per joint, generate calibration data, split,
// fit, evaluate on held-out rows.

struct EstimationConfig {
    datagen::CalibrationProtocol protocol;
    datagen::NoiseModel noise;
    gpr::FitOptions fit;
    double test_fraction = 0.2;

    // Contact-regime augmentation: when grasp_trials > 0 the corpus also
    // contains randomized grasp closes against these objects.  The
    // calibration sweep alone never sees contact-level currents, so a model
    // destined for the grasp controllers would otherwise extrapolate exactly
    // where it matters most.
    std::vector<plant::ContactObject> grasp_objects;
    int grasp_trials = 0;         // per object, 0 disables augmentation
    double grasp_duration = 4.0;  // [s] per grasp close

    void validate() const;
};

struct EstimationOutcome {
    std::string joint;
    gpr::EvalMetrics metrics;
    std::size_t rows_total = 0;
    std::size_t rows_train = 0;
    std::size_t rows_test = 0;
    double train_lml = 0.0;
    kernels::KernelParams params;
};

// Runs the estimation experiment for every joint: collect, split, fit on the
// training half, report held-out metrics.  When out_dir is set, writes
// per-joint `<name>_samples.csv` (the full corpus) and `<name>_model.json`.
std::vector<EstimationOutcome> run_estimation_experiment(
    const std::vector<JointConfig>& joints, const EstimationConfig& cfg,
    const std::optional<std::filesystem::path>& out_dir, ExecPolicy policy);

// ---------------------------------------------------------------------------
// Controller comparison: grasp each object repeatedly with (a) a stiff PID
// tracker and (b) the same tracker wrapped by the admittance filter and the
// contact stop, fed by the torque estimator.  Both arms of a trial share the
// same reference trajectory and random substream.

struct CompareConfig {
    std::vector<plant::ContactObject> objects;
    int trials_per_object = 30;
    double trial_duration = 6.0;   // [s]
    control::AdmittanceParams admittance{0.01, 0.6, 4.0, 0.0};
    control::ContactStopParams contact_stop{0.05, 0.10};
    double start_pos = 0.1;        // [rad]
    double approach_speed = 0.6;   // [rad/s]
    double speed_jitter = 0.1;     // relative, uniform +-
    double press_depth = 0.25;     // reference overshoot past engage [rad]
    double depth_jitter = 0.05;    // absolute, uniform +- [rad]
    double settle_exclusion = 0.2; // [s] ignored at the start of each trial
    double contact_torque_eps = 1e-3;  // [Nm] truth threshold marking contact
    std::uint64_t seed = 0;
    bool write_all_traces = false;  // default: only trial 0 of each object/arm

    void validate() const;
};

struct TrialMetrics {
    double effort = 0.0;        // integral of |applied torque| dt over the contact phase [Nm s]
    double effort_sq = 0.0;     // integral of applied torque^2 dt [Nm^2 s]
    double mech_work = 0.0;     // integral of |applied torque * joint velocity| dt [J]
    double peak_truth = 0.0;    // max |true external torque| [Nm]
    bool contacted = false;
    bool diverged = false;
};

struct ObjectComparison {
    std::string label;
    double stiffness = 0.0;
    double effort_pid = 0.0;      // mean over valid trials
    double effort_admittance = 0.0;
    double reduction_pct = 0.0;   // 100 * (pid - admittance) / pid
    double mech_work_pid = 0.0;
    double mech_work_admittance = 0.0;
    int trials_valid = 0;
    int trials_flagged = 0;       // diverged or never contacted
};

struct CompareReport {
    std::vector<ObjectComparison> objects;  // in config order
    double mean_reduction_pct = 0.0;
    std::uint64_t seed = 0;
    std::string config_digest;
};

// Torque estimate the comparison controllers consume: the fitted regressor by
// default; the ideal sensor when running without a model (used by unit tests).
CompareReport run_grasp_comparison(const JointConfig& joint, const CompareConfig& cfg,
                                   const datagen::NoiseModel& noise, const gpr::GprModel* model,
                                   const std::optional<std::filesystem::path>& out_dir,
                                   ExecPolicy policy);

// Canonical JSON serialization of the report (sorted keys, shortest
// round-trip numbers, no timestamps): identical runs produce identical bytes.
void write_report(const std::filesystem::path& path, const CompareReport& report);
CompareReport read_report(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Fingertip-force experiment: press against one object and compare the
// estimated fingertip force (estimated torque / fingertip lever) with the
// true contact force.

struct ForceExperimentConfig {
    plant::ContactObject object{"force-target", 800.0, 6.0, 0.6};
    double trial_duration = 4.0;  // [s]
    double press_depth = 0.2;     // [rad]
    double approach_speed = 0.5;  // [rad/s]
    double start_pos = 0.1;       // [rad]
    std::uint64_t seed = 0;
    // Mean absolute force error measured on the physical test stand, kept for
    // side-by-side context in reports (index finger / thumb chains).
    double rig_reference_index_n = 0.192;
    double rig_reference_thumb_n = 0.15;

    void validate() const;
};

struct ForceMetrics {
    double mean_abs_err = 0.0;  // [N]
    double peak_abs_err = 0.0;  // [N]
    double mse = 0.0;           // [N^2]
    std::size_t n_used = 0;
    std::size_t n_excluded = 0;  // pre-contact samples (no force to estimate)
};

ForceMetrics run_force_experiment(const JointConfig& joint, const ForceExperimentConfig& cfg,
                                  const datagen::NoiseModel& noise, const gpr::GprModel* model,
                                  const std::optional<std::filesystem::path>& out_dir);

}  // namespace fingersim::harness

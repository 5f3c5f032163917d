#include "fingersim/datagen.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fingersim/csv_io.hpp"
#include "fingersim/rng.hpp"

namespace fingersim::datagen {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw ValidationError(fmt::format("datagen: {} must be finite, got {}", name, v));
    }
}

// Piecewise ramp-and-hold reference: dwell at q_low for start_hold, ramp up,
// dwell at q_high for top_hold, ramp down, dwell at q_low.  An infinite
// top_hold turns it into a single close-and-press move.
struct RampCycle {
    double q_low = 0.0;
    double q_high = 0.0;
    double start_hold = 0.0;
    double top_hold = 0.0;
    double ramp = 0.0;  // ramp duration [s]

    double speed() const { return (q_high - q_low) / ramp; }

    void eval(double t, double& q_ref, double& v_ref) const {
        if (t < start_hold) {
            q_ref = q_low;
            v_ref = 0.0;
        } else if (t < start_hold + ramp) {
            q_ref = q_low + speed() * (t - start_hold);
            v_ref = speed();
        } else if (t < start_hold + ramp + top_hold) {
            q_ref = q_high;
            v_ref = 0.0;
        } else if (t < start_hold + ramp + top_hold + ramp) {
            double tau = t - (start_hold + ramp + top_hold);
            q_ref = q_high - speed() * tau;
            v_ref = -speed();
        } else {
            q_ref = q_low;
            v_ref = 0.0;
        }
    }
};

// Exponential-decay Ornstein-Uhlenbeck torque updated at the control rate;
// sigma is the stationary standard deviation.
struct OuProcess {
    double decay = 0.0;
    double kick = 0.0;
    double value = 0.0;

    OuProcess(double sigma, double corr_time, double dt) {
        decay = std::exp(-dt / corr_time);
        kick = sigma * std::sqrt(1.0 - decay * decay);
    }

    double step(Rng& rng) {
        value = value * decay + kick * rng.normal();
        return value;
    }
};

// One closed-loop tracking run that logs a sample per control tick.  Shared by
// the calibration cells and the grasp trials; only the reference trajectory,
// contact object, and ambient conditions differ.
std::vector<gpr::SampleRecord> run_tracking_cell(
    const RigConfig& rig, const std::optional<plant::ContactObject>& object, double load_mass,
    double temperature, double initial_pos, const RampCycle& traj, std::size_t ticks,
    const NoiseModel& noise, std::uint64_t stream_seed) {
    plant::FingerSim::Config scfg;
    scfg.plant = rig.plant;
    scfg.plant.weight_mass = load_mass;
    scfg.routing = rig.routing;
    scfg.muscle = rig.muscle;
    scfg.object = object;
    scfg.base_cable_len = rig.base_cable_len;
    scfg.initial_joint_pos = initial_pos;
    scfg.temperature = temperature;

    plant::FingerSim sim(scfg);
    control::PidController pid(rig.motion.pid);
    Rng rng(stream_seed);
    OuProcess ou(noise.disturbance_torque_std, noise.disturbance_corr_time,
                 rig.timings.control_dt());

    std::vector<gpr::SampleRecord> rows;
    rows.reserve(ticks);
    double measured_q = initial_pos;
    double measured_v = 0.0;
    const double dt = rig.timings.control_dt();

    // Unlogged settling dwell: hold the trajectory start point until the
    // integrator carries the static load, so logging begins from equilibrium
    // instead of from the drop transient of an unpowered joint.
    const auto warm_ticks =
        static_cast<std::size_t>(std::llround(rig.motion.settle_time * rig.timings.control_rate));
    for (std::size_t k = 0; k < warm_ticks; ++k) {
        double q_ref = 0.0;
        double v_ref = 0.0;
        traj.eval(0.0, q_ref, v_ref);
        double cmd = pid.step(q_ref, measured_q, dt) - rig.motion.vel_damping * measured_v;
        if (cmd < 0.0) cmd = 0.0;
        double disturbance = ou.step(rng);
        auto tel = sim.advance(cmd, q_ref, v_ref, rig.timings, disturbance);
        measured_q = tel.state.joint_pos + rng.normal(0.0, noise.encoder_noise_std);
        measured_v =
            tel.state.joint_vel + rng.normal(0.0, noise.encoder_noise_std * noise.velocity_noise_factor);
    }

    for (std::size_t k = 0; k < ticks; ++k) {
        double t_end = static_cast<double>(k + 1) * dt;
        double q_ref = 0.0;
        double v_ref = 0.0;
        traj.eval(t_end, q_ref, v_ref);

        double cmd = pid.step(q_ref, measured_q, dt) - rig.motion.vel_damping * measured_v;
        if (cmd < 0.0) cmd = 0.0;
        double disturbance = ou.step(rng);
        auto tel = sim.advance(cmd, q_ref, v_ref, rig.timings, disturbance);

        // Fixed draw order per tick keeps the stream layout stable.
        double n_current = rng.normal(0.0, noise.current_noise_std);
        double n_mpos = rng.normal(0.0, noise.encoder_noise_std);
        double n_mvel = rng.normal(0.0, noise.encoder_noise_std * noise.velocity_noise_factor);
        double n_jpos = rng.normal(0.0, noise.encoder_noise_std);
        double n_jvel = rng.normal(0.0, noise.encoder_noise_std * noise.velocity_noise_factor);
        double n_temp = rng.normal(0.0, noise.temperature_noise_std);
        double n_label = rng.normal(0.0, noise.torque_label_noise_std);

        gpr::SampleRecord rec;
        rec.features = {cmd + n_current,
                        tel.state.motor_pos + n_mpos,
                        tel.state.motor_vel + n_mvel,
                        tel.state.joint_pos + n_jpos,
                        tel.state.joint_vel + n_jvel,
                        tel.state.temperature + n_temp};
        rec.torque = tel.true_external_torque + n_label;
        gpr::validate_record(rec, fmt::format("generated tick {}", k));
        rows.push_back(rec);

        // The controller sees the sensors, not truth.
        measured_q = rec.features[3];
        measured_v = rec.features[4];
    }
    return rows;
}

}  // namespace

void CalibrationProtocol::validate() const {
    require_finite(load_min, "load_min");
    require_finite(load_max, "load_max");
    require_finite(load_step, "load_step");
    if (load_min <= 0.0 || load_max < load_min || load_step <= 0.0) {
        throw ValidationError(fmt::format(
            "protocol: loads must satisfy 0 < load_min <= load_max with load_step > 0, got "
            "min={} max={} step={}",
            load_min, load_max, load_step));
    }
    double span = (load_max - load_min) / load_step;
    if (std::abs(span - std::round(span)) > 1e-6) {
        throw ValidationError(fmt::format(
            "protocol: load_step {} does not evenly divide the range [{}, {}]", load_step,
            load_min, load_max));
    }
    if (temperatures.empty()) {
        throw ValidationError("protocol: at least one temperature is required");
    }
    for (double t : temperatures) {
        if (!std::isfinite(t) || t < kTemperatureSaneLo || t > kTemperatureSaneHi) {
            throw ValidationError(fmt::format(
                "protocol: temperature {} outside the sanity band [{}, {}]", t,
                kTemperatureSaneLo, kTemperatureSaneHi));
        }
    }
    if (!(std::isfinite(duration_per_cell) && duration_per_cell > 0.0)) {
        throw ValidationError(fmt::format(
            "protocol: duration_per_cell must be > 0, got {}", duration_per_cell));
    }
    if (repetitions < 1) {
        throw ValidationError(fmt::format("protocol: repetitions must be >= 1, got {}", repetitions));
    }
}

std::vector<double> CalibrationProtocol::loads() const {
    int n = static_cast<int>(std::round((load_max - load_min) / load_step)) + 1;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.push_back(load_min + static_cast<double>(i) * load_step);
    }
    return out;
}

std::size_t CalibrationProtocol::cell_count() const {
    return static_cast<std::size_t>(repetitions) * loads().size() * temperatures.size();
}

std::size_t CalibrationProtocol::rows_per_cell(const plant::SimTimings& t) const {
    return static_cast<std::size_t>(std::llround(duration_per_cell * t.control_rate));
}

void NoiseModel::validate() const {
    auto non_negative = [](double v, const char* name) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ValidationError(fmt::format("noise: {} must be finite and >= 0, got {}", name, v));
        }
    };
    non_negative(current_noise_std, "current_noise_std");
    non_negative(encoder_noise_std, "encoder_noise_std");
    non_negative(velocity_noise_factor, "velocity_noise_factor");
    non_negative(temperature_noise_std, "temperature_noise_std");
    non_negative(torque_label_noise_std, "torque_label_noise_std");
    non_negative(disturbance_torque_std, "disturbance_torque_std");
    if (!(std::isfinite(disturbance_corr_time) && disturbance_corr_time > 0.0)) {
        throw ValidationError(fmt::format(
            "noise: disturbance_corr_time must be > 0, got {}", disturbance_corr_time));
    }
}

void CollectionMotion::validate() const {
    require_finite(q_low, "q_low");
    require_finite(q_high, "q_high");
    if (q_high <= q_low) {
        throw ValidationError(fmt::format(
            "motion: q_high ({}) must be > q_low ({})", q_high, q_low));
    }
    if (!(std::isfinite(hold_time) && hold_time >= 0.0)) {
        throw ValidationError(fmt::format("motion: hold_time must be >= 0, got {}", hold_time));
    }
    if (!(std::isfinite(settle_time) && settle_time >= 0.0)) {
        throw ValidationError(
            fmt::format("motion: settle_time must be >= 0, got {}", settle_time));
    }
    if (!(std::isfinite(vel_damping) && vel_damping >= 0.0)) {
        throw ValidationError(fmt::format(
            "motion: vel_damping must be finite and >= 0, got {}", vel_damping));
    }
    pid.validate();
}

void RigConfig::validate() const {
    plant.validate();
    routing.validate();
    muscle.validate();
    timings.validate();
    motion.validate();
    if (!(std::isfinite(base_cable_len) && base_cable_len > 0.0)) {
        throw ValidationError(fmt::format(
            "rig: base_cable_len must be > 0, got {}", base_cable_len));
    }
    if (motion.q_low < plant.stop_lo || motion.q_high > plant.stop_hi) {
        throw ValidationError(fmt::format(
            "rig: motion range [{}, {}] exceeds the hard stops [{}, {}]", motion.q_low,
            motion.q_high, plant.stop_lo, plant.stop_hi));
    }
}

std::vector<gpr::SampleRecord> run_calibration(const CalibrationProtocol& proto,
                                               const RigConfig& rig, const NoiseModel& noise,
                                               ExecPolicy policy) {
    proto.validate();
    rig.validate();
    noise.validate();

    double ramp = 0.5 * (proto.duration_per_cell - 2.0 * rig.motion.hold_time);
    if (ramp <= 0.0) {
        throw ValidationError(fmt::format(
            "calibration: duration_per_cell {} s leaves no time to ramp after two {} s holds",
            proto.duration_per_cell, rig.motion.hold_time));
    }
    RampCycle traj{rig.motion.q_low, rig.motion.q_high, rig.motion.hold_time,
                   rig.motion.hold_time, ramp};

    const auto loads = proto.loads();
    const auto& temps = proto.temperatures;
    const std::size_t n_cells = proto.cell_count();
    const std::size_t ticks = proto.rows_per_cell(rig.timings);

    // Cells are independent: each gets its own substream keyed by its
    // canonical index, so the schedule cannot change the output.
    std::vector<std::vector<gpr::SampleRecord>> cells(n_cells);
#pragma omp parallel for schedule(dynamic) if (policy == ExecPolicy::Parallel)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_cells); ++c) {
        std::size_t idx = static_cast<std::size_t>(c);
        std::size_t per_rep = loads.size() * temps.size();
        std::size_t load_i = (idx % per_rep) / temps.size();
        std::size_t temp_i = idx % temps.size();
        cells[idx] = run_tracking_cell(rig, std::nullopt, loads[load_i], temps[temp_i],
                                       rig.motion.q_low, traj, ticks, noise,
                                       substream_seed(proto.seed, 0xCE11, idx));
    }

    std::vector<gpr::SampleRecord> out;
    out.reserve(n_cells * ticks);
    for (const auto& cell : cells) {
        out.insert(out.end(), cell.begin(), cell.end());
    }
    return out;
}

std::vector<gpr::SampleRecord> run_grasp_collection(
    const std::vector<plant::ContactObject>& objects, int trials_per_object,
    double trial_duration, const RigConfig& rig, const NoiseModel& noise,
    std::uint64_t seed, ExecPolicy policy) {
    rig.validate();
    noise.validate();
    if (objects.empty()) {
        throw ValidationError("grasp collection: at least one object is required");
    }
    for (const auto& o : objects) o.validate();
    if (trials_per_object < 1) {
        throw ValidationError(fmt::format(
            "grasp collection: trials_per_object must be >= 1, got {}", trials_per_object));
    }
    if (!(std::isfinite(trial_duration) && trial_duration > 0.5)) {
        throw ValidationError(fmt::format(
            "grasp collection: trial_duration must be > 0.5 s, got {}", trial_duration));
    }

    const std::size_t ticks =
        static_cast<std::size_t>(std::llround(trial_duration * rig.timings.control_rate));
    const std::size_t n_runs = objects.size() * static_cast<std::size_t>(trials_per_object);

    std::vector<std::vector<gpr::SampleRecord>> runs(n_runs);
#pragma omp parallel for schedule(dynamic) if (policy == ExecPolicy::Parallel)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n_runs); ++r) {
        std::size_t idx = static_cast<std::size_t>(r);
        std::size_t obj_i = idx / static_cast<std::size_t>(trials_per_object);
        std::size_t trial_i = idx % static_cast<std::size_t>(trials_per_object);
        const auto& obj = objects[obj_i];

        // Trial-specific randomization comes from a dedicated substream so the
        // logging stream stays aligned with the calibration cells.
        Rng trial_rng(substream_seed(seed, 0x91A5, obj_i, trial_i));
        double depth = 0.1 + 0.2 * trial_rng.uniform();       // press past engage [rad]
        double speed = 0.5 * (1.0 + 0.2 * (trial_rng.uniform() - 0.5));  // [rad/s]
        double temperature = 20.0 + 30.0 * trial_rng.uniform();

        double start = rig.motion.q_low;
        double target = std::min(obj.engage_angle + depth, rig.plant.stop_hi);
        // Settle briefly, close at the drawn speed, then press for the rest of
        // the trial (the top hold outlasts the logged window).
        RampCycle traj{start, target, 0.2, 2.0 * trial_duration,
                       std::max((target - start) / speed, 1e-3)};

        runs[idx] = run_tracking_cell(rig, obj, rig.plant.weight_mass, temperature, start, traj,
                                      ticks, noise,
                                      substream_seed(seed, 0x91A6, obj_i, trial_i));
    }

    std::vector<gpr::SampleRecord> out;
    out.reserve(n_runs * ticks);
    for (const auto& run : runs) {
        out.insert(out.end(), run.begin(), run.end());
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<gpr::SampleRecord>& rows) {
    csvio::Table table;
    table.header.assign(gpr::kFeatureNames.begin(), gpr::kFeatureNames.end());
    table.header.push_back(gpr::kTargetName);
    table.rows.reserve(rows.size());
    for (const auto& r : rows) {
        std::vector<double> row(r.features.begin(), r.features.end());
        row.push_back(r.torque);
        table.rows.push_back(std::move(row));
    }
    csvio::write_table(path, table);
}

std::vector<gpr::SampleRecord> read_csv(const std::filesystem::path& path) {
    csvio::Table table = csvio::read_table(path);
    std::vector<std::string> expected(gpr::kFeatureNames.begin(), gpr::kFeatureNames.end());
    expected.push_back(gpr::kTargetName);
    if (table.header != expected) {
        std::string got;
        for (std::size_t i = 0; i < table.header.size(); ++i) {
            if (i > 0) got += ',';
            got += table.header[i];
        }
        throw ValidationError(fmt::format(
            "sample csv '{}': unexpected header '{}'", path.string(), got));
    }
    std::vector<gpr::SampleRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        gpr::SampleRecord rec;
        for (int j = 0; j < gpr::kFeatureDim; ++j) {
            rec.features[static_cast<std::size_t>(j)] = table.rows[i][static_cast<std::size_t>(j)];
        }
        rec.torque = table.rows[i][gpr::kFeatureDim];
        gpr::validate_record(rec, fmt::format("sample csv '{}' row {}", path.string(), i + 1));
        out.push_back(rec);
    }
    return out;
}

}  // namespace fingersim::datagen

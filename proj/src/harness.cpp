#include "fingersim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "fingersim/csv_io.hpp"
#include "fingersim/rng.hpp"
#include "fingersim/sim_loop.hpp"

namespace fingersim::harness {

namespace {

std::string sanitize(const std::string& label) {
    std::string out;
    out.reserve(label.size());
    for (char c : label) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        out += ok ? c : '-';
    }
    return out;
}

}  // namespace

void JointConfig::validate() const {
    if (name.empty()) {
        throw ValidationError("joint: name must not be empty");
    }
    rig.validate();
}

void EstimationConfig::validate() const {
    protocol.validate();
    noise.validate();
    fit.validate();
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ValidationError(fmt::format(
            "estimation: test_fraction must be in (0, 1), got {}", test_fraction));
    }
    if (grasp_trials < 0) {
        throw ValidationError(fmt::format(
            "estimation: grasp_trials must be >= 0, got {}", grasp_trials));
    }
    if (grasp_trials > 0) {
        if (grasp_objects.empty()) {
            throw ValidationError(
                "estimation: grasp augmentation is enabled but no objects are configured");
        }
        for (const auto& o : grasp_objects) o.validate();
        if (!(std::isfinite(grasp_duration) && grasp_duration > 0.5)) {
            throw ValidationError(fmt::format(
                "estimation: grasp_duration must be > 0.5 s, got {}", grasp_duration));
        }
    }
}

std::vector<EstimationOutcome> run_estimation_experiment(
    const std::vector<JointConfig>& joints, const EstimationConfig& cfg,
    const std::optional<std::filesystem::path>& out_dir, ExecPolicy policy) {
    cfg.validate();
    if (joints.empty()) {
        throw ValidationError("estimation: at least one joint is required");
    }
    for (const auto& j : joints) j.validate();

    std::vector<EstimationOutcome> outcomes;
    outcomes.reserve(joints.size());
    for (std::size_t ji = 0; ji < joints.size(); ++ji) {
        const auto& joint = joints[ji];
        auto rows = datagen::run_calibration(cfg.protocol, joint.rig, cfg.noise, policy);
        if (cfg.grasp_trials > 0) {
            auto grasp = datagen::run_grasp_collection(
                cfg.grasp_objects, cfg.grasp_trials, cfg.grasp_duration, joint.rig, cfg.noise,
                substream_seed(cfg.fit.seed, 0x6A5B, ji), policy);
            rows.insert(rows.end(), grasp.begin(), grasp.end());
        }

        gpr::FitOptions fit_opts = cfg.fit;
        fit_opts.policy = policy;
        auto parts = gpr::split(rows, cfg.test_fraction,
                                substream_seed(cfg.fit.seed, 0x57A7, ji));
        gpr::GprModel model = gpr::GprModel::fit(parts.train, fit_opts);
        gpr::EvalMetrics metrics = gpr::evaluate(model, parts.test, policy);

        EstimationOutcome out;
        out.joint = joint.name;
        out.metrics = metrics;
        out.rows_total = rows.size();
        out.rows_train = parts.train.size();
        out.rows_test = parts.test.size();
        out.train_lml = model.log_marginal_likelihood();
        out.params = model.params();
        outcomes.push_back(out);

        if (out_dir.has_value()) {
            std::filesystem::create_directories(*out_dir);
            datagen::write_csv(*out_dir / fmt::format("{}_samples.csv", sanitize(joint.name)),
                               rows);
            model.save(*out_dir / fmt::format("{}_model.json", sanitize(joint.name)));
        }
    }
    return outcomes;
}

void CompareConfig::validate() const {
    if (objects.empty()) {
        throw ValidationError("compare: at least one object is required");
    }
    for (const auto& o : objects) {
        o.validate();
        if (o.stiffness <= 0.0) {
            throw ValidationError(fmt::format(
                "compare: object '{}' must have stiffness > 0 (placeholders cannot be grasped)",
                o.label));
        }
    }
    if (trials_per_object < 1) {
        throw ValidationError(fmt::format(
            "compare: trials_per_object must be >= 1, got {}", trials_per_object));
    }
    if (!(std::isfinite(trial_duration) && trial_duration > 0.5)) {
        throw ValidationError(fmt::format(
            "compare: trial_duration must be > 0.5 s, got {}", trial_duration));
    }
    admittance.validate();
    contact_stop.validate();
    if (!(std::isfinite(approach_speed) && approach_speed > 0.0)) {
        throw ValidationError(fmt::format(
            "compare: approach_speed must be > 0, got {}", approach_speed));
    }
    if (!(speed_jitter >= 0.0 && speed_jitter < 1.0)) {
        throw ValidationError(fmt::format(
            "compare: speed_jitter must be in [0, 1), got {}", speed_jitter));
    }
    if (!(std::isfinite(press_depth) && press_depth > 0.0)) {
        throw ValidationError(fmt::format(
            "compare: press_depth must be > 0, got {}", press_depth));
    }
    if (!(std::isfinite(depth_jitter) && depth_jitter >= 0.0 && depth_jitter < press_depth)) {
        throw ValidationError(fmt::format(
            "compare: depth_jitter must be in [0, press_depth), got {}", depth_jitter));
    }
    if (!(std::isfinite(settle_exclusion) && settle_exclusion >= 0.0 &&
          settle_exclusion < trial_duration)) {
        throw ValidationError(fmt::format(
            "compare: settle_exclusion must be in [0, trial_duration), got {}",
            settle_exclusion));
    }
    if (!(std::isfinite(contact_torque_eps) && contact_torque_eps > 0.0)) {
        throw ValidationError(fmt::format(
            "compare: contact_torque_eps must be > 0, got {}", contact_torque_eps));
    }
}

namespace {

enum class Arm { Pid, Admittance };

// Shared by both arms of one trial: identical reference trajectory and
// identical noise substream, so the only difference is the controller.
struct TrialSetup {
    double target = 0.0;
    double speed = 0.0;
    double temperature = 20.0;
    std::uint64_t noise_seed = 0;
};

}  // namespace

CompareReport run_grasp_comparison(const JointConfig& joint, const CompareConfig& cfg,
                                   const datagen::NoiseModel& noise, const gpr::GprModel* model,
                                   const std::optional<std::filesystem::path>& out_dir,
                                   ExecPolicy policy) {
    joint.validate();
    cfg.validate();
    noise.validate();

    const double dt = joint.rig.timings.control_dt();
    const std::size_t ticks =
        static_cast<std::size_t>(std::llround(cfg.trial_duration * joint.rig.timings.control_rate));
    const std::size_t settle_ticks =
        static_cast<std::size_t>(std::llround(cfg.settle_exclusion * joint.rig.timings.control_rate));

    struct TrialResult {
        TrialMetrics pid;
        TrialMetrics adm;
        csvio::Table trace_pid;
        csvio::Table trace_adm;
    };
    const std::size_t n_objects = cfg.objects.size();
    const std::size_t n_trials = static_cast<std::size_t>(cfg.trials_per_object);
    std::vector<TrialResult> results(n_objects * n_trials);

    const std::vector<std::string> trace_header = {
        "t",          "q_ref",        "q_cmd",     "joint_pos",  "joint_vel",
        "current_cmd", "tau_est",     "tau_truth", "applied_torque", "moment_arm",
        "latched",    "deviation",    "accumulating"};

    auto run_arm = [&](std::size_t obj_i, const TrialSetup& setup, Arm arm,
                       bool keep_trace) -> std::pair<TrialMetrics, csvio::Table> {
        const auto& obj = cfg.objects[obj_i];
        plant::FingerSim::Config scfg;
        scfg.plant = joint.rig.plant;
        scfg.routing = joint.rig.routing;
        scfg.muscle = joint.rig.muscle;
        scfg.object = obj;
        scfg.base_cable_len = joint.rig.base_cable_len;
        scfg.initial_joint_pos = cfg.start_pos;
        scfg.temperature = setup.temperature;

        plant::FingerSim sim(scfg);
        control::PidController pid(joint.rig.motion.pid);
        control::AdmittanceFilter adm(cfg.admittance);
        control::ContactStop stop(cfg.contact_stop);
        Rng rng(setup.noise_seed);

        struct Ou {
            double decay, kick, value = 0.0;
        } oup{std::exp(-dt / noise.disturbance_corr_time), 0.0, 0.0};
        oup.kick = noise.disturbance_torque_std *
                   std::sqrt(1.0 - oup.decay * oup.decay);

        double ramp_time = std::max((setup.target - cfg.start_pos) / setup.speed, 1e-3);

        TrialMetrics m;
        csvio::Table trace;
        if (keep_trace) trace.header = trace_header;

        double last_cmd = 0.0;
        double last_truth = 0.0;
        double measured_q = cfg.start_pos;
        bool accumulating = false;

        for (std::size_t k = 0; k < ticks; ++k) {
            double t_end = static_cast<double>(k + 1) * dt;
            double q_ref, v_ref;
            if (t_end < ramp_time) {
                q_ref = cfg.start_pos + setup.speed * t_end;
                v_ref = setup.speed;
            } else {
                q_ref = setup.target;
                v_ref = 0.0;
            }

            // Same draw order as the other arm: disturbance, then the sensor
            // noises for this tick's measurements.
            oup.value = oup.value * oup.decay + oup.kick * rng.normal();
            double n_current = rng.normal(0.0, noise.current_noise_std);
            double n_mpos = rng.normal(0.0, noise.encoder_noise_std);
            double n_mvel = rng.normal(0.0, noise.encoder_noise_std * noise.velocity_noise_factor);
            double n_jpos = rng.normal(0.0, noise.encoder_noise_std);
            double n_jvel = rng.normal(0.0, noise.encoder_noise_std * noise.velocity_noise_factor);
            double n_temp = rng.normal(0.0, noise.temperature_noise_std);

            const plant::PlantState& st = sim.state();
            std::array<double, gpr::kFeatureDim> features = {
                last_cmd + n_current,
                st.motor_pos + n_mpos,
                st.motor_vel + n_mvel,
                st.joint_pos + n_jpos,
                st.joint_vel + n_jvel,
                st.temperature + n_temp,
            };
            measured_q = features[3];

            double tau_est = model != nullptr ? model->predict(features).mean : last_truth;

            double q_cmd = q_ref;
            double deviation = 0.0;
            bool latched = false;
            if (arm == Arm::Admittance) {
                double held = stop.filter(tau_est, q_ref, measured_q, dt);
                latched = stop.latched();
                // The estimate is positive against flexion; the deviation
                // coordinate points with flexion, so the filter sees the
                // negated estimate and yields by backing the reference off.
                deviation = adm.step(-tau_est, dt);
                q_cmd = held + deviation;
            }

            double cmd = pid.step(q_cmd, measured_q, dt);
            if (cmd < 0.0) cmd = 0.0;

            auto tel = sim.advance(cmd, q_cmd, arm == Arm::Admittance ? 0.0 : v_ref,
                                   joint.rig.timings, oup.value);

            if (!m.contacted && tel.true_external_torque > cfg.contact_torque_eps) {
                m.contacted = true;
            }
            accumulating = m.contacted && k >= settle_ticks;
            if (accumulating) {
                m.effort += std::abs(tel.applied_torque) * dt;
                m.effort_sq += tel.applied_torque * tel.applied_torque * dt;
                m.mech_work += std::abs(tel.applied_torque * tel.state.joint_vel) * dt;
            }
            m.peak_truth = std::max(m.peak_truth, std::abs(tel.true_external_torque));

            if (keep_trace) {
                trace.rows.push_back({t_end, q_ref, q_cmd, tel.state.joint_pos,
                                      tel.state.joint_vel, cmd, tau_est,
                                      tel.true_external_torque, tel.applied_torque,
                                      tel.moment_arm, latched ? 1.0 : 0.0, deviation,
                                      accumulating ? 1.0 : 0.0});
            }

            last_cmd = cmd;
            last_truth = tel.true_external_torque;
        }
        return {m, std::move(trace)};
    };

#pragma omp parallel for schedule(dynamic) if (policy == ExecPolicy::Parallel)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n_objects * n_trials); ++r) {
        std::size_t idx = static_cast<std::size_t>(r);
        std::size_t obj_i = idx / n_trials;
        std::size_t trial_i = idx % n_trials;

        Rng trial_rng(substream_seed(cfg.seed, 0xC0805, obj_i, trial_i));
        TrialSetup setup;
        setup.speed = cfg.approach_speed *
                      (1.0 + cfg.speed_jitter * (2.0 * trial_rng.uniform() - 1.0));
        double depth = cfg.press_depth + cfg.depth_jitter * (2.0 * trial_rng.uniform() - 1.0);
        setup.target = std::min(cfg.objects[obj_i].engage_angle + depth,
                                joint.rig.plant.stop_hi);
        setup.temperature = 20.0;
        setup.noise_seed = substream_seed(cfg.seed, 0xC0806, obj_i, trial_i);

        bool keep_trace = cfg.write_all_traces || trial_i == 0;
        TrialResult res;
        try {
            auto [mp, tp] = run_arm(obj_i, setup, Arm::Pid, keep_trace);
            res.pid = mp;
            res.trace_pid = std::move(tp);
        } catch (const NumericError&) {
            res.pid.diverged = true;
        }
        try {
            auto [ma, ta] = run_arm(obj_i, setup, Arm::Admittance, keep_trace);
            res.adm = ma;
            res.trace_adm = std::move(ta);
        } catch (const NumericError&) {
            res.adm.diverged = true;
        }
        results[idx] = std::move(res);
    }

    CompareReport report;
    report.seed = cfg.seed;
    report.objects.reserve(n_objects);
    double reduction_sum = 0.0;
    std::size_t reduction_count = 0;
    for (std::size_t obj_i = 0; obj_i < n_objects; ++obj_i) {
        ObjectComparison oc;
        oc.label = cfg.objects[obj_i].label;
        oc.stiffness = cfg.objects[obj_i].stiffness;
        double sum_pid = 0.0, sum_adm = 0.0, sum_wp = 0.0, sum_wa = 0.0;
        for (std::size_t trial_i = 0; trial_i < n_trials; ++trial_i) {
            const auto& res = results[obj_i * n_trials + trial_i];
            bool valid = !res.pid.diverged && !res.adm.diverged && res.pid.contacted &&
                         res.adm.contacted;
            if (!valid) {
                ++oc.trials_flagged;
                continue;
            }
            ++oc.trials_valid;
            sum_pid += res.pid.effort;
            sum_adm += res.adm.effort;
            sum_wp += res.pid.mech_work;
            sum_wa += res.adm.mech_work;
        }
        if (oc.trials_valid > 0) {
            double nv = static_cast<double>(oc.trials_valid);
            oc.effort_pid = sum_pid / nv;
            oc.effort_admittance = sum_adm / nv;
            oc.mech_work_pid = sum_wp / nv;
            oc.mech_work_admittance = sum_wa / nv;
            if (oc.effort_pid > 0.0) {
                oc.reduction_pct = 100.0 * (oc.effort_pid - oc.effort_admittance) / oc.effort_pid;
                reduction_sum += oc.reduction_pct;
                ++reduction_count;
            }
        }
        report.objects.push_back(oc);
    }
    report.mean_reduction_pct =
        reduction_count > 0 ? reduction_sum / static_cast<double>(reduction_count) : 0.0;

    if (out_dir.has_value()) {
        std::filesystem::create_directories(*out_dir);
        for (std::size_t obj_i = 0; obj_i < n_objects; ++obj_i) {
            for (std::size_t trial_i = 0; trial_i < n_trials; ++trial_i) {
                if (!(cfg.write_all_traces || trial_i == 0)) continue;
                const auto& res = results[obj_i * n_trials + trial_i];
                std::string base = sanitize(cfg.objects[obj_i].label);
                if (!res.pid.diverged) {
                    csvio::write_table(*out_dir / fmt::format("compare_{}_pid_t{}.csv", base, trial_i),
                                       res.trace_pid);
                }
                if (!res.adm.diverged) {
                    csvio::write_table(
                        *out_dir / fmt::format("compare_{}_admittance_t{}.csv", base, trial_i),
                        res.trace_adm);
                }
            }
        }
    }
    return report;
}

void write_report(const std::filesystem::path& path, const CompareReport& report) {
    nlohmann::json j;
    j["format"] = "fingersim-compare-report";
    j["format_version"] = 1;
    j["seed"] = report.seed;
    j["config_digest"] = report.config_digest;
    j["mean_reduction_pct"] = report.mean_reduction_pct;
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& oc : report.objects) {
        objs.push_back({
            {"label", oc.label},
            {"stiffness", oc.stiffness},
            {"effort_pid", oc.effort_pid},
            {"effort_admittance", oc.effort_admittance},
            {"reduction_pct", oc.reduction_pct},
            {"mech_work_pid", oc.mech_work_pid},
            {"mech_work_admittance", oc.mech_work_admittance},
            {"trials_valid", oc.trials_valid},
            {"trials_flagged", oc.trials_flagged},
        });
    }
    j["objects"] = objs;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    }
    out << j.dump(1) << '\n';
    out.flush();
    if (!out) {
        throw IoError(fmt::format("write to '{}' failed", path.string()));
    }
}

CompareReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("report '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    try {
        CompareReport r;
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config_digest = j.at("config_digest").get<std::string>();
        r.mean_reduction_pct = j.at("mean_reduction_pct").get<double>();
        for (const auto& jo : j.at("objects")) {
            ObjectComparison oc;
            oc.label = jo.at("label").get<std::string>();
            oc.stiffness = jo.at("stiffness").get<double>();
            oc.effort_pid = jo.at("effort_pid").get<double>();
            oc.effort_admittance = jo.at("effort_admittance").get<double>();
            oc.reduction_pct = jo.at("reduction_pct").get<double>();
            oc.mech_work_pid = jo.at("mech_work_pid").get<double>();
            oc.mech_work_admittance = jo.at("mech_work_admittance").get<double>();
            oc.trials_valid = jo.at("trials_valid").get<int>();
            oc.trials_flagged = jo.at("trials_flagged").get<int>();
            r.objects.push_back(oc);
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("report '{}' is malformed: {}", path.string(), e.what()));
    }
}

void ForceExperimentConfig::validate() const {
    object.validate();
    if (object.stiffness <= 0.0) {
        throw ValidationError("force experiment: object stiffness must be > 0");
    }
    if (!(std::isfinite(trial_duration) && trial_duration > 0.5)) {
        throw ValidationError(fmt::format(
            "force experiment: trial_duration must be > 0.5 s, got {}", trial_duration));
    }
    if (!(std::isfinite(press_depth) && press_depth > 0.0)) {
        throw ValidationError(fmt::format(
            "force experiment: press_depth must be > 0, got {}", press_depth));
    }
    if (!(std::isfinite(approach_speed) && approach_speed > 0.0)) {
        throw ValidationError(fmt::format(
            "force experiment: approach_speed must be > 0, got {}", approach_speed));
    }
}

ForceMetrics run_force_experiment(const JointConfig& joint, const ForceExperimentConfig& cfg,
                                  const datagen::NoiseModel& noise, const gpr::GprModel* model,
                                  const std::optional<std::filesystem::path>& out_dir) {
    joint.validate();
    cfg.validate();
    noise.validate();
    if (model == nullptr) {
        throw ValidationError("force experiment: a fitted model is required");
    }

    const double dt = joint.rig.timings.control_dt();
    const double lever = joint.rig.plant.fingertip_lever;
    const std::size_t ticks =
        static_cast<std::size_t>(std::llround(cfg.trial_duration * joint.rig.timings.control_rate));

    plant::FingerSim::Config scfg;
    scfg.plant = joint.rig.plant;
    scfg.routing = joint.rig.routing;
    scfg.muscle = joint.rig.muscle;
    scfg.object = cfg.object;
    scfg.base_cable_len = joint.rig.base_cable_len;
    scfg.initial_joint_pos = cfg.start_pos;
    scfg.temperature = 20.0;

    plant::FingerSim sim(scfg);
    control::PidController pid(joint.rig.motion.pid);
    Rng rng(substream_seed(cfg.seed, 0xF02CE));

    double target = std::min(cfg.object.engage_angle + cfg.press_depth,
                             joint.rig.plant.stop_hi);
    double ramp_time = std::max((target - cfg.start_pos) / cfg.approach_speed, 1e-3);

    csvio::Table trace;
    trace.header = {"t", "force_true", "force_est", "tau_est", "joint_pos"};

    ForceMetrics m;
    double sum_abs = 0.0;
    double sum_sq = 0.0;
    double last_cmd = 0.0;
    double measured_q = cfg.start_pos;

    for (std::size_t k = 0; k < ticks; ++k) {
        double t_end = static_cast<double>(k + 1) * dt;
        double q_ref, v_ref;
        if (t_end < ramp_time) {
            q_ref = cfg.start_pos + cfg.approach_speed * t_end;
            v_ref = cfg.approach_speed;
        } else {
            q_ref = target;
            v_ref = 0.0;
        }

        double n_current = rng.normal(0.0, noise.current_noise_std);
        double n_mpos = rng.normal(0.0, noise.encoder_noise_std);
        double n_mvel = rng.normal(0.0, noise.encoder_noise_std * noise.velocity_noise_factor);
        double n_jpos = rng.normal(0.0, noise.encoder_noise_std);
        double n_jvel = rng.normal(0.0, noise.encoder_noise_std * noise.velocity_noise_factor);
        double n_temp = rng.normal(0.0, noise.temperature_noise_std);

        const plant::PlantState& st = sim.state();
        std::array<double, gpr::kFeatureDim> features = {
            last_cmd + n_current, st.motor_pos + n_mpos,     st.motor_vel + n_mvel,
            st.joint_pos + n_jpos, st.joint_vel + n_jvel,    st.temperature + n_temp,
        };
        measured_q = features[3];

        double cmd = pid.step(q_ref, measured_q, dt);
        if (cmd < 0.0) cmd = 0.0;
        auto tel = sim.advance(cmd, q_ref, v_ref, joint.rig.timings, 0.0);

        double tau_est = model->predict(features).mean;
        double force_true =
            plant::contact_torque(joint.rig.plant, cfg.object, tel.state.joint_pos,
                                  tel.state.joint_vel) /
            lever;
        double force_est = tau_est / lever;

        if (force_true > 0.0) {
            double err = std::abs(force_est - force_true);
            sum_abs += err;
            sum_sq += err * err;
            m.peak_abs_err = std::max(m.peak_abs_err, err);
            ++m.n_used;
        } else {
            ++m.n_excluded;
        }
        trace.rows.push_back({t_end, force_true, force_est, tau_est, tel.state.joint_pos});
        last_cmd = cmd;
    }

    if (m.n_used < 10) {
        throw ValidationError(fmt::format(
            "force experiment: only {} contact samples; the press never engaged the object",
            m.n_used));
    }
    m.mean_abs_err = sum_abs / static_cast<double>(m.n_used);
    m.mse = sum_sq / static_cast<double>(m.n_used);

    if (out_dir.has_value()) {
        std::filesystem::create_directories(*out_dir);
        csvio::write_table(*out_dir / "force_trace.csv", trace);
    }
    return m;
}

}  // namespace fingersim::harness

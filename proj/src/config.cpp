#include "fingersim/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

namespace fingersim::config {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ConfigError(fmt::format("config {}: {}", path, what));
}

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) bad(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, std::set<std::string> allowed) {
    expect_object(j, path);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (allowed.find(key) == allowed.end()) {
            bad(path + "/" + key, "unknown key");
        }
    }
}

template <typename T>
void opt(const json& j, const char* key, T& out, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        bad(path + "/" + key, "wrong type");
    }
}

template <typename T>
void req(const json& j, const char* key, T& out, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) bad(path + "/" + key, "required key is missing");
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        bad(path + "/" + key, "wrong type");
    }
}

// ---- parsing ---------------------------------------------------------------

void parse_timings(const json& j, plant::SimTimings& t, const std::string& path) {
    check_keys(j, path, {"control_rate", "plant_rate"});
    opt(j, "control_rate", t.control_rate, path);
    opt(j, "plant_rate", t.plant_rate, path);
}

void parse_noise(const json& j, datagen::NoiseModel& n, const std::string& path) {
    check_keys(j, path,
               {"current_noise_std", "encoder_noise_std", "velocity_noise_factor",
                "temperature_noise_std", "torque_label_noise_std", "disturbance_torque_std",
                "disturbance_corr_time"});
    opt(j, "current_noise_std", n.current_noise_std, path);
    opt(j, "encoder_noise_std", n.encoder_noise_std, path);
    opt(j, "velocity_noise_factor", n.velocity_noise_factor, path);
    opt(j, "temperature_noise_std", n.temperature_noise_std, path);
    opt(j, "torque_label_noise_std", n.torque_label_noise_std, path);
    opt(j, "disturbance_torque_std", n.disturbance_torque_std, path);
    opt(j, "disturbance_corr_time", n.disturbance_corr_time, path);
}

void parse_protocol(const json& j, datagen::CalibrationProtocol& p, const std::string& path) {
    check_keys(j, path,
               {"load_min", "load_max", "load_step", "temperatures", "duration_per_cell",
                "repetitions"});
    opt(j, "load_min", p.load_min, path);
    opt(j, "load_max", p.load_max, path);
    opt(j, "load_step", p.load_step, path);
    opt(j, "temperatures", p.temperatures, path);
    opt(j, "duration_per_cell", p.duration_per_cell, path);
    opt(j, "repetitions", p.repetitions, path);
}

void parse_routing(const json& j, geometry::TendonRouting& r, const std::string& path) {
    check_keys(j, path,
               {"pulley_offset_len", "anchor_offset_len", "anchor_angle", "pulley_angle",
                "pulley_radius"});
    opt(j, "pulley_offset_len", r.pulley_offset_len, path);
    opt(j, "anchor_offset_len", r.anchor_offset_len, path);
    opt(j, "anchor_angle", r.anchor_angle, path);
    opt(j, "pulley_angle", r.pulley_angle, path);
    opt(j, "pulley_radius", r.pulley_radius, path);
}

void parse_plant(const json& j, plant::PlantParams& p, const std::string& path) {
    check_keys(j, path,
               {"link_inertia", "viscous_friction", "coulomb_friction", "coulomb_smoothing_vel",
                "temp_viscous_coeff", "weight_mass", "weight_arm", "gravity",
                "return_spring_stiffness", "fingertip_lever", "tension_limit", "gear_ratio",
                "capstan_radius", "stop_lo", "stop_hi"});
    opt(j, "link_inertia", p.link_inertia, path);
    opt(j, "viscous_friction", p.viscous_friction, path);
    opt(j, "coulomb_friction", p.coulomb_friction, path);
    opt(j, "coulomb_smoothing_vel", p.coulomb_smoothing_vel, path);
    opt(j, "temp_viscous_coeff", p.temp_viscous_coeff, path);
    opt(j, "weight_mass", p.weight_mass, path);
    opt(j, "weight_arm", p.weight_arm, path);
    opt(j, "gravity", p.gravity, path);
    opt(j, "return_spring_stiffness", p.return_spring_stiffness, path);
    opt(j, "fingertip_lever", p.fingertip_lever, path);
    opt(j, "tension_limit", p.tension_limit, path);
    opt(j, "gear_ratio", p.gear_ratio, path);
    opt(j, "capstan_radius", p.capstan_radius, path);
    opt(j, "stop_lo", p.stop_lo, path);
    opt(j, "stop_hi", p.stop_hi, path);
}

void parse_muscle(const json& j, muscle::MuscleParams& m, const std::string& path) {
    check_keys(j, path, {"current_gain", "kp", "kd1", "kd2", "ks", "spring_rest_len"});
    opt(j, "current_gain", m.current_gain, path);
    opt(j, "kp", m.kp, path);
    opt(j, "kd1", m.kd1, path);
    opt(j, "kd2", m.kd2, path);
    opt(j, "ks", m.ks, path);
    opt(j, "spring_rest_len", m.spring_rest_len, path);
}

void parse_pid(const json& j, control::PidParams& p, const std::string& path) {
    check_keys(j, path, {"kp", "ki", "kd", "integral_limit"});
    opt(j, "kp", p.kp, path);
    opt(j, "ki", p.ki, path);
    opt(j, "kd", p.kd, path);
    opt(j, "integral_limit", p.integral_limit, path);
}

void parse_motion(const json& j, datagen::CollectionMotion& m, const std::string& path) {
    check_keys(j, path, {"q_low", "q_high", "hold_time", "settle_time", "pid", "vel_damping"});
    opt(j, "q_low", m.q_low, path);
    opt(j, "q_high", m.q_high, path);
    opt(j, "hold_time", m.hold_time, path);
    opt(j, "settle_time", m.settle_time, path);
    if (j.contains("pid")) parse_pid(j.at("pid"), m.pid, path + "/pid");
    opt(j, "vel_damping", m.vel_damping, path);
}

void parse_rig(const json& j, datagen::RigConfig& r, const std::string& path) {
    check_keys(j, path, {"plant", "routing", "muscle", "motion", "base_cable_len"});
    if (j.contains("plant")) parse_plant(j.at("plant"), r.plant, path + "/plant");
    if (j.contains("routing")) parse_routing(j.at("routing"), r.routing, path + "/routing");
    if (j.contains("muscle")) parse_muscle(j.at("muscle"), r.muscle, path + "/muscle");
    if (j.contains("motion")) parse_motion(j.at("motion"), r.motion, path + "/motion");
    opt(j, "base_cable_len", r.base_cable_len, path);
}

void parse_fit(const json& j, gpr::FitOptions& f, const std::string& path) {
    check_keys(j, path, {"restarts", "max_iterations", "tol", "train_cap", "hyperopt_cap", "ard"});
    opt(j, "restarts", f.restarts, path);
    opt(j, "max_iterations", f.max_iterations, path);
    opt(j, "tol", f.tol, path);
    opt(j, "train_cap", f.train_cap, path);
    opt(j, "hyperopt_cap", f.hyperopt_cap, path);
    opt(j, "ard", f.ard, path);
}

void parse_object(const json& j, plant::ContactObject& o, const std::string& path) {
    check_keys(j, path, {"label", "stiffness", "damping", "engage_angle"});
    req(j, "label", o.label, path);
    req(j, "stiffness", o.stiffness, path);
    opt(j, "damping", o.damping, path);
    opt(j, "engage_angle", o.engage_angle, path);
}

void parse_admittance(const json& j, control::AdmittanceParams& a, const std::string& path) {
    check_keys(j, path,
               {"virtual_inertia", "virtual_damping", "virtual_stiffness", "load_torque_offset"});
    opt(j, "virtual_inertia", a.virtual_inertia, path);
    opt(j, "virtual_damping", a.virtual_damping, path);
    opt(j, "virtual_stiffness", a.virtual_stiffness, path);
    opt(j, "load_torque_offset", a.load_torque_offset, path);
}

void parse_contact_stop(const json& j, control::ContactStopParams& c, const std::string& path) {
    check_keys(j, path, {"torque_threshold", "hysteresis", "release_dwell"});
    opt(j, "torque_threshold", c.torque_threshold, path);
    opt(j, "hysteresis", c.hysteresis, path);
    opt(j, "release_dwell", c.release_dwell, path);
}

void parse_compare(const json& j, harness::CompareConfig& c, const std::string& path) {
    check_keys(j, path,
               {"objects", "trials_per_object", "trial_duration", "admittance", "contact_stop",
                "start_pos", "approach_speed", "speed_jitter", "press_depth", "depth_jitter",
                "settle_exclusion", "contact_torque_eps", "write_all_traces"});
    if (j.contains("objects")) {
        const auto& arr = j.at("objects");
        if (!arr.is_array()) bad(path + "/objects", "expected an array");
        c.objects.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            plant::ContactObject o;
            parse_object(arr[i], o, fmt::format("{}/objects[{}]", path, i));
            c.objects.push_back(o);
        }
    }
    opt(j, "trials_per_object", c.trials_per_object, path);
    opt(j, "trial_duration", c.trial_duration, path);
    if (j.contains("admittance")) parse_admittance(j.at("admittance"), c.admittance, path + "/admittance");
    if (j.contains("contact_stop")) {
        parse_contact_stop(j.at("contact_stop"), c.contact_stop, path + "/contact_stop");
    }
    opt(j, "start_pos", c.start_pos, path);
    opt(j, "approach_speed", c.approach_speed, path);
    opt(j, "speed_jitter", c.speed_jitter, path);
    opt(j, "press_depth", c.press_depth, path);
    opt(j, "depth_jitter", c.depth_jitter, path);
    opt(j, "settle_exclusion", c.settle_exclusion, path);
    opt(j, "contact_torque_eps", c.contact_torque_eps, path);
    opt(j, "write_all_traces", c.write_all_traces, path);
}

void parse_force(const json& j, harness::ForceExperimentConfig& f, const std::string& path) {
    check_keys(j, path,
               {"object", "trial_duration", "press_depth", "approach_speed", "start_pos",
                "rig_reference_index_n", "rig_reference_thumb_n"});
    if (j.contains("object")) parse_object(j.at("object"), f.object, path + "/object");
    opt(j, "trial_duration", f.trial_duration, path);
    opt(j, "press_depth", f.press_depth, path);
    opt(j, "approach_speed", f.approach_speed, path);
    opt(j, "start_pos", f.start_pos, path);
    opt(j, "rig_reference_index_n", f.rig_reference_index_n, path);
    opt(j, "rig_reference_thumb_n", f.rig_reference_thumb_n, path);
}

// ---- serialization ---------------------------------------------------------

json dump_routing(const geometry::TendonRouting& r) {
    return {{"pulley_offset_len", r.pulley_offset_len},
            {"anchor_offset_len", r.anchor_offset_len},
            {"anchor_angle", r.anchor_angle},
            {"pulley_angle", r.pulley_angle},
            {"pulley_radius", r.pulley_radius}};
}

json dump_plant(const plant::PlantParams& p) {
    return {{"link_inertia", p.link_inertia},
            {"viscous_friction", p.viscous_friction},
            {"coulomb_friction", p.coulomb_friction},
            {"coulomb_smoothing_vel", p.coulomb_smoothing_vel},
            {"temp_viscous_coeff", p.temp_viscous_coeff},
            {"weight_mass", p.weight_mass},
            {"weight_arm", p.weight_arm},
            {"gravity", p.gravity},
            {"return_spring_stiffness", p.return_spring_stiffness},
            {"fingertip_lever", p.fingertip_lever},
            {"tension_limit", p.tension_limit},
            {"gear_ratio", p.gear_ratio},
            {"capstan_radius", p.capstan_radius},
            {"stop_lo", p.stop_lo},
            {"stop_hi", p.stop_hi}};
}

json dump_muscle(const muscle::MuscleParams& m) {
    return {{"current_gain", m.current_gain}, {"kp", m.kp},
            {"kd1", m.kd1},                   {"kd2", m.kd2},
            {"ks", m.ks},                     {"spring_rest_len", m.spring_rest_len}};
}

json dump_pid(const control::PidParams& p) {
    return {{"kp", p.kp}, {"ki", p.ki}, {"kd", p.kd}, {"integral_limit", p.integral_limit}};
}

json dump_motion(const datagen::CollectionMotion& m) {
    return {{"q_low", m.q_low},
            {"q_high", m.q_high},
            {"hold_time", m.hold_time},
            {"settle_time", m.settle_time},
            {"pid", dump_pid(m.pid)},
            {"vel_damping", m.vel_damping}};
}

json dump_rig(const datagen::RigConfig& r) {
    return {{"plant", dump_plant(r.plant)},
            {"routing", dump_routing(r.routing)},
            {"muscle", dump_muscle(r.muscle)},
            {"motion", dump_motion(r.motion)},
            {"base_cable_len", r.base_cable_len}};
}

json dump_object(const plant::ContactObject& o) {
    return {{"label", o.label},
            {"stiffness", o.stiffness},
            {"damping", o.damping},
            {"engage_angle", o.engage_angle}};
}

json dump_config(const RunConfig& cfg) {
    json j;
    j["format_version"] = cfg.format_version;
    j["seed"] = cfg.seed;
    j["timings"] = {{"control_rate", cfg.timings.control_rate},
                    {"plant_rate", cfg.timings.plant_rate}};
    j["noise"] = {{"current_noise_std", cfg.noise.current_noise_std},
                  {"encoder_noise_std", cfg.noise.encoder_noise_std},
                  {"velocity_noise_factor", cfg.noise.velocity_noise_factor},
                  {"temperature_noise_std", cfg.noise.temperature_noise_std},
                  {"torque_label_noise_std", cfg.noise.torque_label_noise_std},
                  {"disturbance_torque_std", cfg.noise.disturbance_torque_std},
                  {"disturbance_corr_time", cfg.noise.disturbance_corr_time}};
    j["protocol"] = {{"load_min", cfg.protocol.load_min},
                     {"load_max", cfg.protocol.load_max},
                     {"load_step", cfg.protocol.load_step},
                     {"temperatures", cfg.protocol.temperatures},
                     {"duration_per_cell", cfg.protocol.duration_per_cell},
                     {"repetitions", cfg.protocol.repetitions}};
    json joints = json::array();
    for (const auto& joint : cfg.joints) {
        joints.push_back({{"name", joint.name}, {"rig", dump_rig(joint.rig)}});
    }
    j["joints"] = joints;
    j["fit"] = {{"restarts", cfg.fit.restarts},
                {"max_iterations", cfg.fit.max_iterations},
                {"tol", cfg.fit.tol},
                {"train_cap", cfg.fit.train_cap},
                {"hyperopt_cap", cfg.fit.hyperopt_cap},
                {"ard", cfg.fit.ard}};
    j["test_fraction"] = cfg.test_fraction;
    json objs = json::array();
    for (const auto& o : cfg.compare.objects) objs.push_back(dump_object(o));
    j["compare"] = {{"objects", objs},
                    {"trials_per_object", cfg.compare.trials_per_object},
                    {"trial_duration", cfg.compare.trial_duration},
                    {"admittance",
                     {{"virtual_inertia", cfg.compare.admittance.virtual_inertia},
                      {"virtual_damping", cfg.compare.admittance.virtual_damping},
                      {"virtual_stiffness", cfg.compare.admittance.virtual_stiffness},
                      {"load_torque_offset", cfg.compare.admittance.load_torque_offset}}},
                    {"contact_stop",
                     {{"torque_threshold", cfg.compare.contact_stop.torque_threshold},
                      {"hysteresis", cfg.compare.contact_stop.hysteresis},
                      {"release_dwell", cfg.compare.contact_stop.release_dwell}}},
                    {"start_pos", cfg.compare.start_pos},
                    {"approach_speed", cfg.compare.approach_speed},
                    {"speed_jitter", cfg.compare.speed_jitter},
                    {"press_depth", cfg.compare.press_depth},
                    {"depth_jitter", cfg.compare.depth_jitter},
                    {"settle_exclusion", cfg.compare.settle_exclusion},
                    {"contact_torque_eps", cfg.compare.contact_torque_eps},
                    {"write_all_traces", cfg.compare.write_all_traces}};
    j["force"] = {{"object", dump_object(cfg.force.object)},
                  {"trial_duration", cfg.force.trial_duration},
                  {"press_depth", cfg.force.press_depth},
                  {"approach_speed", cfg.force.approach_speed},
                  {"start_pos", cfg.force.start_pos},
                  {"rig_reference_index_n", cfg.force.rig_reference_index_n},
                  {"rig_reference_thumb_n", cfg.force.rig_reference_thumb_n}};
    return j;
}

}  // namespace

void RunConfig::validate() const {
    if (format_version != kFormatVersion) {
        throw ConfigError(fmt::format(
            "config: format_version {} is not supported (expected {})", format_version,
            kFormatVersion));
    }
    timings.validate();
    noise.validate();
    protocol.validate();
    if (joints.empty()) {
        throw ConfigError("config: at least one joint is required");
    }
    std::set<std::string> names;
    for (const auto& j : joints) {
        j.validate();
        if (!names.insert(j.name).second) {
            throw ConfigError(fmt::format("config: duplicate joint name '{}'", j.name));
        }
    }
    fit.validate();
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError(fmt::format(
            "config: test_fraction must be in (0, 1), got {}", test_fraction));
    }
    compare.validate();
    force.validate();
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.seed = 1;

    datagen::RigConfig base;
    base.plant.link_inertia = 2e-4;
    base.plant.viscous_friction = 5e-3;
    base.plant.coulomb_friction = 2e-3;
    base.plant.weight_mass = 0.0;
    base.plant.weight_arm = 0.08;
    base.plant.stop_lo = -0.2;
    base.plant.stop_hi = 1.8;
    base.muscle.current_gain = 40.0;
    base.muscle.kp = 300.0;
    base.muscle.kd1 = 5.0;
    base.muscle.kd2 = 50.0;
    base.muscle.ks = 200.0;
    base.muscle.spring_rest_len = 0.03;
    base.motion.q_low = 0.15;
    base.motion.q_high = 1.05;
    base.motion.hold_time = 0.5;
    base.motion.settle_time = 1.5;
    base.motion.pid = control::PidParams{3.0, 10.0, 0.0, 2.0};
    base.motion.vel_damping = 0.25;

    struct JointSpec {
        const char* name;
        double lp, la, aa, pa, rc;
        double inertia, viscous, coulomb;
    };
    // Routing and friction vary along the chain: thumb joints carry more
    // structure and run with noticeably higher friction than the index chain.
    const JointSpec specs[] = {
        {"index-pip", 0.012, 0.018, 0.25, 0.15, 0.0030, 1.5e-4, 4.0e-3, 1.5e-3},
        {"index-mcp", 0.014, 0.020, 0.30, 0.10, 0.0035, 2.5e-4, 5.0e-3, 2.0e-3},
        {"thumb-mcp-pitch", 0.013, 0.019, 0.20, 0.20, 0.0030, 2.0e-4, 6.0e-3, 2.5e-3},
        {"thumb-mcp-roll", 0.015, 0.021, 0.35, 0.12, 0.0040, 3.0e-4, 7.0e-3, 3.0e-3},
        {"thumb-cmc-roll", 0.016, 0.024, 0.30, 0.18, 0.0040, 4.0e-4, 9.0e-3, 4.0e-3},
        {"thumb-cmc-pitch", 0.017, 0.025, 0.28, 0.20, 0.0045, 4.5e-4, 1.0e-2, 4.5e-3},
    };
    for (const auto& s : specs) {
        harness::JointConfig jc;
        jc.name = s.name;
        jc.rig = base;
        jc.rig.routing.pulley_offset_len = s.lp;
        jc.rig.routing.anchor_offset_len = s.la;
        jc.rig.routing.anchor_angle = s.aa;
        jc.rig.routing.pulley_angle = s.pa;
        jc.rig.routing.pulley_radius = s.rc;
        jc.rig.plant.link_inertia = s.inertia;
        jc.rig.plant.viscous_friction = s.viscous;
        jc.rig.plant.coulomb_friction = s.coulomb;
        cfg.joints.push_back(jc);
    }

    // Hard to soft; the contact spring spans three decades.
    cfg.compare.objects = {
        {"wood-block", 50000.0, 1.5, 0.6},
        {"glass-bottle", 8000.0, 2.4, 0.6},
        {"ceramic-cup", 5000.0, 1.4, 0.6},
        {"fruit", 1500.0, 0.8, 0.6},
        {"tissue-box", 400.0, 0.4, 0.6},
        {"plush-toy", 100.0, 0.2, 0.6},
    };

    cfg.protocol.seed = cfg.seed;
    cfg.fit.seed = cfg.seed;
    cfg.compare.seed = cfg.seed;
    cfg.force.seed = cfg.seed;
    for (auto& joint : cfg.joints) {
        joint.rig.timings = cfg.timings;
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open config '{}'", path.string()));
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
    }

    RunConfig cfg = default_config();
    const std::string root = "";
    check_keys(j, "/",
               {"format_version", "seed", "timings", "noise", "protocol", "joints", "fit",
                "test_fraction", "compare", "force"});
    req(j, "format_version", cfg.format_version, root);
    req(j, "seed", cfg.seed, root);
    if (j.contains("timings")) parse_timings(j.at("timings"), cfg.timings, "/timings");
    if (j.contains("noise")) parse_noise(j.at("noise"), cfg.noise, "/noise");
    if (j.contains("protocol")) parse_protocol(j.at("protocol"), cfg.protocol, "/protocol");
    if (j.contains("joints")) {
        const auto& arr = j.at("joints");
        if (!arr.is_array()) bad("/joints", "expected an array");
        datagen::RigConfig base_rig = cfg.joints[0].rig;
        cfg.joints.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string path_i = fmt::format("/joints[{}]", i);
            check_keys(arr[i], path_i, {"name", "rig"});
            harness::JointConfig jc;
            jc.rig = base_rig;
            req(arr[i], "name", jc.name, path_i);
            if (arr[i].contains("rig")) parse_rig(arr[i].at("rig"), jc.rig, path_i + "/rig");
            cfg.joints.push_back(jc);
        }
    }
    if (j.contains("fit")) parse_fit(j.at("fit"), cfg.fit, "/fit");
    opt(j, "test_fraction", cfg.test_fraction, root);
    if (j.contains("compare")) parse_compare(j.at("compare"), cfg.compare, "/compare");
    if (j.contains("force")) parse_force(j.at("force"), cfg.force, "/force");

    // One seed drives every stochastic component.
    cfg.protocol.seed = cfg.seed;
    cfg.fit.seed = cfg.seed;
    cfg.compare.seed = cfg.seed;
    cfg.force.seed = cfg.seed;

    // Joint rigs share the run-wide loop rates.
    for (auto& joint : cfg.joints) {
        joint.rig.timings = cfg.timings;
    }

    cfg.validate();
    return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
    return dump_config(cfg).dump(1);
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    }
    out << config_to_json(cfg) << '\n';
    out.flush();
    if (!out) {
        throw IoError(fmt::format("write to '{}' failed", path.string()));
    }
}

std::string config_digest(const RunConfig& cfg) {
    std::string s = config_to_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace fingersim::config

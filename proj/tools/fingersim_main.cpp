// Command-line front end: data generation, model training/evaluation, the
// controller comparison, the fingertip-force experiment, and a moment-arm
// sweep utility.
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fingersim/config.hpp"
#include "fingersim/csv_io.hpp"
#include "fingersim/datagen.hpp"
#include "fingersim/errors.hpp"
#include "fingersim/exec.hpp"
#include "fingersim/geometry.hpp"
#include "fingersim/gpr.hpp"
#include "fingersim/harness.hpp"

namespace fs = std::filesystem;
using namespace fingersim;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 0;
    bool serial = false;

    ExecPolicy policy() const { return serial ? ExecPolicy::Serial : ExecPolicy::Parallel; }
};

config::RunConfig load_effective_config(const GlobalOpts& g) {
    config::RunConfig cfg =
        g.config_path.empty() ? config::default_config() : config::load_config(g.config_path);
    if (g.seed_given) {
        cfg.seed = g.seed;
        cfg.protocol.seed = g.seed;
        cfg.fit.seed = g.seed;
        cfg.compare.seed = g.seed;
        cfg.force.seed = g.seed;
    }
    cfg.fit.policy = g.policy();
    cfg.validate();
    return cfg;
}

std::vector<harness::JointConfig> select_joints(const config::RunConfig& cfg,
                                                const std::string& name) {
    if (name.empty() || name == "all") return cfg.joints;
    for (const auto& j : cfg.joints) {
        if (j.name == name) return {j};
    }
    std::string known;
    for (const auto& j : cfg.joints) {
        if (!known.empty()) known += ", ";
        known += j.name;
    }
    throw ConfigError(fmt::format("unknown joint '{}' (configured joints: {})", name, known));
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError(fmt::format("cannot create directory '{}': {}", dir.string(), ec.message()));
    }
}

int cmd_config(const GlobalOpts& g, const std::string& out) {
    config::RunConfig cfg = load_effective_config(g);
    if (out.empty()) {
        fmt::print("{}\n", config::config_to_json(cfg));
    } else {
        config::save_config(out, cfg);
        fmt::print("wrote {}\n", out);
    }
    fmt::print("config digest: {}\n", config::config_digest(cfg));
    return 0;
}

int cmd_datagen(const GlobalOpts& g, const std::string& joint, const std::string& out_dir) {
    config::RunConfig cfg = load_effective_config(g);
    ensure_dir(out_dir);
    for (const auto& jc : select_joints(cfg, joint)) {
        auto rows = datagen::run_calibration(cfg.protocol, jc.rig, cfg.noise, g.policy());
        fs::path out = fs::path(out_dir) / (jc.name + "_samples.csv");
        datagen::write_csv(out, rows);
        fmt::print("{}: {} rows -> {}\n", jc.name, rows.size(), out.string());
    }
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& joint, const std::string& out_dir,
              int grasp_trials, double grasp_duration) {
    config::RunConfig cfg = load_effective_config(g);
    ensure_dir(out_dir);
    harness::EstimationConfig ec;
    ec.protocol = cfg.protocol;
    ec.noise = cfg.noise;
    ec.fit = cfg.fit;
    ec.test_fraction = cfg.test_fraction;
    if (grasp_trials > 0) {
        ec.grasp_objects = cfg.compare.objects;
        ec.grasp_trials = grasp_trials;
        ec.grasp_duration = grasp_duration;
    }
    auto outcomes = harness::run_estimation_experiment(select_joints(cfg, joint), ec,
                                                       fs::path(out_dir), g.policy());
    fmt::print("{:<18} {:>8} {:>8} {:>12} {:>12} {:>8}\n", "joint", "train", "test", "lml",
               "mse", "r2");
    for (const auto& o : outcomes) {
        fmt::print("{:<18} {:>8} {:>8} {:>12.2f} {:>12.3e} {:>8.4f}\n", o.joint, o.rows_train,
                   o.rows_test, o.train_lml, o.metrics.mse, o.metrics.r2);
    }
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& model_path, const std::string& data_path) {
    auto model = gpr::GprModel::load(model_path);
    auto rows = datagen::read_csv(data_path);
    auto metrics = gpr::evaluate(model, rows, g.policy());
    fmt::print("rows: {}\nmse: {:.6e}\nr2: {:.6f}\n", metrics.n, metrics.mse, metrics.r2);
    return 0;
}

int cmd_compare(const GlobalOpts& g, const std::string& joint, const std::string& model_path,
                const std::string& out_dir, std::string report_path) {
    config::RunConfig cfg = load_effective_config(g);
    auto joints = select_joints(cfg, joint.empty() ? cfg.joints.front().name : joint);
    const harness::JointConfig& jc = joints.front();
    ensure_dir(out_dir);

    std::optional<gpr::GprModel> model;
    if (!model_path.empty()) {
        model = gpr::GprModel::load(model_path);
    } else {
        fmt::print("note: no model given, controllers consume the exact external torque\n");
    }
    auto report = harness::run_grasp_comparison(jc, cfg.compare, cfg.noise,
                                                model ? &*model : nullptr, fs::path(out_dir),
                                                g.policy());
    report.config_digest = config::config_digest(cfg);
    if (report_path.empty()) report_path = (fs::path(out_dir) / "compare_report.json").string();
    harness::write_report(report_path, report);

    fmt::print("{:<14} {:>10} {:>12} {:>12} {:>10} {:>7}\n", "object", "stiffness", "effort_pid",
               "effort_adm", "reduction", "trials");
    for (const auto& o : report.objects) {
        fmt::print("{:<14} {:>10.0f} {:>12.4f} {:>12.4f} {:>9.1f}% {:>7}\n", o.label, o.stiffness,
                   o.effort_pid, o.effort_admittance, o.reduction_pct, o.trials_valid);
    }
    fmt::print("mean control-effort reduction: {:.1f}%\nreport: {}\n", report.mean_reduction_pct,
               report_path);
    return 0;
}

int cmd_force(const GlobalOpts& g, const std::string& joint, const std::string& model_path,
              const std::string& out_dir) {
    config::RunConfig cfg = load_effective_config(g);
    auto joints = select_joints(cfg, joint.empty() ? cfg.joints.front().name : joint);
    ensure_dir(out_dir);
    auto model = gpr::GprModel::load(model_path);
    auto metrics =
        harness::run_force_experiment(joints.front(), cfg.force, cfg.noise, &model,
                                      fs::path(out_dir));
    fmt::print("samples used: {} (excluded pre-contact: {})\n", metrics.n_used,
               metrics.n_excluded);
    fmt::print("mean |force error|: {:.4f} N\n", metrics.mean_abs_err);
    fmt::print("peak |force error|: {:.4f} N\n", metrics.peak_abs_err);
    fmt::print("force mse: {:.6f} N^2\n", metrics.mse);
    fmt::print("physical-rig reference: index {:.3f} N, thumb {:.3f} N\n",
               cfg.force.rig_reference_index_n, cfg.force.rig_reference_thumb_n);
    return 0;
}

int cmd_moment_arm(const geometry::TendonRouting& routing, double q_min, double q_max, int steps,
                   const std::string& out, bool verify) {
    routing.validate();
    if (steps < 1) throw ConfigError("moment-arm: --steps must be >= 1");
    if (q_max < q_min) throw ConfigError("moment-arm: --q-max must be >= --q-min");

    csvio::Table table;
    table.header = {"joint_pos", "chord_len", "anchor_vertex_angle", "wrap_angle",
                    "cable_angle", "moment_arm"};
    if (verify) {
        table.header.push_back("sine_rule_arm");
        table.header.push_back("abs_diff");
    }
    int skipped = 0;
    for (int i = 0; i < steps; ++i) {
        double q = steps == 1 ? q_min : q_min + (q_max - q_min) * i / (steps - 1);
        try {
            auto res = geometry::moment_arm(routing, q);
            std::vector<double> row = {q,          res.chord_len,  res.anchor_vertex_angle,
                                       res.wrap_angle, res.cable_angle, res.moment_arm};
            if (verify) {
                auto alt = geometry::moment_arm_sine_rule(routing, q);
                row.push_back(alt.moment_arm);
                row.push_back(std::abs(alt.moment_arm - res.moment_arm));
            }
            table.rows.push_back(std::move(row));
        } catch (const NumericError& e) {
            ++skipped;
            fmt::print(stderr, "infeasible at joint_pos {:.6f}: {}\n", q, e.what());
        }
    }
    csvio::write_table(out, table);
    fmt::print("wrote {} rows to {}", table.rows.size(), out);
    if (skipped > 0) fmt::print(" ({} infeasible angles skipped)", skipped);
    fmt::print("\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tendon-driven finger: simulation, torque estimation, and control experiments"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON run configuration (defaults are built in)");
    app.add_option("--seed", g.seed, "override the run seed")->each([&g](const std::string&) {
        g.seed_given = true;
    });
    app.add_option("--jobs", g.jobs, "cap worker threads (0 = all cores)");
    app.add_flag("--serial", g.serial, "force the serial execution path");

    std::string joint, out_dir = "out", model_path, data_path, report_path, out_file;

    auto* c_config = app.add_subcommand("config", "print or write the effective configuration");
    c_config->add_option("--out", out_file, "write the config to this file instead of stdout");

    auto* c_datagen =
        app.add_subcommand("datagen", "run the calibration protocol and write sample CSVs");
    c_datagen->add_option("--joint", joint, "joint name (default: all)");
    c_datagen->add_option("--out-dir", out_dir, "output directory (default: out)");

    auto* c_train = app.add_subcommand(
        "train", "generate calibration data, fit the torque estimator, report held-out metrics");
    c_train->add_option("--joint", joint, "joint name (default: all)");
    c_train->add_option("--out-dir", out_dir, "output directory for samples and models");
    int grasp_trials = 0;
    double grasp_duration = 4.0;
    c_train->add_option("--grasp-trials", grasp_trials,
                        "augment the corpus with this many grasp closes per configured object "
                        "(recommended for models feeding the grasp controllers)");
    c_train->add_option("--grasp-duration", grasp_duration, "seconds per augmentation grasp");

    auto* c_eval = app.add_subcommand("eval", "evaluate a saved model on a sample CSV");
    c_eval->add_option("--model", model_path, "model JSON file")->required();
    c_eval->add_option("--data", data_path, "sample CSV file")->required();

    auto* c_compare = app.add_subcommand(
        "compare", "grasp trials under PID vs. admittance control; writes a JSON report");
    c_compare->add_option("--joint", joint, "joint name (default: first configured)");
    c_compare->add_option("--model", model_path,
                          "torque-estimator model JSON (default: exact torque)");
    c_compare->add_option("--out-dir", out_dir, "output directory for traces and the report");
    c_compare->add_option("--report", report_path, "report path (default: <out-dir>/compare_report.json)");

    auto* c_force = app.add_subcommand(
        "force-exp", "press against a target and compare estimated vs. true fingertip force");
    c_force->add_option("--joint", joint, "joint name (default: first configured)");
    c_force->add_option("--model", model_path, "torque-estimator model JSON")->required();
    c_force->add_option("--out-dir", out_dir, "output directory for the force trace");

    geometry::TendonRouting routing{0.015, 0.02, 0.3, 0.1, 0.003};
    double q_min = -0.2, q_max = 1.8;
    int steps = 101;
    bool verify = false;
    std::string ma_out = "moment_arm.csv";
    auto* c_ma = app.add_subcommand("moment-arm", "sweep the tendon moment arm over joint angle");
    c_ma->add_option("--pulley-offset", routing.pulley_offset_len, "pulley center distance [m]");
    c_ma->add_option("--anchor-offset", routing.anchor_offset_len, "anchor distance [m]");
    c_ma->add_option("--anchor-angle", routing.anchor_angle, "anchor mount angle [rad]");
    c_ma->add_option("--pulley-angle", routing.pulley_angle, "pulley mount angle [rad]");
    c_ma->add_option("--radius", routing.pulley_radius, "pulley radius [m]");
    c_ma->add_option("--q-min", q_min, "sweep start [rad]");
    c_ma->add_option("--q-max", q_max, "sweep end [rad]");
    c_ma->add_option("--steps", steps, "number of sweep points");
    c_ma->add_option("--out", ma_out, "output CSV path");
    c_ma->add_flag("--verify", verify,
                   "also compute the angle-chain variant and emit the difference column");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (g.jobs > 0) set_thread_cap(g.jobs);
        if (*c_config) return cmd_config(g, out_file);
        if (*c_datagen) return cmd_datagen(g, joint, out_dir);
        if (*c_train) return cmd_train(g, joint, out_dir, grasp_trials, grasp_duration);
        if (*c_eval) return cmd_eval(g, model_path, data_path);
        if (*c_compare) return cmd_compare(g, joint, model_path, out_dir, report_path);
        if (*c_force) return cmd_force(g, joint, model_path, out_dir);
        if (*c_ma) return cmd_moment_arm(routing, q_min, q_max, steps, ma_out, verify);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fingersim/harness.hpp"

namespace fingersim::config {

inline constexpr int kFormatVersion = 1;

// Whole-run configuration consumed by the CLI.  The JSON file mirrors this
// structure; only `format_version` and `seed` are required, everything else
// falls back to the defaults below.  Unknown keys are rejected with their
// JSON path so typos cannot silently disable an option.
struct RunConfig {
    int format_version = kFormatVersion;
    std::uint64_t seed = 0;

    plant::SimTimings timings;
    datagen::NoiseModel noise;
    datagen::CalibrationProtocol protocol;
    std::vector<harness::JointConfig> joints;
    gpr::FitOptions fit;
    double test_fraction = 0.2;
    harness::CompareConfig compare;
    harness::ForceExperimentConfig force;

    void validate() const;
};

// The stock six-joint, six-object setup used by the experiments and tests.
RunConfig default_config();

// Reads and strictly validates a config file.  Missing optional sections use
// defaults; unknown keys raise ConfigError naming the path.
RunConfig load_config(const std::filesystem::path& path);

// Canonical serialization (sorted keys, shortest round-trip numbers).
void save_config(const std::filesystem::path& path, const RunConfig& cfg);
std::string config_to_json(const RunConfig& cfg);

// FNV-1a hash of the canonical serialization, as fixed-width hex.  Stamped
// into reports so results can be traced back to the exact configuration.
std::string config_digest(const RunConfig& cfg);

}  // namespace fingersim::config

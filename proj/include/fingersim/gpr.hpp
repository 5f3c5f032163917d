#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fingersim/bands.hpp"
#include "fingersim/errors.hpp"
#include "fingersim/exec.hpp"
#include "fingersim/kernels.hpp"

namespace fingersim::gpr {

inline constexpr int kFeatureDim = 6;

// Column order of every sample table in the project (CSV files, model files,
// in-memory matrices).
inline constexpr std::array<const char*, kFeatureDim> kFeatureNames = {
    "motor_current", "motor_pos", "motor_vel", "joint_pos", "joint_vel", "temperature",
};
inline constexpr const char* kTargetName = "torque";

// Sanity band for the temperature feature: see fingersim/bands.hpp.

struct SampleRecord {
    std::array<double, kFeatureDim> features{};  // ordered as kFeatureNames
    double torque = 0.0;                         // externally applied joint torque [Nm]
};

// Throws ValidationError naming `context` (e.g. "row 17") on non-finite
// entries or an out-of-band temperature.
void validate_record(const SampleRecord& rec, const std::string& context);

struct FitOptions {
    int restarts = 8;              // hyperparameter search restarts
    int max_iterations = 500;      // simplex iterations per restart
    double tol = 1e-8;             // simplex convergence tolerance
    std::size_t train_cap = 2000;  // max training rows kept (seeded uniform subsample)
    std::size_t hyperopt_cap = 320;  // max rows used inside the search objective
    std::uint64_t seed = 0;        // subsampling + restart jitter seed
    bool ard = false;              // per-dimension length scales (experimental)
    ExecPolicy policy = ExecPolicy::Serial;

    void validate() const;
};

struct RestartRecord {
    kernels::KernelParams params;  // where the restart ended
    double initial_lml = 0.0;      // objective at the start point
    double final_lml = 0.0;        // objective at the end point (>= initial)
    int iterations = 0;
    bool converged = false;
};

struct FitInfo {
    std::vector<RestartRecord> restarts;
    int best_restart = -1;
    double train_lml = 0.0;        // log marginal likelihood on the kept training set
    std::size_t n_total = 0;       // rows offered
    std::size_t n_train = 0;       // rows kept after the cap
    std::size_t n_hyperopt = 0;    // rows used in the search objective
    double jitter = 0.0;           // diagonal boost needed by the final factorization
};

struct Standardization {
    Eigen::RowVectorXd feature_mean;  // per-feature training mean
    Eigen::RowVectorXd feature_std;   // per-feature training std (1 for constant features)
    double target_mean = 0.0;
};

// Exact Gaussian-process regressor with the kernels::KernelParams covariance,
// trained by maximizing the log marginal likelihood with a multi-start
// simplex search over log-parameters.
class GprModel {
public:
    struct Prediction {
        double mean = 0.0;
        double variance = 0.0;  // includes the observation-noise term, >= 0
    };

    // Full pipeline: validate -> subsample to train_cap -> standardize ->
    // hyperparameter search -> final factorization.
    static GprModel fit(const std::vector<SampleRecord>& data, const FitOptions& opts);

    // Conditions on the given rows with fixed hyperparameters (no search).
    // With standardize=false the raw feature/target values are used as-is,
    // which makes the model directly comparable to closed-form references.
    static GprModel from_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const kernels::KernelParams& kp, bool standardize = true,
                              ExecPolicy policy = ExecPolicy::Serial);

    Prediction predict(const std::array<double, kFeatureDim>& features) const;

    // Batch prediction over the rows of X (raw feature space).  Serial and
    // Parallel are bit-identical.  `variance` may be null when only means are
    // needed (the evaluation path).
    void predict_batch(const Eigen::MatrixXd& X, Eigen::VectorXd& mean,
                       Eigen::VectorXd* variance, ExecPolicy policy) const;

    // Log marginal likelihood of the training data under the stored
    // hyperparameters (same value FitInfo::train_lml reports after fit()).
    double log_marginal_likelihood() const;

    void save(const std::filesystem::path& path) const;
    static GprModel load(const std::filesystem::path& path);

    const kernels::KernelParams& params() const { return kp_; }
    const FitInfo& fit_info() const { return info_; }
    const Standardization& standardization() const { return stz_; }
    const Eigen::MatrixXd& train_inputs() const { return Xs_; }   // standardized
    const Eigen::VectorXd& train_targets() const { return yc_; }  // centered
    double jitter() const { return info_.jitter; }
    Eigen::Index train_size() const { return Xs_.rows(); }

private:
    GprModel() = default;
    void factorize(ExecPolicy policy);  // builds the covariance, Cholesky, weights

    Eigen::MatrixXd Xs_;      // standardized training inputs
    Eigen::VectorXd yc_;      // centered training targets
    Standardization stz_;
    kernels::KernelParams kp_;
    Eigen::MatrixXd L_;       // lower Cholesky factor of the training covariance
    Eigen::VectorXd alpha_;   // covariance^-1 * targets
    FitInfo info_;
};

// Log marginal likelihood of (X, y) under kp, computed from scratch with no
// standardization and no jitter.  Throws NumericError if the covariance is
// not positive definite.
double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const kernels::KernelParams& kp,
                               ExecPolicy policy = ExecPolicy::Serial);

struct EvalMetrics {
    double mse = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

// Mean-prediction error metrics on a held-out set.  Throws ValidationError if
// the test targets have zero variance (r2 undefined).
EvalMetrics evaluate(const GprModel& model, const std::vector<SampleRecord>& test,
                     ExecPolicy policy = ExecPolicy::Serial);

// Deterministic split into train/test by seeded uniform shuffle; test gets
// round(test_fraction * n) rows, both halves keep ascending original order.
struct SplitData {
    std::vector<SampleRecord> train;
    std::vector<SampleRecord> test;
};
SplitData split(const std::vector<SampleRecord>& data, double test_fraction,
                std::uint64_t seed);

}  // namespace fingersim::gpr

#include "fingersim/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "fingersim/nelder_mead.hpp"
#include "fingersim/num_io.hpp"
#include "fingersim/rng.hpp"

namespace fingersim::gpr {

namespace {

constexpr double kLogParamLimit = 30.0;       // |log parameter| bound in the search
constexpr double kStdFloor = 1e-12;           // constant-feature fallback
constexpr double kJitterStartRel = 1e-10;     // relative to the diagonal scale
constexpr double kJitterMaxRel = 1e-4;

double halton(int index, int base) {
    double f = 1.0;
    double r = 0.0;
    int i = index;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

// Log marginal likelihood given an already-factorized covariance.
double lml_from_factor(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& y) {
    Eigen::VectorXd alpha = llt.solve(y);
    double log_det_half = 0.0;
    const auto& L = llt.matrixLLT();
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        log_det_half += std::log(L(i, i));
    }
    double n = static_cast<double>(y.size());
    return -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

// Seeded uniform subsample without replacement: partial Fisher-Yates over the
// index vector, then ascending sort so downstream order is canonical.
std::vector<Eigen::Index> subsample_indices(Eigen::Index n, std::size_t cap, Rng& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    if (static_cast<std::size_t>(n) <= cap) return idx;
    for (std::size_t i = 0; i < cap; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(
                                static_cast<std::size_t>(n) - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct Matrices {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Matrices to_matrices(const std::vector<SampleRecord>& data,
                     const std::vector<Eigen::Index>& idx) {
    Matrices m;
    m.X.resize(static_cast<Eigen::Index>(idx.size()), kFeatureDim);
    m.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& rec = data[static_cast<std::size_t>(idx[i])];
        for (int j = 0; j < kFeatureDim; ++j) {
            m.X(static_cast<Eigen::Index>(i), j) = rec.features[static_cast<std::size_t>(j)];
        }
        m.y(static_cast<Eigen::Index>(i)) = rec.torque;
    }
    return m;
}

// theta layout: [log sigma_f, log length_scale, log sigma_n, log ard_0.. ]
kernels::KernelParams theta_to_params(const Eigen::VectorXd& theta, bool ard, int dim) {
    kernels::KernelParams kp;
    kp.sigma_f = std::exp(theta[0]);
    kp.length_scale = std::exp(theta[1]);
    kp.sigma_n = std::exp(theta[2]);
    if (ard) {
        kp.ard_scales.resize(static_cast<std::size_t>(dim));
        for (int j = 0; j < dim; ++j) {
            kp.ard_scales[static_cast<std::size_t>(j)] = std::exp(theta[3 + j]);
        }
    }
    return kp;
}

}  // namespace

void validate_record(const SampleRecord& rec, const std::string& context) {
    for (int j = 0; j < kFeatureDim; ++j) {
        if (!std::isfinite(rec.features[static_cast<std::size_t>(j)])) {
            throw ValidationError(fmt::format(
                "{}: feature '{}' is not finite ({})", context, kFeatureNames[static_cast<std::size_t>(j)],
                rec.features[static_cast<std::size_t>(j)]));
        }
    }
    if (!std::isfinite(rec.torque)) {
        throw ValidationError(fmt::format("{}: torque is not finite ({})", context, rec.torque));
    }
    double temp = rec.features[5];
    if (temp < kTemperatureSaneLo || temp > kTemperatureSaneHi) {
        throw ValidationError(fmt::format(
            "{}: temperature {} outside the sanity band [{}, {}]", context, temp,
            kTemperatureSaneLo, kTemperatureSaneHi));
    }
}

void FitOptions::validate() const {
    if (restarts < 1) {
        throw ValidationError(fmt::format("fit: restarts must be >= 1, got {}", restarts));
    }
    if (max_iterations < 1) {
        throw ValidationError(fmt::format("fit: max_iterations must be >= 1, got {}", max_iterations));
    }
    if (!(std::isfinite(tol) && tol > 0.0)) {
        throw ValidationError(fmt::format("fit: tol must be > 0, got {}", tol));
    }
    if (train_cap < 2) {
        throw ValidationError(fmt::format("fit: train_cap must be >= 2, got {}", train_cap));
    }
    if (hyperopt_cap < 2) {
        throw ValidationError(fmt::format("fit: hyperopt_cap must be >= 2, got {}", hyperopt_cap));
    }
}

void GprModel::factorize(ExecPolicy policy) {
    Eigen::MatrixXd M = kernels::training_covariance(Xs_, kp_, policy);
    const double diag_scale = kp_.sigma_f * kp_.sigma_f + kp_.sigma_n * kp_.sigma_n;

    double jitter = info_.jitter;  // pre-set by load(); 0 for a fresh fit
    bool fixed_jitter = jitter > 0.0;
    while (true) {
        Eigen::MatrixXd Mj = M;
        if (jitter > 0.0) {
            Mj.diagonal().array() += jitter;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(Mj);
        if (llt.info() == Eigen::Success) {
            L_ = llt.matrixLLT();
            alpha_ = llt.solve(yc_);
            info_.jitter = jitter;
            info_.train_lml = lml_from_factor(llt, yc_);
            return;
        }
        if (fixed_jitter) {
            throw NumericError(fmt::format(
                "training covariance is not positive definite with the stored jitter {}", jitter));
        }
        if (jitter == 0.0) {
            jitter = kJitterStartRel * diag_scale;
        } else {
            jitter *= 10.0;
        }
        if (jitter > kJitterMaxRel * diag_scale) {
            throw NumericError(fmt::format(
                "training covariance is not positive definite even with jitter {} "
                "(diagonal scale {}); hyperparameters are degenerate",
                jitter, diag_scale));
        }
    }
}

GprModel GprModel::from_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const kernels::KernelParams& kp, bool standardize,
                             ExecPolicy policy) {
    if (X.rows() != y.size()) {
        throw ValidationError(fmt::format(
            "from_data: {} input rows but {} targets", X.rows(), y.size()));
    }
    if (X.rows() < 1) {
        throw ValidationError("from_data: at least one training row is required");
    }
    kp.validate(X.cols());
    if (!X.allFinite() || !y.allFinite()) {
        throw ValidationError("from_data: inputs and targets must be finite");
    }

    GprModel m;
    m.kp_ = kp;
    if (standardize) {
        m.stz_.feature_mean = X.colwise().mean();
        Eigen::RowVectorXd var =
            (X.rowwise() - m.stz_.feature_mean).array().square().colwise().mean();
        m.stz_.feature_std = var.array().sqrt();
        for (Eigen::Index j = 0; j < m.stz_.feature_std.size(); ++j) {
            if (m.stz_.feature_std[j] < kStdFloor) m.stz_.feature_std[j] = 1.0;
        }
        m.stz_.target_mean = y.mean();
        m.Xs_ = (X.rowwise() - m.stz_.feature_mean).array().rowwise() /
                m.stz_.feature_std.array();
        m.yc_ = y.array() - m.stz_.target_mean;
    } else {
        m.stz_.feature_mean = Eigen::RowVectorXd::Zero(X.cols());
        m.stz_.feature_std = Eigen::RowVectorXd::Ones(X.cols());
        m.stz_.target_mean = 0.0;
        m.Xs_ = X;
        m.yc_ = y;
    }
    m.info_.n_total = static_cast<std::size_t>(X.rows());
    m.info_.n_train = static_cast<std::size_t>(X.rows());
    m.info_.n_hyperopt = 0;
    m.info_.best_restart = -1;
    m.factorize(policy);
    return m;
}

GprModel GprModel::fit(const std::vector<SampleRecord>& data, const FitOptions& opts) {
    opts.validate();
    if (data.size() < 2) {
        throw ValidationError(fmt::format(
            "fit: at least 2 training rows are required, got {}", data.size()));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        validate_record(data[i], fmt::format("training row {}", i));
    }

    // Cap the kept training set (exact inference is cubic in it).
    Rng sub_rng(substream_seed(opts.seed, 0xA11));
    auto keep = subsample_indices(static_cast<Eigen::Index>(data.size()), opts.train_cap, sub_rng);
    Matrices train = to_matrices(data, keep);

    // Degenerate-data check: identical feature rows cannot be regressed.
    bool distinct = false;
    for (Eigen::Index i = 1; i < train.X.rows() && !distinct; ++i) {
        distinct = (train.X.row(i).array() != train.X.row(0).array()).any();
    }
    if (!distinct) {
        throw ValidationError("fit: all training feature rows are identical (degenerate data)");
    }

    GprModel m;
    m.stz_.feature_mean = train.X.colwise().mean();
    Eigen::RowVectorXd var =
        (train.X.rowwise() - m.stz_.feature_mean).array().square().colwise().mean();
    m.stz_.feature_std = var.array().sqrt();
    for (Eigen::Index j = 0; j < m.stz_.feature_std.size(); ++j) {
        if (m.stz_.feature_std[j] < kStdFloor) m.stz_.feature_std[j] = 1.0;
    }
    m.stz_.target_mean = train.y.mean();
    m.Xs_ = (train.X.rowwise() - m.stz_.feature_mean).array().rowwise() /
            m.stz_.feature_std.array();
    m.yc_ = train.y.array() - m.stz_.target_mean;

    double y_std = std::sqrt(m.yc_.array().square().mean());
    if (y_std < kStdFloor) y_std = kStdFloor;

    // Hyperparameter search on a further-capped subset: the objective is
    // cubic, and the surface from a few hundred rows matches the full one
    // closely enough to place the optimum.
    Rng hyper_rng(substream_seed(opts.seed, 0xB22));
    auto hyper_idx =
        subsample_indices(m.Xs_.rows(), std::min(opts.hyperopt_cap, opts.train_cap), hyper_rng);
    Eigen::MatrixXd Xh(static_cast<Eigen::Index>(hyper_idx.size()), kFeatureDim);
    Eigen::VectorXd yh(static_cast<Eigen::Index>(hyper_idx.size()));
    for (std::size_t i = 0; i < hyper_idx.size(); ++i) {
        Xh.row(static_cast<Eigen::Index>(i)) = m.Xs_.row(hyper_idx[i]);
        yh(static_cast<Eigen::Index>(i)) = m.yc_(hyper_idx[i]);
    }
    Eigen::MatrixXd D2 = kernels::pairwise_sqdist(Xh, opts.policy);

    const int dim = opts.ard ? 3 + kFeatureDim : 3;
    const double nq = static_cast<double>(yh.size());
    auto objective = [&](const Eigen::VectorXd& theta) -> double {
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            if (std::abs(theta[k]) > kLogParamLimit) {
                return std::numeric_limits<double>::infinity();
            }
        }
        kernels::KernelParams kp = theta_to_params(theta, opts.ard, kFeatureDim);
        Eigen::MatrixXd M;
        if (opts.ard) {
            M = kernels::training_covariance(Xh, kp, ExecPolicy::Serial);
        } else {
            M = kernels::training_covariance_from_sqdist(D2, kp, ExecPolicy::Serial);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        if (llt.info() != Eigen::Success) {
            return std::numeric_limits<double>::infinity();
        }
        Eigen::VectorXd alpha = llt.solve(yh);
        double log_det_half = 0.0;
        const auto& L = llt.matrixLLT();
        for (Eigen::Index i = 0; i < L.rows(); ++i) {
            log_det_half += std::log(L(i, i));
        }
        double lml =
            -0.5 * yh.dot(alpha) - log_det_half - 0.5 * nq * std::log(2.0 * std::numbers::pi);
        return -lml;
    };

    // Fixed low-discrepancy start grid, scaled by the target spread.
    std::vector<Eigen::VectorXd> starts(static_cast<std::size_t>(opts.restarts));
    for (int r = 0; r < opts.restarts; ++r) {
        Eigen::VectorXd theta(dim);
        theta[0] = std::log(y_std) + (2.0 * halton(r + 1, 2) - 1.0) * std::log(3.0);
        theta[1] = (2.0 * halton(r + 1, 3) - 1.0) * std::log(4.0);
        theta[2] = std::log(0.2 * y_std) + (2.0 * halton(r + 1, 5) - 1.0) * std::log(5.0);
        for (int j = 3; j < dim; ++j) {
            theta[j] = (2.0 * halton(r + 1, 7 + 2 * (j - 3)) - 1.0) * std::log(2.0);
        }
        starts[static_cast<std::size_t>(r)] = std::move(theta);
    }

    opt::NelderMeadOptions nm_opts;
    nm_opts.max_iterations = opts.max_iterations;
    nm_opts.f_tol = opts.tol;
    nm_opts.x_tol = opts.tol;
    nm_opts.initial_step = 0.4;

    std::vector<RestartRecord> records(static_cast<std::size_t>(opts.restarts));
    std::vector<Eigen::VectorXd> finals(static_cast<std::size_t>(opts.restarts));
#pragma omp parallel for schedule(static) if (opts.policy == ExecPolicy::Parallel)
    for (int r = 0; r < opts.restarts; ++r) {
        double f0 = objective(starts[static_cast<std::size_t>(r)]);
        opt::NelderMeadResult res = opt::nelder_mead(objective, starts[static_cast<std::size_t>(r)], nm_opts);
        RestartRecord rec;
        rec.params = theta_to_params(res.x, opts.ard, kFeatureDim);
        rec.initial_lml = -f0;
        rec.final_lml = -res.fx;
        rec.iterations = res.iterations;
        rec.converged = res.converged;
        records[static_cast<std::size_t>(r)] = rec;
        finals[static_cast<std::size_t>(r)] = res.x;
    }

    int best = 0;
    for (int r = 1; r < opts.restarts; ++r) {
        if (records[static_cast<std::size_t>(r)].final_lml >
            records[static_cast<std::size_t>(best)].final_lml) {
            best = r;
        }
    }
    if (!std::isfinite(records[static_cast<std::size_t>(best)].final_lml)) {
        throw NumericError(
            "hyperparameter search failed: no restart reached a finite log marginal likelihood");
    }

    m.kp_ = theta_to_params(finals[static_cast<std::size_t>(best)], opts.ard, kFeatureDim);
    m.info_.restarts = std::move(records);
    m.info_.best_restart = best;
    m.info_.n_total = data.size();
    m.info_.n_train = static_cast<std::size_t>(m.Xs_.rows());
    m.info_.n_hyperopt = hyper_idx.size();
    m.factorize(opts.policy);
    return m;
}

GprModel::Prediction GprModel::predict(const std::array<double, kFeatureDim>& features) const {
    if (Xs_.cols() != kFeatureDim) {
        throw ValidationError(fmt::format(
            "predict: model was conditioned on {}-dimensional inputs, not the {}-feature schema",
            Xs_.cols(), kFeatureDim));
    }
    Eigen::RowVectorXd x(kFeatureDim);
    for (int j = 0; j < kFeatureDim; ++j) {
        double v = features[static_cast<std::size_t>(j)];
        if (!std::isfinite(v)) {
            throw ValidationError(fmt::format(
                "predict: feature '{}' is not finite ({})",
                kFeatureNames[static_cast<std::size_t>(j)], v));
        }
        x[j] = v;
    }
    Eigen::RowVectorXd xs =
        (x - stz_.feature_mean).array() / stz_.feature_std.array();

    const Eigen::Index n = Xs_.rows();
    Eigen::VectorXd kstar(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        kstar[i] = kernels::kernel_eval(kp_, xs, Xs_.row(i), false);
    }
    Prediction p;
    p.mean = kstar.dot(alpha_) + stz_.target_mean;
    Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(kstar);
    double var = kp_.sigma_f * kp_.sigma_f + kp_.sigma_n * kp_.sigma_n - v.squaredNorm();
    p.variance = var > 0.0 ? var : 0.0;
    return p;
}

void GprModel::predict_batch(const Eigen::MatrixXd& X, Eigen::VectorXd& mean,
                             Eigen::VectorXd* variance, ExecPolicy policy) const {
    if (X.cols() != Xs_.cols()) {
        throw ValidationError(fmt::format(
            "predict_batch: expected {} feature columns, got {}", Xs_.cols(), X.cols()));
    }
    if (!X.allFinite()) {
        throw ValidationError("predict_batch: query features must be finite");
    }
    const Eigen::Index nq = X.rows();
    const Eigen::Index n = Xs_.rows();
    mean.resize(nq);
    if (variance != nullptr) variance->resize(nq);

    const double prior_var = kp_.sigma_f * kp_.sigma_f + kp_.sigma_n * kp_.sigma_n;
#pragma omp parallel for schedule(static) if (policy == ExecPolicy::Parallel)
    for (Eigen::Index i = 0; i < nq; ++i) {
        Eigen::RowVectorXd xs =
            (X.row(i) - stz_.feature_mean).array() / stz_.feature_std.array();
        Eigen::VectorXd kstar(n);
        for (Eigen::Index t = 0; t < n; ++t) {
            kstar[t] = kernels::kernel_eval(kp_, xs, Xs_.row(t), false);
        }
        mean[i] = kstar.dot(alpha_) + stz_.target_mean;
        if (variance != nullptr) {
            Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(kstar);
            double var = prior_var - v.squaredNorm();
            (*variance)[i] = var > 0.0 ? var : 0.0;
        }
    }
}

double GprModel::log_marginal_likelihood() const { return info_.train_lml; }

void GprModel::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["format"] = "fingersim-gpr";
    j["format_version"] = 1;
    j["feature_dim"] = static_cast<int>(Xs_.cols());
    j["jitter"] = info_.jitter;
    j["kernel"] = {
        {"sigma_f", kp_.sigma_f},
        {"length_scale", kp_.length_scale},
        {"sigma_n", kp_.sigma_n},
        {"ard_scales", kp_.ard_scales},
    };
    j["standardization"] = {
        {"feature_mean", std::vector<double>(stz_.feature_mean.data(),
                                             stz_.feature_mean.data() + stz_.feature_mean.size())},
        {"feature_std", std::vector<double>(stz_.feature_std.data(),
                                            stz_.feature_std.data() + stz_.feature_std.size())},
        {"target_mean", stz_.target_mean},
    };
    // Element-wise copy: the matrix is column major, so a row's entries are
    // not contiguous in memory.
    std::vector<std::vector<double>> inputs(static_cast<std::size_t>(Xs_.rows()));
    for (Eigen::Index i = 0; i < Xs_.rows(); ++i) {
        auto& row = inputs[static_cast<std::size_t>(i)];
        row.resize(static_cast<std::size_t>(Xs_.cols()));
        for (Eigen::Index c = 0; c < Xs_.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = Xs_(i, c);
        }
    }
    j["inputs"] = inputs;
    j["targets"] = std::vector<double>(yc_.data(), yc_.data() + yc_.size());

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

GprModel GprModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("model file '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    try {
        if (j.at("format").get<std::string>() != "fingersim-gpr") {
            throw ValidationError(fmt::format(
                "model file '{}': unexpected format tag '{}'", path.string(),
                j.at("format").get<std::string>()));
        }
        if (j.at("format_version").get<int>() != 1) {
            throw ValidationError(fmt::format(
                "model file '{}': unsupported format_version {}", path.string(),
                j.at("format_version").get<int>()));
        }
        // The file records its own feature dimension (from_data accepts any);
        // the fixed-schema entry points check it again at call time.
        const int fd = j.at("feature_dim").get<int>();
        if (fd < 1) {
            throw ValidationError(fmt::format(
                "model file '{}': feature_dim must be >= 1, got {}", path.string(), fd));
        }
        const auto fdim = static_cast<std::size_t>(fd);

        GprModel m;
        const auto& jk = j.at("kernel");
        m.kp_.sigma_f = jk.at("sigma_f").get<double>();
        m.kp_.length_scale = jk.at("length_scale").get<double>();
        m.kp_.sigma_n = jk.at("sigma_n").get<double>();
        m.kp_.ard_scales = jk.at("ard_scales").get<std::vector<double>>();
        m.kp_.validate(fd);

        const auto& js = j.at("standardization");
        auto fmean = js.at("feature_mean").get<std::vector<double>>();
        auto fstd = js.at("feature_std").get<std::vector<double>>();
        if (fmean.size() != fdim || fstd.size() != fdim) {
            throw ValidationError(fmt::format(
                "model file '{}': standardization vectors must have {} entries",
                path.string(), fd));
        }
        m.stz_.feature_mean = Eigen::Map<Eigen::RowVectorXd>(fmean.data(), fd);
        m.stz_.feature_std = Eigen::Map<Eigen::RowVectorXd>(fstd.data(), fd);
        m.stz_.target_mean = js.at("target_mean").get<double>();

        auto inputs = j.at("inputs").get<std::vector<std::vector<double>>>();
        auto targets = j.at("targets").get<std::vector<double>>();
        if (inputs.empty() || inputs.size() != targets.size()) {
            throw ValidationError(fmt::format(
                "model file '{}': inputs ({}) and targets ({}) must be equal and non-empty",
                path.string(), inputs.size(), targets.size()));
        }
        m.Xs_.resize(static_cast<Eigen::Index>(inputs.size()), fd);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (inputs[i].size() != fdim) {
                throw ValidationError(fmt::format(
                    "model file '{}': input row {} has {} entries, expected {}",
                    path.string(), i, inputs[i].size(), fd));
            }
            m.Xs_.row(static_cast<Eigen::Index>(i)) =
                Eigen::Map<Eigen::RowVectorXd>(inputs[i].data(), fd);
        }
        m.yc_ = Eigen::Map<Eigen::VectorXd>(targets.data(),
                                            static_cast<Eigen::Index>(targets.size()));
        if (!m.Xs_.allFinite() || !m.yc_.allFinite()) {
            throw ValidationError(fmt::format(
                "model file '{}': non-finite training data", path.string()));
        }

        double jitter = j.at("jitter").get<double>();
        if (!(std::isfinite(jitter) && jitter >= 0.0)) {
            throw ValidationError(fmt::format(
                "model file '{}': jitter must be finite and >= 0, got {}", path.string(), jitter));
        }
        m.info_.jitter = jitter;
        m.info_.n_total = inputs.size();
        m.info_.n_train = inputs.size();
        m.info_.best_restart = -1;
        m.factorize(ExecPolicy::Serial);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format(
            "model file '{}' is malformed: {}", path.string(), e.what()));
    }
}

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const kernels::KernelParams& kp, ExecPolicy policy) {
    if (X.rows() != y.size() || X.rows() < 1) {
        throw ValidationError(fmt::format(
            "log_marginal_likelihood: {} rows vs {} targets", X.rows(), y.size()));
    }
    Eigen::MatrixXd M = kernels::training_covariance(X, kp, policy);
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
        throw NumericError(
            "log_marginal_likelihood: covariance is not positive definite for these "
            "hyperparameters");
    }
    return lml_from_factor(llt, y);
}

EvalMetrics evaluate(const GprModel& model, const std::vector<SampleRecord>& test,
                     ExecPolicy policy) {
    if (test.size() < 2) {
        throw ValidationError(fmt::format(
            "evaluate: at least 2 test rows are required, got {}", test.size()));
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        validate_record(test[i], fmt::format("test row {}", i));
    }
    std::vector<Eigen::Index> all(test.size());
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    Matrices m = to_matrices(test, all);

    Eigen::VectorXd mean;
    model.predict_batch(m.X, mean, nullptr, policy);

    double target_mean = m.y.mean();
    double sse = 0.0;
    double sst = 0.0;
    for (Eigen::Index i = 0; i < m.y.size(); ++i) {
        double e = m.y[i] - mean[i];
        sse += e * e;
        double d = m.y[i] - target_mean;
        sst += d * d;
    }
    // Constant targets leave only accumulation rounding in sst (~(eps*scale)^2
    // per row), so the degeneracy cut is relative to the target scale rather
    // than an exact zero test.
    const double scale = std::max(1.0, m.y.cwiseAbs().maxCoeff());
    if (sst <= static_cast<double>(m.y.size()) * 1e-24 * scale * scale) {
        throw ValidationError(
            "evaluate: test targets have (numerically) zero variance; the score is undefined");
    }
    EvalMetrics out;
    out.n = test.size();
    out.mse = sse / static_cast<double>(m.y.size());
    out.r2 = 1.0 - sse / sst;
    return out;
}

SplitData split(const std::vector<SampleRecord>& data, double test_fraction,
                std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ValidationError(fmt::format(
            "split: test_fraction must be in (0, 1), got {}", test_fraction));
    }
    if (data.size() < 2) {
        throw ValidationError(fmt::format("split: need at least 2 rows, got {}", data.size()));
    }
    std::size_t n = data.size();
    std::size_t n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(substream_seed(seed, 0x5711));
    for (std::size_t i = 0; i < n_test; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(test_idx.begin(), test_idx.end());

    SplitData out;
    out.test.reserve(n_test);
    out.train.reserve(n - n_test);
    std::size_t t = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (t < test_idx.size() && test_idx[t] == i) {
            out.test.push_back(data[i]);
            ++t;
        } else {
            out.train.push_back(data[i]);
        }
    }
    return out;
}

}  // namespace fingersim::gpr

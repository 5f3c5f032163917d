#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "fingersim/gpr.hpp"
#include "fingersim/rng.hpp"
#include "oracles.hpp"

using namespace fingersim;
using gpr::GprModel;
using gpr::SampleRecord;
using kernels::KernelParams;

namespace {

// Smooth synthetic target over the six features; only the first two carry
// signal so the fit has something to find and something to ignore.
double target_fn(const std::array<double, gpr::kFeatureDim>& f) {
    return std::sin(2.0 * f[0]) + 0.5 * f[1];
}

std::vector<SampleRecord> synthetic_records(int n, std::uint64_t seed, double noise_std) {
    Rng rng(seed);
    std::vector<SampleRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        SampleRecord rec;
        for (int j = 0; j < gpr::kFeatureDim; ++j) {
            rec.features[static_cast<std::size_t>(j)] = rng.uniform(0.0, 2.0);
        }
        rec.torque = target_fn(rec.features) + noise_std * rng.normal();
        out.push_back(rec);
    }
    return out;
}

gpr::FitOptions quick_fit_options(std::uint64_t seed) {
    gpr::FitOptions opt;
    opt.restarts = 4;
    opt.max_iterations = 120;
    opt.train_cap = 300;
    opt.hyperopt_cap = 96;
    opt.seed = seed;
    return opt;
}

struct RawData {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::vector<double>> Xv;
    std::vector<double> yv;
};

RawData random_raw(Rng& rng, int n, int d) {
    RawData out;
    out.X.resize(n, d);
    out.y.resize(n);
    out.Xv.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            double v = rng.uniform(-2.0, 2.0);
            out.X(i, j) = v;
            out.Xv[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
        }
        out.y(i) = rng.normal();
        out.yv.push_back(out.y(i));
    }
    return out;
}

}  // namespace

TEST_CASE("single-sample log marginal likelihood has a closed form") {
    // With one sample the covariance matrix is the scalar sigma_f^2 + sigma_n^2
    // and the likelihood reduces to one Gaussian density.
    KernelParams kp{1.5, 0.7, 0.3, {}};
    const double y0 = 0.8;
    Eigen::MatrixXd X(1, 2);
    X << 0.4, -1.0;
    Eigen::VectorXd y(1);
    y << y0;

    const double m = kp.sigma_f * kp.sigma_f + kp.sigma_n * kp.sigma_n;
    const double expected =
        -0.5 * y0 * y0 / m - 0.5 * std::log(m) - 0.5 * std::log(2.0 * std::numbers::pi);

    CHECK(std::abs(gpr::log_marginal_likelihood(X, y, kp) - expected) < 1e-12);

    GprModel model = GprModel::from_data(X, y, kp, /*standardize=*/false);
    CHECK(std::abs(model.log_marginal_likelihood() - expected) < 1e-12);
}

TEST_CASE("predictions and likelihood match the dense-inverse reference") {
    Rng rng(substream_seed(47, 1));
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(40));
        const int d = 1 + static_cast<int>(rng.below(6));
        RawData data = random_raw(rng, n, d);
        KernelParams kp{rng.uniform(0.5, 2.0), rng.uniform(0.4, 2.0), rng.uniform(0.05, 0.5), {}};

        GprModel model = GprModel::from_data(data.X, data.y, kp, /*standardize=*/false);
        testing::DenseGp ref(data.Xv, data.yv, kp);

        CAPTURE(trial);
        CAPTURE(n);
        CAPTURE(d);
        CHECK(std::abs(model.log_marginal_likelihood() - ref.log_marginal_likelihood()) < 1e-8);

        Eigen::MatrixXd Q(5, d);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < d; ++j) Q(i, j) = rng.uniform(-2.0, 2.0);
        }
        Eigen::VectorXd mean, var;
        model.predict_batch(Q, mean, &var, ExecPolicy::Serial);
        for (int i = 0; i < 5; ++i) {
            std::vector<double> q(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j) q[static_cast<std::size_t>(j)] = Q(i, j);
            CHECK(std::abs(mean(i) - ref.predict_mean(q)) < 1e-8);
            CHECK(std::abs(var(i) - ref.predict_variance(q)) < 1e-8);
        }
    }
}

TEST_CASE("predictive variance shrinks near training data and never goes negative") {
    Rng rng(substream_seed(47, 2));
    RawData data = random_raw(rng, 30, 3);
    KernelParams kp{1.0, 1.0, 0.1, {}};
    GprModel model = GprModel::from_data(data.X, data.y, kp, /*standardize=*/false);

    const double prior_var = kp.sigma_f * kp.sigma_f + kp.sigma_n * kp.sigma_n;
    Eigen::VectorXd mean, var;
    model.predict_batch(data.X, mean, &var, ExecPolicy::Serial);
    for (int i = 0; i < 30; ++i) {
        CHECK(var(i) >= 0.0);
        CHECK(var(i) < prior_var);
        // At a training input the posterior variance cannot drop below zero
        // but should sit near the noise floor.
        CHECK(var(i) < 2.5 * kp.sigma_n * kp.sigma_n + 1e-9);
    }

    Eigen::MatrixXd far(1, 3);
    far << 50.0, -50.0, 50.0;
    model.predict_batch(far, mean, &var, ExecPolicy::Serial);
    CHECK(std::abs(var(0) - prior_var) < 1e-9);
}

TEST_CASE("hyperparameter search never ends below its start and picks the best restart") {
    auto data = synthetic_records(400, substream_seed(47, 3), 0.05);
    GprModel model = GprModel::fit(data, quick_fit_options(99));
    const auto& info = model.fit_info();

    REQUIRE(!info.restarts.empty());
    REQUIRE(info.best_restart >= 0);
    double best = -1e300;
    for (const auto& r : info.restarts) {
        CHECK(r.final_lml >= r.initial_lml - 1e-9);
        best = std::max(best, r.final_lml);
    }
    CHECK(info.restarts[static_cast<std::size_t>(info.best_restart)].final_lml ==
          doctest::Approx(best).epsilon(1e-15));
    CHECK(info.n_total == 400);
    CHECK(info.n_train == 300);   // train_cap
    CHECK(info.n_hyperopt == 96);  // hyperopt_cap
}

TEST_CASE("fitting is deterministic and policy-independent") {
    auto data = synthetic_records(250, substream_seed(47, 4), 0.05);
    gpr::FitOptions opt = quick_fit_options(7);
    opt.restarts = 3;

    GprModel a = GprModel::fit(data, opt);
    GprModel b = GprModel::fit(data, opt);
    gpr::FitOptions opt_par = opt;
    opt_par.policy = ExecPolicy::Parallel;
    GprModel c = GprModel::fit(data, opt_par);

    CHECK(a.params().sigma_f == b.params().sigma_f);
    CHECK(a.params().length_scale == b.params().length_scale);
    CHECK(a.params().sigma_n == b.params().sigma_n);
    CHECK(a.params().sigma_f == c.params().sigma_f);
    CHECK(a.params().length_scale == c.params().length_scale);
    CHECK(a.params().sigma_n == c.params().sigma_n);

    Eigen::MatrixXd Q(4, gpr::kFeatureDim);
    Q << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 0.0, 2.0, 0.0, 2.0, 0.0,
        2.0, 1.9, 0.1, 1.9, 0.1, 1.9, 0.1;
    Eigen::VectorXd ma, mb, mc, va, vb, vc;
    a.predict_batch(Q, ma, &va, ExecPolicy::Serial);
    b.predict_batch(Q, mb, &vb, ExecPolicy::Serial);
    c.predict_batch(Q, mc, &vc, ExecPolicy::Parallel);
    CHECK((ma - mb).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ma - mc).cwiseAbs().maxCoeff() == 0.0);
    CHECK((va - vb).cwiseAbs().maxCoeff() == 0.0);
    CHECK((va - vc).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch prediction is bit-identical across policies and matches single queries") {
    auto data = synthetic_records(300, substream_seed(47, 5), 0.05);
    GprModel model = GprModel::fit(data, quick_fit_options(3));

    Eigen::MatrixXd Q(64, gpr::kFeatureDim);
    Rng rng(substream_seed(47, 6));
    for (int i = 0; i < Q.rows(); ++i) {
        for (int j = 0; j < Q.cols(); ++j) Q(i, j) = rng.uniform(0.0, 2.0);
    }
    Eigen::VectorXd ms, mp, vs, vp;
    model.predict_batch(Q, ms, &vs, ExecPolicy::Serial);
    model.predict_batch(Q, mp, &vp, ExecPolicy::Parallel);
    CHECK((ms - mp).cwiseAbs().maxCoeff() == 0.0);
    CHECK((vs - vp).cwiseAbs().maxCoeff() == 0.0);

    for (int i : {0, 17, 63}) {
        std::array<double, gpr::kFeatureDim> q{};
        for (int j = 0; j < gpr::kFeatureDim; ++j) q[static_cast<std::size_t>(j)] = Q(i, j);
        auto single = model.predict(q);
        CHECK(single.mean == ms(i));
        CHECK(single.variance == vs(i));
    }
}

TEST_CASE("a fitted model explains smooth synthetic data") {
    auto data = synthetic_records(500, substream_seed(47, 7), 0.02);
    auto parts = gpr::split(data, 0.2, 11);
    GprModel model = GprModel::fit(parts.train, quick_fit_options(5));
    auto metrics = gpr::evaluate(model, parts.test);
    CHECK(metrics.n == parts.test.size());
    CHECK(metrics.r2 > 0.9);
    CHECK(metrics.mse < 0.02);
}

TEST_CASE("save and load reproduce predictions bit for bit") {
    auto data = synthetic_records(200, substream_seed(47, 8), 0.05);
    GprModel model = GprModel::fit(data, quick_fit_options(21));

    auto path = std::filesystem::temp_directory_path() / "fingersim_gpr_roundtrip.json";
    model.save(path);
    GprModel back = GprModel::load(path);
    std::filesystem::remove(path);

    CHECK(back.params().sigma_f == model.params().sigma_f);
    CHECK(back.params().length_scale == model.params().length_scale);
    CHECK(back.params().sigma_n == model.params().sigma_n);
    CHECK(back.jitter() == model.jitter());
    CHECK(back.train_size() == model.train_size());

    Eigen::MatrixXd Q(16, gpr::kFeatureDim);
    Rng rng(substream_seed(47, 9));
    for (int i = 0; i < Q.rows(); ++i) {
        for (int j = 0; j < Q.cols(); ++j) Q(i, j) = rng.uniform(0.0, 2.0);
    }
    Eigen::VectorXd m0, m1, v0, v1;
    model.predict_batch(Q, m0, &v0, ExecPolicy::Serial);
    back.predict_batch(Q, m1, &v1, ExecPolicy::Serial);
    CHECK((m0 - m1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((v0 - v1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loading a damaged model file fails loudly") {
    auto path = std::filesystem::temp_directory_path() / "fingersim_gpr_damaged.json";
    {
        std::FILE* f = std::fopen(path.string().c_str(), "wb");
        REQUIRE(f != nullptr);
        std::fputs("{\"format\": \"something-else\", \"format_version\": 1}", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(GprModel::load(path), Error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(GprModel::load(path), IoError);  // now missing entirely
}

TEST_CASE("duplicate rows engage the diagonal escalation instead of failing") {
    Eigen::MatrixXd X(4, 2);
    X << 0.5, 0.5, 0.5, 0.5, 1.5, 0.5, 0.5, 1.5;  // rows 0 and 1 identical
    Eigen::VectorXd y(4);
    y << 1.0, 1.0, -1.0, 0.5;
    KernelParams kp{1.0, 1.0, 1e-6, {}};
    GprModel model = GprModel::from_data(X, y, kp, /*standardize=*/false);
    CHECK(model.jitter() >= 0.0);
    Eigen::MatrixXd q(1, 2);
    q << 0.5, 0.5;
    Eigen::VectorXd mean, var;
    model.predict_batch(q, mean, &var, ExecPolicy::Serial);
    CHECK(std::isfinite(mean(0)));
    CHECK(std::abs(mean(0) - 1.0) < 0.05);
}

TEST_CASE("training data with no feature variation is rejected") {
    std::vector<SampleRecord> data(50);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i].features = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
        data[i].torque = static_cast<double>(i % 3);
    }
    CHECK_THROWS_AS(GprModel::fit(data, quick_fit_options(1)), ValidationError);
}

TEST_CASE("record validation names the offending row") {
    SampleRecord rec;
    rec.features = {0.1, 0.2, 0.3, 0.4, 0.5, 25.0};
    rec.torque = 0.1;
    CHECK_NOTHROW(gpr::validate_record(rec, "row 5"));

    rec.features[2] = std::nan("");
    try {
        gpr::validate_record(rec, "row 5");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("row 5") != std::string::npos);
    }

    rec.features[2] = 0.3;
    rec.features[5] = 500.0;  // not a plausible temperature
    CHECK_THROWS_AS(gpr::validate_record(rec, "row 6"), ValidationError);

    rec.features[5] = 25.0;
    rec.torque = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(gpr::validate_record(rec, "row 7"), ValidationError);
}

TEST_CASE("split is deterministic, disjoint, and order preserving") {
    auto data = synthetic_records(100, substream_seed(47, 10), 0.0);
    auto a = gpr::split(data, 0.2, 77);
    auto b = gpr::split(data, 0.2, 77);
    auto c = gpr::split(data, 0.2, 78);

    CHECK(a.test.size() == 20);
    CHECK(a.train.size() == 80);

    auto key = [](const SampleRecord& r) { return r.features[0]; };
    REQUIRE(b.test.size() == a.test.size());
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        CHECK(key(a.test[i]) == key(b.test[i]));
    }
    bool different = false;
    for (std::size_t i = 0; i < a.test.size() && !different; ++i) {
        different = key(a.test[i]) != key(c.test[i]);
    }
    CHECK(different);  // another seed gives another split

    // Order preservation: both halves appear in their original relative order.
    auto index_of = [&](const SampleRecord& r) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (key(data[i]) == key(r)) return i;
        }
        return data.size();
    };
    for (std::size_t i = 1; i < a.train.size(); ++i) {
        CHECK(index_of(a.train[i - 1]) < index_of(a.train[i]));
    }
    for (std::size_t i = 1; i < a.test.size(); ++i) {
        CHECK(index_of(a.test[i - 1]) < index_of(a.test[i]));
    }

    CHECK_THROWS_AS(gpr::split(data, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(gpr::split(data, 1.0, 1), ValidationError);
}

TEST_CASE("evaluation guards against degenerate test sets") {
    auto data = synthetic_records(60, substream_seed(47, 11), 0.05);
    GprModel model = GprModel::fit(data, quick_fit_options(2));

    std::vector<SampleRecord> constant = data;
    for (auto& r : constant) r.torque = 0.7;
    CHECK_THROWS_AS(gpr::evaluate(model, constant), ValidationError);

    std::vector<SampleRecord> tiny(data.begin(), data.begin() + 1);
    CHECK_THROWS_AS(gpr::evaluate(model, tiny), ValidationError);
}

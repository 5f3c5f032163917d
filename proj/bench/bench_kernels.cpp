// Micro-benchmark for the data-parallel kernels: every parallel variant is
// timed against its serial reference twin, and because the two are required
// to be bit-identical the table carries a max|diff| column that must read 0.
// Sizes are chosen so the whole run finishes in a few seconds on one core.

#include <chrono>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "fingersim/config.hpp"
#include "fingersim/datagen.hpp"
#include "fingersim/exec.hpp"
#include "fingersim/gpr.hpp"
#include "fingersim/kernels.hpp"
#include "fingersim/rng.hpp"

using namespace fingersim;

namespace {

template <typename Fn>
double best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best = std::min(best, dt);
    }
    return best;
}

void print_row(const char* name, const std::string& size, double serial_s, double parallel_s,
               double max_diff) {
    fmt::print("{:<26} {:>12} {:>10.4f} {:>10.4f} {:>8.2f}x {:>11}\n", name, size, serial_s,
               parallel_s, serial_s / parallel_s,
               max_diff == 0.0 ? "0" : fmt::format("{:.1e}", max_diff));
}

Eigen::MatrixXd random_features(int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd X(n, gpr::kFeatureDim);
    for (int r = 0; r < n; ++r) {
        X(r, 0) = rng.uniform(0.0, 4.0);
        X(r, 1) = rng.uniform(0.0, 600.0);
        X(r, 2) = rng.uniform(-50.0, 50.0);
        X(r, 3) = rng.uniform(-0.2, 1.8);
        X(r, 4) = rng.uniform(-3.0, 3.0);
        X(r, 5) = rng.uniform(15.0, 55.0);
    }
    return X;
}

}  // namespace

int main() {
    fmt::print("parallel worker threads: {}\n\n", parallel_thread_count());
    fmt::print("{:<26} {:>12} {:>10} {:>10} {:>9} {:>11}\n", "kernel", "size", "serial[s]",
               "parallel[s]", "speedup", "max|diff|");

    const int reps = 3;
    const kernels::KernelParams kp{1.2, 1.8, 0.05, {}};

    {
        const int n = 1500;
        const auto X = random_features(n, 11);
        Eigen::MatrixXd a, b;
        const double ts = best_of(reps, [&] { a = kernels::pairwise_sqdist(X, ExecPolicy::Serial); });
        const double tp = best_of(reps, [&] { b = kernels::pairwise_sqdist(X, ExecPolicy::Parallel); });
        print_row("pairwise sq-dist", fmt::format("{}x6", n), ts, tp,
                  (a - b).cwiseAbs().maxCoeff());
    }

    {
        const int n = 1500;
        const auto X = random_features(n, 12);
        Eigen::MatrixXd a, b;
        const double ts =
            best_of(reps, [&] { a = kernels::training_covariance(X, kp, ExecPolicy::Serial); });
        const double tp =
            best_of(reps, [&] { b = kernels::training_covariance(X, kp, ExecPolicy::Parallel); });
        print_row("training covariance", fmt::format("{0}x{0}", n), ts, tp,
                  (a - b).cwiseAbs().maxCoeff());
    }

    {
        const int n = 1200, m = 4000;
        const auto X = random_features(n, 13);
        const auto Q = random_features(m, 14);
        Eigen::MatrixXd a, b;
        const double ts =
            best_of(reps, [&] { a = kernels::cross_covariance(Q, X, kp, ExecPolicy::Serial); });
        const double tp =
            best_of(reps, [&] { b = kernels::cross_covariance(Q, X, kp, ExecPolicy::Parallel); });
        print_row("cross covariance", fmt::format("{}x{}", m, n), ts, tp,
                  (a - b).cwiseAbs().maxCoeff());
    }

    {
        const int n = 1200, m = 4000;
        const auto X = random_features(n, 15);
        Rng rng(16);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            y(i) = 0.3 * std::sin(X(i, 3)) + 0.08 * X(i, 0) + 0.01 * rng.normal();
        }
        const auto model = gpr::GprModel::from_data(X, y, kp);
        const auto Q = random_features(m, 17);
        Eigen::VectorXd mean_a, mean_b, var_a, var_b;
        const double ts = best_of(
            reps, [&] { model.predict_batch(Q, mean_a, &var_a, ExecPolicy::Serial); });
        const double tp = best_of(
            reps, [&] { model.predict_batch(Q, mean_b, &var_b, ExecPolicy::Parallel); });
        const double diff = std::max((mean_a - mean_b).cwiseAbs().maxCoeff(),
                                     (var_a - var_b).cwiseAbs().maxCoeff());
        print_row("batch predict (mean+var)", fmt::format("{} of {}", m, n), ts, tp, diff);
    }

    {
        const auto rig = config::default_config().joints.front().rig;
        datagen::CalibrationProtocol proto;
        proto.load_min = 0.2;
        proto.load_max = 0.8;
        proto.load_step = 0.2;
        proto.temperatures = {20.0, 40.0};
        proto.duration_per_cell = 2.0;
        proto.repetitions = 1;
        proto.seed = 5;
        datagen::NoiseModel noise;
        std::vector<gpr::SampleRecord> a, b;
        const double ts = best_of(
            reps, [&] { a = datagen::run_calibration(proto, rig, noise, ExecPolicy::Serial); });
        const double tp = best_of(
            reps, [&] { b = datagen::run_calibration(proto, rig, noise, ExecPolicy::Parallel); });
        double diff = a.size() == b.size() ? 0.0 : 1.0;
        if (diff == 0.0) {
            for (std::size_t i = 0; i < a.size(); ++i) {
                for (int f = 0; f < gpr::kFeatureDim; ++f) {
                    diff = std::max(diff, std::abs(a[i].features[f] - b[i].features[f]));
                }
                diff = std::max(diff, std::abs(a[i].torque - b[i].torque));
            }
        }
        print_row("calibration cells", fmt::format("{} cells", proto.cell_count()), ts, tp, diff);
    }

    fmt::print("\nparallel results must be bit-identical to serial (max|diff| column = 0).\n");
    return 0;
}

#include "fingersim/kernels.hpp"

#include <cmath>

#include <fmt/format.h>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fingersim {

namespace {
int g_thread_cap = 0;  // 0 = library default
}

int parallel_thread_count() noexcept {
#ifdef _OPENMP
    int n = omp_get_max_threads();
    if (g_thread_cap > 0 && g_thread_cap < n) n = g_thread_cap;
    return n;
#else
    return 1;
#endif
}

void set_thread_cap(int jobs) noexcept {
    if (jobs < 1) return;
    g_thread_cap = jobs;
#ifdef _OPENMP
    omp_set_num_threads(jobs);
#endif
}

}  // namespace fingersim

namespace fingersim::kernels {

namespace {

// Weighted squared distance for the ARD metric.
double ard_sqdist(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b,
                  const std::vector<double>& scales) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        double d = (a[j] - b[j]) / scales[static_cast<std::size_t>(j)];
        acc += d * d;
    }
    return acc;
}

double sqdist(const Eigen::Ref<const Eigen::RowVectorXd>& a,
              const Eigen::Ref<const Eigen::RowVectorXd>& b) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        double d = a[j] - b[j];
        acc += d * d;
    }
    return acc;
}

}  // namespace

void KernelParams::validate(Eigen::Index dim) const {
    if (!(std::isfinite(sigma_f) && sigma_f > 0.0)) {
        throw ValidationError(fmt::format("kernel: sigma_f must be finite and > 0, got {}", sigma_f));
    }
    if (!(std::isfinite(length_scale) && length_scale > 0.0)) {
        throw ValidationError(fmt::format(
            "kernel: length_scale must be finite and > 0, got {}", length_scale));
    }
    if (!(std::isfinite(sigma_n) && sigma_n > 0.0)) {
        throw ValidationError(fmt::format("kernel: sigma_n must be finite and > 0, got {}", sigma_n));
    }
    if (!ard_scales.empty()) {
        if (static_cast<Eigen::Index>(ard_scales.size()) != dim) {
            throw ValidationError(fmt::format(
                "kernel: ard_scales has {} entries but the feature dimension is {}",
                ard_scales.size(), dim));
        }
        for (std::size_t j = 0; j < ard_scales.size(); ++j) {
            if (!(std::isfinite(ard_scales[j]) && ard_scales[j] > 0.0)) {
                throw ValidationError(fmt::format(
                    "kernel: ard_scales[{}] must be finite and > 0, got {}", j, ard_scales[j]));
            }
        }
    }
}

double kernel_eval(const KernelParams& kp, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                   const Eigen::Ref<const Eigen::RowVectorXd>& b, bool same_index) {
    double d2 = kp.ard() ? ard_sqdist(a, b, kp.ard_scales) : sqdist(a, b);
    double ls2 = kp.length_scale * kp.length_scale;
    double v = kp.sigma_f * kp.sigma_f * std::exp(-0.5 * d2 / ls2);
    if (same_index) v += kp.sigma_n * kp.sigma_n;
    return v;
}

Eigen::MatrixXd pairwise_sqdist(const Eigen::MatrixXd& X, ExecPolicy policy) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd out(n, n);
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, i) = 0.0;
            for (Eigen::Index j = 0; j < i; ++j) {
                out(i, j) = sqdist(X.row(i), X.row(j));
            }
        }
        // Mirror after the parallel fill so each (i, j) is written once by one
        // iteration and the result cannot depend on scheduling.
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                out(j, i) = out(i, j);
            }
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, i) = 0.0;
            for (Eigen::Index j = 0; j < i; ++j) {
                out(i, j) = sqdist(X.row(i), X.row(j));
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                out(j, i) = out(i, j);
            }
        }
    }
    return out;
}

Eigen::MatrixXd cross_sqdist(const Eigen::MatrixXd& Xq, const Eigen::MatrixXd& Xt,
                             ExecPolicy policy) {
    if (Xq.cols() != Xt.cols()) {
        throw ValidationError(fmt::format(
            "cross_sqdist: dimension mismatch ({} vs {})", Xq.cols(), Xt.cols()));
    }
    const Eigen::Index nq = Xq.rows();
    const Eigen::Index nt = Xt.rows();
    Eigen::MatrixXd out(nq, nt);
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < nq; ++i) {
            for (Eigen::Index j = 0; j < nt; ++j) {
                out(i, j) = sqdist(Xq.row(i), Xt.row(j));
            }
        }
    } else {
        for (Eigen::Index i = 0; i < nq; ++i) {
            for (Eigen::Index j = 0; j < nt; ++j) {
                out(i, j) = sqdist(Xq.row(i), Xt.row(j));
            }
        }
    }
    return out;
}

Eigen::MatrixXd training_covariance_from_sqdist(const Eigen::MatrixXd& sqd,
                                                const KernelParams& kp, ExecPolicy policy) {
    const Eigen::Index n = sqd.rows();
    const double sf2 = kp.sigma_f * kp.sigma_f;
    const double inv2l2 = 0.5 / (kp.length_scale * kp.length_scale);
    const double sn2 = kp.sigma_n * kp.sigma_n;
    Eigen::MatrixXd out(n, n);
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                out(i, j) = sf2 * std::exp(-sqd(i, j) * inv2l2);
            }
            out(i, i) += sn2;
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                out(i, j) = sf2 * std::exp(-sqd(i, j) * inv2l2);
            }
            out(i, i) += sn2;
        }
    }
    return out;
}

Eigen::MatrixXd training_covariance(const Eigen::MatrixXd& X, const KernelParams& kp,
                                    ExecPolicy policy) {
    kp.validate(X.cols());
    if (!kp.ard()) {
        return training_covariance_from_sqdist(pairwise_sqdist(X, policy), kp, policy);
    }
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd out(n, n);
    const double sf2 = kp.sigma_f * kp.sigma_f;
    const double inv2l2 = 0.5 / (kp.length_scale * kp.length_scale);
    const double sn2 = kp.sigma_n * kp.sigma_n;
#pragma omp parallel for schedule(static) if (policy == ExecPolicy::Parallel)
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            out(i, j) = sf2 * std::exp(-ard_sqdist(X.row(i), X.row(j), kp.ard_scales) * inv2l2);
        }
        out(i, i) += sn2;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            out(j, i) = out(i, j);
        }
    }
    return out;
}

Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& Xq, const Eigen::MatrixXd& Xt,
                                 const KernelParams& kp, ExecPolicy policy) {
    kp.validate(Xt.cols());
    const Eigen::Index nq = Xq.rows();
    const Eigen::Index nt = Xt.rows();
    if (Xq.cols() != Xt.cols()) {
        throw ValidationError(fmt::format(
            "cross_covariance: dimension mismatch ({} vs {})", Xq.cols(), Xt.cols()));
    }
    Eigen::MatrixXd out(nq, nt);
    const double sf2 = kp.sigma_f * kp.sigma_f;
    const double inv2l2 = 0.5 / (kp.length_scale * kp.length_scale);
#pragma omp parallel for schedule(static) if (policy == ExecPolicy::Parallel)
    for (Eigen::Index i = 0; i < nq; ++i) {
        for (Eigen::Index j = 0; j < nt; ++j) {
            double d2 = kp.ard() ? ard_sqdist(Xq.row(i), Xt.row(j), kp.ard_scales)
                                 : sqdist(Xq.row(i), Xt.row(j));
            out(i, j) = sf2 * std::exp(-d2 * inv2l2);
        }
    }
    return out;
}

}  // namespace fingersim::kernels

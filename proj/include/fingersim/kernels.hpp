#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fingersim/errors.hpp"
#include "fingersim/exec.hpp"

namespace fingersim::kernels {

// Covariance-function parameters: a squared-exponential term over feature
// distance plus white noise that applies only when two samples are the same
// observation (same index), i.e. on the diagonal of the training covariance.
struct KernelParams {
    double sigma_f = 1.0;       // signal standard deviation, > 0
    double length_scale = 1.0;  // isotropic length scale, > 0
    double sigma_n = 0.1;       // observation-noise standard deviation, > 0
    // Optional per-dimension length-scale multipliers (automatic relevance
    // determination).  Empty = isotropic.  When non-empty, the effective
    // length scale of dimension j is length_scale * ard_scales[j].
    std::vector<double> ard_scales;

    void validate(Eigen::Index dim) const;
    bool ard() const { return !ard_scales.empty(); }
};

// Covariance between two feature vectors.  `same_index` selects whether the
// white-noise term contributes (true only for a training sample paired with
// itself).
double kernel_eval(const KernelParams& kp, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                   const Eigen::Ref<const Eigen::RowVectorXd>& b, bool same_index);

// All-pairs squared Euclidean distance of the rows of X (isotropic metric).
// Serial and Parallel produce bit-identical matrices.
Eigen::MatrixXd pairwise_sqdist(const Eigen::MatrixXd& X, ExecPolicy policy);

// Squared distances between rows of Xq (queries) and rows of Xt (training).
Eigen::MatrixXd cross_sqdist(const Eigen::MatrixXd& Xq, const Eigen::MatrixXd& Xt,
                             ExecPolicy policy);

// Full training covariance: squared-exponential over the row distances plus
// sigma_n^2 on the diagonal (each training sample paired with itself).
Eigen::MatrixXd training_covariance(const Eigen::MatrixXd& X, const KernelParams& kp,
                                    ExecPolicy policy);

// Same, but reusing a precomputed pairwise_sqdist matrix (isotropic only);
// this is the hot path of hyperparameter search.
Eigen::MatrixXd training_covariance_from_sqdist(const Eigen::MatrixXd& sqdist,
                                                const KernelParams& kp, ExecPolicy policy);

// Cross covariance between query rows and training rows (no noise term:
// distinct observations).
Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& Xq, const Eigen::MatrixXd& Xt,
                                 const KernelParams& kp, ExecPolicy policy);

}  // namespace fingersim::kernels

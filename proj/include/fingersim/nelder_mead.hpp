#pragma once

#include <functional>

#include <Eigen/Dense>

namespace fingersim::opt {

struct NelderMeadOptions {
    int max_iterations = 500;
    // Converged when the objective spread across the simplex drops below
    // f_tol and the simplex diameter below x_tol.
    double f_tol = 1e-8;
    double x_tol = 1e-8;
    double initial_step = 0.5;  // per-coordinate offset of the initial simplex
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Deterministic derivative-free simplex minimizer (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5; ties broken by vertex index).  Non-finite
// objective values are treated as +infinity so the simplex walks away from
// invalid regions instead of aborting.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts);

}  // namespace fingersim::opt

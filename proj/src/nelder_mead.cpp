#include "fingersim/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace fingersim::opt {

namespace {

double guarded(double v) {
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts) {
    const int dim = static_cast<int>(x0.size());
    const int nv = dim + 1;

    std::vector<Eigen::VectorXd> verts(static_cast<std::size_t>(nv));
    std::vector<double> fv(static_cast<std::size_t>(nv));
    verts[0] = x0;
    for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd v = x0;
        v[i] += opts.initial_step;
        verts[static_cast<std::size_t>(i + 1)] = std::move(v);
    }
    for (int i = 0; i < nv; ++i) {
        fv[static_cast<std::size_t>(i)] = guarded(f(verts[static_cast<std::size_t>(i)]));
    }

    // Index ordering by (value, index): deterministic under ties.
    std::vector<int> order(static_cast<std::size_t>(nv));
    auto sort_order = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return fv[static_cast<std::size_t>(a)] < fv[static_cast<std::size_t>(b)];
        });
    };
    sort_order();

    NelderMeadResult res;
    res.iterations = 0;
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        int best = order[0];
        int worst = order[static_cast<std::size_t>(nv - 1)];
        int second_worst = order[static_cast<std::size_t>(nv - 2)];

        // Convergence: objective spread and simplex diameter.
        double f_spread = fv[static_cast<std::size_t>(worst)] - fv[static_cast<std::size_t>(best)];
        double diam = 0.0;
        for (int i = 1; i < nv; ++i) {
            diam = std::max(diam, (verts[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] -
                                   verts[static_cast<std::size_t>(best)])
                                      .cwiseAbs()
                                      .maxCoeff());
        }
        if (std::isfinite(f_spread) && f_spread <= opts.f_tol && diam <= opts.x_tol) {
            res.converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i < nv; ++i) {
            if (i == worst) continue;
            centroid += verts[static_cast<std::size_t>(i)];
        }
        centroid /= static_cast<double>(dim);

        const Eigen::VectorXd& xw = verts[static_cast<std::size_t>(worst)];
        Eigen::VectorXd xr = centroid + (centroid - xw);  // reflection
        double fr = guarded(f(xr));

        if (fr < fv[static_cast<std::size_t>(best)]) {
            Eigen::VectorXd xe = centroid + 2.0 * (centroid - xw);  // expansion
            double fe = guarded(f(xe));
            if (fe < fr) {
                verts[static_cast<std::size_t>(worst)] = std::move(xe);
                fv[static_cast<std::size_t>(worst)] = fe;
            } else {
                verts[static_cast<std::size_t>(worst)] = std::move(xr);
                fv[static_cast<std::size_t>(worst)] = fr;
            }
        } else if (fr < fv[static_cast<std::size_t>(second_worst)]) {
            verts[static_cast<std::size_t>(worst)] = std::move(xr);
            fv[static_cast<std::size_t>(worst)] = fr;
        } else {
            bool outside = fr < fv[static_cast<std::size_t>(worst)];
            Eigen::VectorXd xc = outside ? centroid + 0.5 * (xr - centroid)
                                         : centroid + 0.5 * (xw - centroid);
            double fc = guarded(f(xc));
            double bound = outside ? fr : fv[static_cast<std::size_t>(worst)];
            if (fc < bound) {
                verts[static_cast<std::size_t>(worst)] = std::move(xc);
                fv[static_cast<std::size_t>(worst)] = fc;
            } else {
                // Shrink toward the best vertex.
                const Eigen::VectorXd xb = verts[static_cast<std::size_t>(order[0])];
                for (int i = 0; i < nv; ++i) {
                    if (i == order[0]) continue;
                    verts[static_cast<std::size_t>(i)] =
                        xb + 0.5 * (verts[static_cast<std::size_t>(i)] - xb);
                    fv[static_cast<std::size_t>(i)] = guarded(f(verts[static_cast<std::size_t>(i)]));
                }
            }
        }
        sort_order();
    }

    res.iterations = iter;
    int best = order[0];
    res.x = verts[static_cast<std::size_t>(best)];
    res.fx = fv[static_cast<std::size_t>(best)];
    return res;
}

}  // namespace fingersim::opt

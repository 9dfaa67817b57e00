#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>

#include "yawcal/errors.hpp"

namespace yawcal {

struct ScalarMinResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Brent's method for a scalar minimum on [a, b]: golden-section steps with
// parabolic interpolation where safe. `tol` is an absolute tolerance on x;
// the returned point is within ~2*tol of a local minimizer.
template <class F>
ScalarMinResult brent_minimize(F&& f, double a, double b, double tol = 1e-6,
                               int max_iter = 200) {
    if (!(a < b))
        throw Error(ErrorKind::invalid_input, "brent_minimize: need a < b");
    if (!(tol > 0.0))
        throw Error(ErrorKind::invalid_input, "brent_minimize: tol must be > 0");
    constexpr double cgold = 0.3819660112501051;  // 2 - golden ratio
    double x, w, v, fx, fw, fv;
    x = w = v = a + cgold * (b - a);
    fx = fw = fv = f(x);
    double d = 0.0, e = 0.0;

    ScalarMinResult res;
    for (int iter = 0; iter < max_iter; ++iter) {
        res.iterations = iter + 1;
        double m = 0.5 * (a + b);
        double tol1 = tol * std::fabs(x) + tol;
        double tol2 = 2.0 * tol1;
        if (std::fabs(x - m) <= tol2 - 0.5 * (b - a)) {
            res.converged = true;
            break;
        }
        bool golden = true;
        if (std::fabs(e) > tol1) {
            // Parabola through (x, w, v).
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::fabs(q);
            double e_prev = e;
            e = d;
            if (std::fabs(p) < std::fabs(0.5 * q * e_prev) && p > q * (a - x) &&
                p < q * (b - x)) {
                d = p / q;
                double u = x + d;
                if (u - a < tol2 || b - u < tol2)
                    d = x < m ? tol1 : -tol1;
                golden = false;
            }
        }
        if (golden) {
            e = (x < m ? b : a) - x;
            d = cgold * e;
        }
        double u = std::fabs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
        double fu = f(u);
        if (fu <= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    res.x = x;
    res.fx = fx;
    return res;
}

struct VectorMinResult {
    Eigen::VectorXd x;
    double fx = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Quasi-Newton minimization with a dense inverse-Hessian BFGS update and
// Armijo backtracking. `fg` evaluates f(x) and writes the gradient. Updates
// that would break positive definiteness (s'y too small) are skipped.
template <class FG>
VectorMinResult bfgs_minimize(FG&& fg, Eigen::VectorXd x0,
                              double grad_tol = 1e-9, int max_iter = 500) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const auto n = x0.size();
    if (n == 0)
        throw Error(ErrorKind::invalid_input, "bfgs_minimize: empty start point");

    VectorXd x = std::move(x0);
    VectorXd g(n);
    double fx = fg(x, g);
    MatrixXd h = MatrixXd::Identity(n, n);

    VectorMinResult res;
    for (int iter = 0; iter < max_iter; ++iter) {
        res.iterations = iter;
        if (g.lpNorm<Eigen::Infinity>() <= grad_tol) {
            res.converged = true;
            break;
        }
        VectorXd p = -(h * g);
        double descent = p.dot(g);
        if (!(descent < 0.0)) {
            h.setIdentity();
            p = -g;
            descent = p.dot(g);
        }

        // Backtracking line search with the Armijo condition, slackened by
        // the floating-point resolution of f so steps whose true decrease is
        // below cancellation noise still count (the gradient test above
        // remains the sole convergence criterion).
        constexpr double c1 = 1e-4;
        const double f_slack =
            8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::fabs(fx));
        double step = 1.0;
        VectorXd x_new(n), g_new(n);
        double f_new = fx;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x + step * p;
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) &&
                f_new <= fx + c1 * step * descent + f_slack) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // stuck: flat or non-descent numerics

        VectorXd s = x_new - x;
        VectorXd y = g_new - g;
        double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            // Sherman-Morrison form of the BFGS inverse update.
            double rho = 1.0 / sy;
            MatrixXd outer_sy = s * y.transpose();
            h = (MatrixXd::Identity(n, n) - rho * outer_sy) * h *
                    (MatrixXd::Identity(n, n) - rho * outer_sy.transpose()) +
                rho * s * s.transpose();
        }
        x = std::move(x_new);
        g = g_new;
        fx = f_new;
    }
    res.x = std::move(x);
    res.fx = fx;
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (!res.converged && res.grad_norm <= grad_tol) res.converged = true;
    return res;
}

}  // namespace yawcal

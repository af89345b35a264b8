#pragma once

// Local optimizers: limited-memory BFGS for smooth unconstrained minimization
// and Levenberg-Marquardt for nonlinear least squares.

#include <functional>

#include "gentle/common.hpp"

namespace gentle {

struct LbfgsOptions {
    int max_iterations = 500;
    int memory = 8;
    double grad_tol = 1e-12;
    double f_tol = 1e-16;
};

struct LbfgsResult {
    VectorXd x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

// fn(x, grad) evaluates the objective and writes its gradient.
inline LbfgsResult lbfgs_minimize(const std::function<double(const VectorXd&, VectorXd&)>& fn,
                                  VectorXd x, const LbfgsOptions& opt = {}) {
    const auto n = x.size();
    VectorXd g(n), g_new(n);
    double f = fn(x, g);
    std::vector<VectorXd> s_hist, y_hist;
    std::vector<double> rho_hist;

    LbfgsResult res;
    for (int it = 0; it < opt.max_iterations; ++it) {
        if (g.norm() <= opt.grad_tol * std::max(1.0, x.norm())) {
            res.converged = true;
            break;
        }
        // Two-loop recursion.
        VectorXd q = g;
        const int m = static_cast<int>(s_hist.size());
        std::vector<double> alpha(m);
        for (int i = m - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (m > 0) {
            double gamma = s_hist[m - 1].dot(y_hist[m - 1]) / y_hist[m - 1].squaredNorm();
            q *= gamma;
        }
        for (int i = 0; i < m; ++i) {
            double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        VectorXd d = -q;
        double gd = g.dot(d);
        if (gd >= 0) { // not a descent direction; restart from steepest descent
            d = -g;
            gd = -g.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // Backtracking Armijo line search.
        double step = 1.0;
        double f_new = f;
        VectorXd x_new = x;
        bool ok = false;
        for (int ls = 0; ls < 50; ++ls) {
            x_new = x + step * d;
            f_new = fn(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * gd) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) break;

        VectorXd s = x_new - x;
        VectorXd yv = g_new - g;
        double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.memory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        double df = f - f_new;
        x.swap(x_new);
        g.swap(g_new);
        f = f_new;
        res.iterations = it + 1;
        if (df >= 0 && df <= opt.f_tol * std::max(1.0, std::abs(f))) {
            res.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    res.f = f;
    return res;
}

struct LmOptions {
    int max_iterations = 200;
    double ftol = 1e-15;
    double lambda0 = 1e-3;
};

struct LmResult {
    VectorXd params;
    double residual_sq = 0.0;
    int iterations = 0;
    bool converged = false;
};

// fn(p, r, J) writes residuals r(p) and the Jacobian J = dr/dp.
inline LmResult levenberg_marquardt(
    const std::function<void(const VectorXd&, VectorXd&, MatrixXd&)>& fn, VectorXd p,
    const LmOptions& opt = {}) {
    VectorXd r;
    MatrixXd J;
    fn(p, r, J);
    double f = r.squaredNorm();
    double lambda = opt.lambda0;

    LmResult res;
    for (int it = 0; it < opt.max_iterations; ++it) {
        MatrixXd JtJ = J.transpose() * J;
        VectorXd Jtr = J.transpose() * r;
        if (Jtr.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, std::sqrt(f))) {
            res.converged = true;
            break;
        }
        VectorXd diag = JtJ.diagonal().cwiseMax(1e-12);
        bool accepted = false;
        for (int tries = 0; tries < 12; ++tries) {
            MatrixXd A = JtJ;
            A.diagonal() += lambda * diag;
            VectorXd delta = A.ldlt().solve(-Jtr);
            VectorXd p_new = p + delta;
            VectorXd r_new;
            MatrixXd J_new;
            fn(p_new, r_new, J_new);
            double f_new = r_new.squaredNorm();
            if (std::isfinite(f_new) && f_new < f) {
                double df = f - f_new;
                p = std::move(p_new);
                r = std::move(r_new);
                J = std::move(J_new);
                f = f_new;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                res.iterations = it + 1;
                if (df <= opt.ftol * std::max(1.0, f)) {
                    res.converged = true;
                    it = opt.max_iterations;
                }
                break;
            }
            lambda *= 5.0;
        }
        if (!accepted) break;
    }
    res.params = std::move(p);
    res.residual_sq = f;
    return res;
}

} // namespace gentle

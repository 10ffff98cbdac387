#pragma once

#include "mgarch/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mgarch::optim {

struct Options {
    int max_iter = 500;
    double grad_tol = 1e-6;  ///< on the infinity norm of the gradient
    double f_tol = 1e-15;    ///< relative objective decrease treated as stalled
};

struct Result {
    Vector x;
    double f = std::numeric_limits<double>::infinity();
    Vector g;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
};

namespace detail {

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), clamped into the bracket.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    double step = 0.5 * (a + b);
    if (disc >= 0.0 && std::isfinite(fb)) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double denom = db - da + 2.0 * d2;
        if (denom != 0.0) {
            step = b - (b - a) * (db + d2 - d1) / denom;
        }
    }
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double margin = 0.1 * (hi - lo);
    if (!std::isfinite(step) || step < lo + margin || step > hi - margin) {
        step = 0.5 * (a + b);
    }
    return step;
}

}  // namespace detail

/// Quasi-Newton (BFGS) minimization with a strong-Wolfe line search.
///
/// `fg(x, grad)` returns f(x) and writes the gradient; a non-finite value marks an infeasible
/// point, which the line search backs away from.
template <class FG>
Result bfgs(FG&& fg, const Vector& x0, const Options& opt = {}) {
    constexpr double c1 = 1e-4;
    constexpr double c2 = 0.9;
    const Eigen::Index p = x0.size();

    Result r;
    r.x = x0;
    r.g = Vector::Zero(p);
    r.f = fg(r.x, r.g);
    ++r.evaluations;
    if (!std::isfinite(r.f) || !r.g.allFinite()) {
        r.message = "objective is not finite at the starting point";
        return r;
    }
    Matrix H = Matrix::Identity(p, p);
    bool first = true;
    int stalled = 0;

    for (r.iterations = 0; r.iterations < opt.max_iter; ++r.iterations) {
        if (r.g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
            r.converged = true;
            r.message = "gradient tolerance reached";
            return r;
        }
        Vector dir = -H * r.g;
        double slope = r.g.dot(dir);
        if (!(slope < 0.0)) {
            H.setIdentity();
            dir = -r.g;
            slope = r.g.dot(dir);
        }
        double step = first ? std::min(1.0, 1.0 / r.g.lpNorm<Eigen::Infinity>()) : 1.0;

        // bracketing phase
        double a_lo = 0.0, f_lo = r.f, d_lo = slope;
        double a_hi = 0.0, f_hi = 0.0, d_hi = 0.0;
        bool bracketed = false;
        bool accepted = false;
        Vector x_new(p), g_new(p);
        double f_new = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = r.x + step * dir;
            f_new = fg(x_new, g_new);
            ++r.evaluations;
            const bool finite = std::isfinite(f_new) && g_new.allFinite();
            const double d_new = finite ? g_new.dot(dir) : 0.0;
            if (!bracketed) {
                if (!finite || f_new > r.f + c1 * step * slope || (ls > 0 && f_new >= f_lo)) {
                    a_hi = step;
                    f_hi = finite ? f_new : std::numeric_limits<double>::infinity();
                    d_hi = d_new;
                    bracketed = true;
                } else if (std::abs(d_new) <= -c2 * slope) {
                    accepted = true;
                    break;
                } else if (d_new >= 0.0) {
                    a_hi = a_lo;
                    f_hi = f_lo;
                    d_hi = d_lo;
                    a_lo = step;
                    f_lo = f_new;
                    d_lo = d_new;
                    bracketed = true;
                } else {
                    a_lo = step;
                    f_lo = f_new;
                    d_lo = d_new;
                    step *= 2.0;
                    continue;
                }
            } else {
                if (!finite || f_new > r.f + c1 * step * slope || f_new >= f_lo) {
                    a_hi = step;
                    f_hi = finite ? f_new : std::numeric_limits<double>::infinity();
                    d_hi = d_new;
                } else {
                    if (std::abs(d_new) <= -c2 * slope) {
                        accepted = true;
                        break;
                    }
                    if (d_new * (a_hi - a_lo) >= 0.0) {
                        a_hi = a_lo;
                        f_hi = f_lo;
                        d_hi = d_lo;
                    }
                    a_lo = step;
                    f_lo = f_new;
                    d_lo = d_new;
                }
            }
            if (std::abs(a_hi - a_lo) < 1e-14 * std::max(1.0, std::abs(a_lo))) {
                break;
            }
            step = std::isfinite(f_hi) ? detail::cubic_step(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi) : 0.5 * (a_lo + a_hi);
        }
        if (!accepted) {
            // fall back to the best sufficient-decrease point seen, if any
            if (a_lo > 0.0 && f_lo < r.f) {
                x_new = r.x + a_lo * dir;
                f_new = fg(x_new, g_new);
                ++r.evaluations;
            } else {
                if (!first && H != Matrix::Identity(p, p)) {
                    H.setIdentity();
                    first = true;
                    continue;
                }
                r.message = "line search failed to find a decrease";
                return r;
            }
        }

        const Vector s = x_new - r.x;
        const Vector yv = g_new - r.g;
        const double f_old = r.f;
        r.x = x_new;
        r.f = f_new;
        r.g = g_new;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (first) {
                H *= sy / yv.squaredNorm();
                first = false;
            }
            const double rho = 1.0 / sy;
            const Vector Hy = H * yv;
            H += (rho * rho * yv.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
        }
        if (std::abs(f_old - r.f) <= opt.f_tol * (1.0 + std::abs(r.f))) {
            if (++stalled >= 3) {
                r.converged = r.g.lpNorm<Eigen::Infinity>() < opt.grad_tol;
                r.message = "objective decrease below tolerance";
                return r;
            }
        } else {
            stalled = 0;
        }
    }
    r.converged = r.g.lpNorm<Eigen::Infinity>() < opt.grad_tol;
    r.message = r.converged ? "gradient tolerance reached" : "iteration limit reached";
    return r;
}

}  // namespace mgarch::optim

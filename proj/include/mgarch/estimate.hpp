#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/filter.hpp"
#include "mgarch/likelihood.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/optimizer.hpp"
#include "mgarch/panel.hpp"
#include "mgarch/simulate.hpp"
#include "mgarch/theta.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mgarch {

struct FitOptions {
    Structure structure = Structure::diagonal;
    Order order{};
    int multistarts = 5;  ///< total number of starts, the moment-matched one included
    int max_iter = 500;
    double tol = 1e-6;  ///< infinity norm of the gradient in unconstrained coordinates
    std::uint64_t seed = 0;
    bool compute_sandwich = true;
    TransformOptions transform{};
    std::optional<Theta> start;  ///< replaces the moment-matched start (warm start)
};

struct Sandwich {
    Matrix C0_hat;
    Matrix C1_hat;
    Matrix avar;
    Vector std_errors;
};

struct FitResult {
    Theta theta_hat;
    double neg_loglik = kInfeasible;
    Matrix C0_hat;
    Matrix C1_hat;
    Matrix avar;
    Vector std_errors;  ///< NaN for inactive parameters or when the sandwich failed
    bool converged = false;
    int iterations = 0;
    int multistart_best_of = 0;
    double gradient_norm = std::numeric_limits<double>::infinity();
    bool boundary = false;
    bool has_sandwich = false;
    std::string sandwich_error;
    std::vector<bool> active;
    std::size_t T = 0;
};

/// Parameters that can move the likelihood. A side of dimension 1 has U_t (or V_t) fixed by the
/// trace normalization, so its ARCH/GARCH entries are unidentified and held at zero.
inline std::vector<bool> active_mask(const ThetaShape& s) {
    std::vector<bool> mask(param_count(s), true);
    const std::size_t tp = trace_param_count(s.order);
    const std::size_t pr = side_param_count(s.m, s.structure, s.order);
    const std::size_t pc = side_param_count(s.n, s.structure, s.order);
    if (s.m == 1) {
        std::fill(mask.begin() + static_cast<std::ptrdiff_t>(tp), mask.begin() + static_cast<std::ptrdiff_t>(tp + pr),
                  false);
    }
    if (s.n == 1) {
        std::fill(mask.begin() + static_cast<std::ptrdiff_t>(tp + pr),
                  mask.begin() + static_cast<std::ptrdiff_t>(tp + pr + pc), false);
    }
    return mask;
}

namespace detail {

inline double fd_step(double v) { return std::max(1e-5, 1e-7 * std::abs(v)); }

/// d natural / d packed, by central differences of unpack (cheap next to a likelihood pass).
inline Matrix unpack_jacobian(const Vector& v, const ThetaShape& shape, const TransformOptions& topt) {
    const Eigen::Index p = v.size();
    Matrix J(p, p);
    Vector w = v;
    for (Eigen::Index i = 0; i < p; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(v(i)));
        w(i) = v(i) + h;
        const Vector up = to_natural(unpack(w, shape, topt));
        w(i) = v(i) - h;
        const Vector dn = to_natural(unpack(w, shape, topt));
        w(i) = v(i);
        J.col(i) = (up - dn) / (2.0 * h);
    }
    return J;
}

inline std::vector<Eigen::Index> active_indices(const std::vector<bool>& mask) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            idx.push_back(static_cast<Eigen::Index>(i));
        }
    }
    return idx;
}

inline Matrix lower_factor(const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    Matrix L;
    if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
    } else {
        L = cov.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        if (!(L(i, i) > 1e-8 * std::max(1.0, std::abs(L(0, 0))))) {
            L(i, i) = std::max(1e-4, 1e-4 * std::abs(L(0, 0)));
        }
    }
    return L;
}

}  // namespace detail

/// Moment-matched starting value: alpha = 0.1, beta = 0.8, w = 0.1 mean ||X||^2, A0 (B0) the Cholesky
/// factor of the sample row (column) second moment scaled to A0(1,1) = 1, ARCH = 0.3 I and
/// GARCH = 0.6 I with the ARCH matrix rescaled to the data scale of that side.
inline Theta moment_start(const PreparedPanel& data, Structure structure, Order order) {
    check_order(order);
    const Eigen::Index m = data.rows();
    const Eigen::Index n = data.cols();
    const std::size_t T = data.size();
    Matrix row = Matrix::Zero(m, m);
    Matrix col = Matrix::Zero(n, n);
    double sq = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        row += data.xxt(t);
        col += data.xtx(t);
        sq += data.sq_norm(t);
    }
    row /= static_cast<double>(T);
    col /= static_cast<double>(T);
    sq /= static_cast<double>(T);
    if (!(sq > 0.0)) {
        throw data_error("fit: panel has zero second moment");
    }
    Theta th;
    th.trace.alpha.assign(static_cast<std::size_t>(order.arch), 0.0);
    th.trace.beta.assign(static_cast<std::size_t>(order.garch), 0.0);
    th.trace.alpha[0] = 0.1;
    if (order.garch > 0) {
        th.trace.beta[0] = 0.8;
    }
    th.trace.w = (1.0 - trace_persistence(th.trace)) * sq;

    auto side = [&](const Matrix& cov) {
        const Eigen::Index d = cov.rows();
        SideParams sp = SideParams::constant(d, structure, order);
        const Matrix L = detail::lower_factor(cov);
        sp.A0 = L / L(0, 0);
        if (d == 1) {
            return sp;
        }
        const double g = order.garch > 0 ? 0.6 : 0.0;
        const double a = std::min(0.3 / L(0, 0), std::sqrt(0.8 - g * g));
        sp.arch[0] = a * Matrix::Identity(d, d);
        if (order.garch > 0) {
            sp.garch[0] = g * Matrix::Identity(d, d);
        }
        return sp;
    };
    th.row = side(row);
    th.col = side(col);
    return th;
}

/// Random perturbation of a start, kept strictly inside the stationary region.
inline Theta perturb_start(const Theta& base, Rng& rng) {
    std::uniform_real_distribution<double> jitter(0.6, 1.4);
    std::normal_distribution<double> normal(0.0, 1.0);
    Theta th = base;
    th.trace.w *= jitter(rng);
    for (auto* group : {&th.trace.alpha, &th.trace.beta}) {
        for (auto& x : *group) {
            x *= jitter(rng);
        }
    }
    const double s = trace_persistence(th.trace);
    if (s > 0.95) {
        for (auto* group : {&th.trace.alpha, &th.trace.beta}) {
            for (auto& x : *group) {
                x *= 0.95 / s;
            }
        }
    }
    for (auto* side : {&th.row, &th.col}) {
        if (side->dim == 1) {
            continue;
        }
        for (Eigen::Index c = 0; c < side->dim; ++c) {
            for (Eigen::Index r = c + 1; r < side->dim; ++r) {
                side->A0(r, c) += 0.1 * normal(rng);
            }
            if (c > 0) {
                side->A0(c, c) *= jitter(rng);
            }
        }
        for (auto* group : {&side->arch, &side->garch}) {
            for (auto& a : *group) {
                for (Eigen::Index c = 0; c < side->dim; ++c) {
                    for (Eigen::Index r = 0; r < side->dim; ++r) {
                        if (r == c) {
                            a(r, c) *= jitter(rng);
                        } else if (side->structure == Structure::full) {
                            a(r, c) += 0.02 * normal(rng);
                        }
                    }
                }
            }
        }
        const double rho = side->persistence();
        if (rho > 0.85) {
            const double c = std::sqrt(0.85 / rho);
            for (auto* group : {&side->arch, &side->garch}) {
                for (auto& a : *group) {
                    a *= c;
                }
            }
        }
    }
    return th;
}

/// Central finite-difference gradient of neg_loglik in the packed (unconstrained) coordinates,
/// step h_i = scale * max(1e-5, 1e-7 |v_i|). Inactive coordinates are reported as exactly zero.
inline Vector gradient(const Theta& th, const PreparedPanel& data, const TransformOptions& topt = {},
                       double step_scale = 1.0) {
    validate(th);
    detail::check_dims(th, data.rows(), data.cols());
    const ThetaShape shape = ThetaShape::of(th);
    const Vector v = pack(th, topt);
    const std::vector<bool> mask = active_mask(shape);
    Vector g = Vector::Zero(v.size());
    Vector w = v;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) {
            continue;
        }
        const double h = step_scale * detail::fd_step(v(i));
        w(i) = v(i) + h;
        const double up = detail::nll_unchecked(data, unpack(w, shape, topt));
        w(i) = v(i) - h;
        const double dn = detail::nll_unchecked(data, unpack(w, shape, topt));
        w(i) = v(i);
        if (!std::isfinite(up) || !std::isfinite(dn)) {
            throw numerical_error("gradient: objective is not finite near theta (coordinate " + std::to_string(i) +
                                  ")");
        }
        g(i) = (up - dn) / (2.0 * h);
    }
    return g;
}

inline Vector gradient(const Theta& th, const MatrixPanel& panel, const TransformOptions& topt = {}) {
    return gradient(th, PreparedPanel(panel), topt);
}

/// Sandwich covariance at theta in natural coordinates.
///
/// C0_hat is the central-difference Jacobian of the exact gradient; C1_hat averages outer products
/// of per-observation scores obtained by central differences of l_t. Inactive parameters get zero
/// rows/columns and NaN standard errors.
inline Sandwich sandwich(const Theta& th, const PreparedPanel& data) {
    validate(th);
    detail::check_dims(th, data.rows(), data.cols());
    const ThetaShape shape = ThetaShape::of(th);
    const std::vector<Eigen::Index> idx = detail::active_indices(active_mask(shape));
    const auto pa = static_cast<Eigen::Index>(idx.size());
    const auto p = static_cast<Eigen::Index>(param_count(shape));
    const std::size_t T = data.size();
    const Vector base = to_natural(th);

    Matrix H(pa, pa);
    Matrix scores(static_cast<Eigen::Index>(T), pa);
    for (Eigen::Index a = 0; a < pa; ++a) {
        const Eigen::Index i = idx[static_cast<std::size_t>(a)];
        const double h = detail::fd_step(base(i));
        Vector up = base;
        Vector dn = base;
        up(i) += h;
        dn(i) -= h;
        const Theta th_up = from_natural(up, shape);
        const Theta th_dn = from_natural(dn, shape);
        const ValueAndGradient gu = value_and_gradient(th_up, data);
        const ValueAndGradient gd = value_and_gradient(th_dn, data);
        if (!std::isfinite(gu.value) || !std::isfinite(gd.value)) {
            throw numerical_error("sandwich: objective is not finite next to theta");
        }
        const Vector col = (gu.gradient - gd.gradient) / (2.0 * h);
        for (Eigen::Index b = 0; b < pa; ++b) {
            H(b, a) = col(idx[static_cast<std::size_t>(b)]);
        }
        const std::vector<double> lu = detail::per_observation_unchecked(data, th_up);
        const std::vector<double> ld = detail::per_observation_unchecked(data, th_dn);
        for (std::size_t t = 0; t < T; ++t) {
            scores(static_cast<Eigen::Index>(t), a) = (lu[t] - ld[t]) / (2.0 * h);
        }
    }
    H = linalg::symmetrize(H);
    const Matrix C1 = scores.transpose() * scores / static_cast<double>(T);

    const double rcond = linalg::inverse_condition_symmetric(H);
    if (!(rcond > 1e-12)) {
        throw numerical_error("sandwich: C0_hat is singular or ill-conditioned (condition number " +
                              std::to_string(rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity()) +
                              "); consider a smaller model (diagonal structure or lower order)");
    }
    const Matrix H_inv = linalg::symmetrize(H.ldlt().solve(Matrix::Identity(pa, pa)));
    const Matrix av = linalg::symmetrize(H_inv * C1 * H_inv) / static_cast<double>(T);

    Sandwich out;
    out.C0_hat = Matrix::Zero(p, p);
    out.C1_hat = Matrix::Zero(p, p);
    out.avar = Matrix::Zero(p, p);
    out.std_errors = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index a = 0; a < pa; ++a) {
        const Eigen::Index i = idx[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < pa; ++b) {
            const Eigen::Index j = idx[static_cast<std::size_t>(b)];
            out.C0_hat(i, j) = H(a, b);
            out.C1_hat(i, j) = C1(a, b);
            out.avar(i, j) = av(a, b);
        }
        out.std_errors(i) = av(a, a) > 0.0 ? std::sqrt(av(a, a)) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

inline Sandwich sandwich(const Theta& th, const MatrixPanel& panel) { return sandwich(th, PreparedPanel(panel)); }

namespace detail {

inline bool near_boundary(const Theta& th, const TransformOptions& topt) {
    constexpr double eps = 1e-4;
    for (const auto* group : {&th.trace.alpha, &th.trace.beta}) {
        for (double x : *group) {
            if (x < eps) {
                return true;
            }
        }
    }
    if (trace_persistence(th.trace) > topt.rho_bar - 1e-3) {
        return true;
    }
    for (const auto* side : {&th.row, &th.col}) {
        for (Eigen::Index i = 1; i < side->dim; ++i) {
            if (side->A0(i, i) < eps) {
                return true;
            }
        }
        if (side->dim > 1 && side->persistence() > topt.rho_bar - 1e-3) {
            return true;
        }
    }
    return false;
}

struct StartOutcome {
    optim::Result opt;
    bool ok = false;
    std::string error;
};

inline StartOutcome run_start(const Theta& start, const PreparedPanel& data, const ThetaShape& shape,
                              const std::vector<Eigen::Index>& idx, const FitOptions& fo) {
    StartOutcome out;
    Vector base;
    try {
        base = pack(start, fo.transform);
    } catch (const std::exception& e) {
        out.error = e.what();
        return out;
    }
    const auto pa = static_cast<Eigen::Index>(idx.size());
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        if (std::find(idx.begin(), idx.end(), i) == idx.end()) {
            base(i) = 0.0;
        }
    }
    Vector z0(pa);
    for (Eigen::Index a = 0; a < pa; ++a) {
        z0(a) = base(idx[static_cast<std::size_t>(a)]);
    }
    auto fg = [&](const Vector& z, Vector& g) -> double {
        Vector v = base;
        for (Eigen::Index a = 0; a < pa; ++a) {
            v(idx[static_cast<std::size_t>(a)]) = z(a);
        }
        if (!v.allFinite()) {
            return kInfeasible;
        }
        const Theta th = unpack(v, shape, fo.transform);
        const ValueAndGradient vg = value_and_gradient(th, data);
        if (!std::isfinite(vg.value) || !vg.gradient.allFinite()) {
            return kInfeasible;
        }
        const Vector gv = unpack_jacobian(v, shape, fo.transform).transpose() * vg.gradient;
        g.resize(pa);
        for (Eigen::Index a = 0; a < pa; ++a) {
            g(a) = gv(idx[static_cast<std::size_t>(a)]);
        }
        return vg.value;
    };
    optim::Options oo;
    oo.max_iter = fo.max_iter;
    oo.grad_tol = fo.tol;
    out.opt = optim::bfgs(fg, z0, oo);
    out.ok = std::isfinite(out.opt.f);
    if (!out.ok) {
        out.error = out.opt.message;
    }
    // map back to the full packed vector
    Vector v = base;
    for (Eigen::Index a = 0; a < pa; ++a) {
        v(idx[static_cast<std::size_t>(a)]) = out.opt.x(a);
    }
    out.opt.x = v;
    return out;
}

}  // namespace detail

/// Quasi maximum likelihood fit by BFGS on the unconstrained parameterization, best of
/// `multistarts` starts, followed (optionally) by the sandwich covariance.
inline FitResult fit(const PreparedPanel& data, const FitOptions& fo = {}) {
    check_order(fo.order);
    if (fo.multistarts < 1) {
        throw invalid_input("fit: multistarts must be at least 1");
    }
    if (fo.max_iter < 1 || !(fo.tol > 0.0)) {
        throw invalid_input("fit: max_iter and tol must be positive");
    }
    const ThetaShape shape{data.rows(), data.cols(), fo.structure, fo.order};
    const std::size_t p = param_count(shape);
    if (data.size() <= p) {
        throw data_error("fit: need T > p (T = " + std::to_string(data.size()) + ", p = " + std::to_string(p) + ")");
    }
    for (const auto& x : data.panel()) {
        if (!x.allFinite()) {
            throw data_error("fit: panel contains non-finite values");
        }
    }
    const std::vector<bool> mask = active_mask(shape);
    const std::vector<Eigen::Index> idx = detail::active_indices(mask);

    Theta start0 = fo.start ? *fo.start : moment_start(data, fo.structure, fo.order);
    if (fo.start) {
        validate(start0);
        detail::check_dims(start0, data.rows(), data.cols());
        if (ThetaShape::of(start0).structure != fo.structure || start0.order() != fo.order) {
            throw invalid_input("fit: warm start does not match the requested structure/order");
        }
    }

    FitResult best;
    std::string errors;
    int successes = 0;
    for (int k = 0; k < fo.multistarts; ++k) {
        Theta start = start0;
        if (k > 0) {
            Rng rng = make_rng(fo.seed, static_cast<std::uint64_t>(k));
            start = perturb_start(start0, rng);
        }
        detail::StartOutcome r = detail::run_start(start, data, shape, idx, fo);
        if (!r.ok) {
            errors += "start " + std::to_string(k) + ": " + r.error + "; ";
            continue;
        }
        ++successes;
        if (r.opt.f < best.neg_loglik) {
            best.theta_hat = canonicalize_signs(unpack(r.opt.x, shape, fo.transform));
            best.neg_loglik = r.opt.f;
            best.converged = r.opt.converged;
            best.iterations = r.opt.iterations;
            best.gradient_norm = r.opt.g.lpNorm<Eigen::Infinity>();
        }
    }
    if (successes == 0) {
        throw numerical_error("fit: every start failed (" + errors + ")");
    }
    best.multistart_best_of = successes;
    best.active = mask;
    best.T = data.size();
    best.boundary = detail::near_boundary(best.theta_hat, fo.transform);
    const auto pp = static_cast<Eigen::Index>(p);
    best.std_errors = Vector::Constant(pp, std::numeric_limits<double>::quiet_NaN());
    if (fo.compute_sandwich) {
        try {
            Sandwich s = sandwich(best.theta_hat, data);
            best.C0_hat = std::move(s.C0_hat);
            best.C1_hat = std::move(s.C1_hat);
            best.avar = std::move(s.avar);
            best.std_errors = std::move(s.std_errors);
            best.has_sandwich = true;
        } catch (const numerical_error& e) {
            best.sandwich_error = e.what();
        }
    }
    return best;
}

inline FitResult fit(const MatrixPanel& panel, const FitOptions& fo = {}) { return fit(PreparedPanel(panel), fo); }

/// FitResult at a given theta (no optimization): likelihood, sandwich and flags, e.g. to diagnose a
/// saved fit. Throws numerical_error when the sandwich cannot be formed.
inline FitResult inference_at(const Theta& th, const PreparedPanel& data) {
    validate(th);
    detail::check_dims(th, data.rows(), data.cols());
    const ThetaShape shape = ThetaShape::of(th);
    FitResult out;
    out.theta_hat = th;
    out.neg_loglik = neg_loglik(th, data);
    out.active = active_mask(shape);
    out.T = data.size();
    out.boundary = detail::near_boundary(th, TransformOptions{});
    Sandwich s = sandwich(th, data);
    out.C0_hat = std::move(s.C0_hat);
    out.C1_hat = std::move(s.C1_hat);
    out.avar = std::move(s.avar);
    out.std_errors = std::move(s.std_errors);
    out.has_sandwich = true;
    return out;
}

}  // namespace mgarch

#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace mgarch {

/// Shape of the ARCH/GARCH coefficient matrices of one side.
enum class Structure { full, diagonal };

inline const char* to_string(Structure s) { return s == Structure::full ? "full" : "diagonal"; }

inline Structure structure_from_string(const std::string& s) {
    if (s == "full") {
        return Structure::full;
    }
    if (s == "diagonal" || s == "diag") {
        return Structure::diagonal;
    }
    throw invalid_input("unknown structure '" + s + "' (expected full|diagonal)");
}

/// Lag orders of the recursions: ARCH lags act on X_{t-j}, GARCH lags on S_{t-j} / y_{t-j}.
struct Order {
    int arch = 1;
    int garch = 1;

    [[nodiscard]] int max_lag() const noexcept { return arch > garch ? arch : garch; }
    friend bool operator==(const Order&, const Order&) = default;
};

inline void check_order(const Order& o) {
    if (o.arch < 1 || o.arch > 2 || o.garch < 0 || o.garch > 2) {
        throw invalid_input("order must satisfy 1 <= arch <= 2 and 0 <= garch <= 2");
    }
}

/// Scalar GARCH driving the trace y_t: w + sum_j alpha_j ||X_{t-j}||^2 + sum_j beta_j y_{t-j}.
struct TraceParams {
    double w = 1.0;
    std::vector<double> alpha{0.0};
    std::vector<double> beta{0.0};
};

/// Row-side (dim m) or column-side (dim n) BEKK coefficients.
///
/// `arch[j]` multiplies the lag-(j+1) outer product and `garch[j]` the lag-(j+1) state.
/// In the order-(1,1) model these are A1 and A2; at order (2,2) the second lags are A3, A4.
struct SideParams {
    Eigen::Index dim = 1;
    Structure structure = Structure::diagonal;
    Matrix A0 = Matrix::Identity(1, 1);
    std::vector<Matrix> arch{Matrix::Zero(1, 1)};
    std::vector<Matrix> garch{Matrix::Zero(1, 1)};

    /// Intercept-only side with A0 = I and zero dynamics.
    static SideParams constant(Eigen::Index d, Structure s = Structure::diagonal, Order o = {}) {
        SideParams p;
        p.dim = d;
        p.structure = s;
        p.A0 = Matrix::Identity(d, d);
        p.arch.assign(static_cast<std::size_t>(o.arch), Matrix::Zero(d, d));
        p.garch.assign(static_cast<std::size_t>(o.garch), Matrix::Zero(d, d));
        return p;
    }

    /// Spectral radius of sum_j (A_j (x) A_j + G_j (x) G_j).
    [[nodiscard]] double persistence() const {
        if (structure == Structure::diagonal) {
            // the Kronecker sum is diagonal with entries sum_j a_i a_k; the maximum sits at i == k
            double r = 0.0;
            for (Eigen::Index i = 0; i < dim; ++i) {
                double ri = 0.0;
                for (const auto& a : arch) {
                    ri += a(i, i) * a(i, i);
                }
                for (const auto& g : garch) {
                    ri += g(i, i) * g(i, i);
                }
                r = std::max(r, ri);
            }
            return r;
        }
        Matrix k = Matrix::Zero(dim * dim, dim * dim);
        for (const auto& a : arch) {
            k += linalg::kron(a, a);
        }
        for (const auto& g : garch) {
            k += linalg::kron(g, g);
        }
        return linalg::spectral_radius(k);
    }
};

/// Full parameter bundle theta = (gamma, delta, zeta).
struct Theta {
    TraceParams trace;
    SideParams row;
    SideParams col;

    [[nodiscard]] Eigen::Index m() const noexcept { return row.dim; }
    [[nodiscard]] Eigen::Index n() const noexcept { return col.dim; }
    [[nodiscard]] Order order() const noexcept {
        return {static_cast<int>(trace.alpha.size()), static_cast<int>(trace.beta.size())};
    }
};

/// Everything needed to size and name the parameter vector.
struct ThetaShape {
    Eigen::Index m = 1;
    Eigen::Index n = 1;
    Structure structure = Structure::diagonal;
    Order order{};

    static ThetaShape of(const Theta& th) { return {th.m(), th.n(), th.row.structure, th.order()}; }
};

// ---------------------------------------------------------------------------
// Parameter counts and natural-vector layout

inline std::size_t side_param_count(Eigen::Index d, Structure s, Order o) {
    const auto dd = static_cast<std::size_t>(d);
    const std::size_t per_matrix = s == Structure::full ? dd * dd : dd;
    return static_cast<std::size_t>(o.arch + o.garch) * per_matrix + dd * (dd + 1) / 2 - 1;
}

inline std::size_t trace_param_count(Order o) { return 1 + static_cast<std::size_t>(o.arch + o.garch); }

/// p = 3 + p_delta + p_zeta at order (1,1).
inline std::size_t param_count(const ThetaShape& s) {
    return trace_param_count(s.order) + side_param_count(s.m, s.structure, s.order) +
           side_param_count(s.n, s.structure, s.order);
}

namespace detail {

// Visits lag j = 0..max_lag-1, ARCH matrix before GARCH matrix, so order (1,1)
// reads A1, A2 and order (2,2) reads A1, A2, A3, A4.
template <class F>
void for_each_dynamic(int n_arch, int n_garch, F&& f) {
    const int lags = n_arch > n_garch ? n_arch : n_garch;
    for (int j = 0; j < lags; ++j) {
        if (j < n_arch) {
            f(true, j, 2 * j + 1);
        }
        if (j < n_garch) {
            f(false, j, 2 * j + 2);
        }
    }
}

inline void check_side(const SideParams& s, Order o, const char* what) {
    const std::string who(what);
    if (s.dim <= 0) {
        throw invalid_input(who + ": dimension must be positive");
    }
    if (s.A0.rows() != s.dim || s.A0.cols() != s.dim) {
        throw invalid_input(who + ": A0 has wrong dims");
    }
    if (s.arch.size() != static_cast<std::size_t>(o.arch) ||
        s.garch.size() != static_cast<std::size_t>(o.garch)) {
        throw invalid_input(who + ": lag count does not match the trace recursion order");
    }
    for (const auto* group : {&s.arch, &s.garch}) {
        for (const auto& a : *group) {
            if (a.rows() != s.dim || a.cols() != s.dim) {
                throw invalid_input(who + ": dynamic coefficient matrix has wrong dims");
            }
            if (!a.allFinite()) {
                throw invalid_input(who + ": non-finite coefficient");
            }
            if (s.structure == Structure::diagonal) {
                Matrix off = a;
                off.diagonal().setZero();
                if (off.cwiseAbs().maxCoeff() != 0.0) {
                    throw invalid_input(who + ": diagonal structure with non-zero off-diagonal");
                }
            }
        }
    }
    if (!s.A0.allFinite()) {
        throw invalid_input(who + ": non-finite A0");
    }
    for (Eigen::Index i = 0; i < s.dim; ++i) {
        for (Eigen::Index j = i + 1; j < s.dim; ++j) {
            if (s.A0(i, j) != 0.0) {
                throw invalid_input(who + ": A0 must be lower triangular");
            }
        }
        if (s.A0(i, i) < 0.0) {
            throw invalid_input(who + ": A0 must have a non-negative diagonal");
        }
    }
    if (s.A0(0, 0) != 1.0) {
        throw invalid_input(who + ": A0(1,1) must equal 1");
    }
}

}  // namespace detail

/// Throws invalid_input unless every structural invariant of theta holds.
inline void validate(const Theta& th) {
    const Order o = th.order();
    check_order(o);
    if (!(th.trace.w > 0.0) || !std::isfinite(th.trace.w)) {
        throw invalid_input("theta: w must be positive");
    }
    for (double a : th.trace.alpha) {
        if (!(a >= 0.0) || !std::isfinite(a)) {
            throw invalid_input("theta: alpha must be non-negative");
        }
    }
    for (double b : th.trace.beta) {
        if (!(b >= 0.0) || !std::isfinite(b)) {
            throw invalid_input("theta: beta must be non-negative");
        }
    }
    detail::check_side(th.row, o, "row side");
    detail::check_side(th.col, o, "column side");
    if (th.row.structure != th.col.structure) {
        throw invalid_input("theta: row and column sides must share a structure");
    }
}

inline double trace_persistence(const TraceParams& tp) {
    double s = 0.0;
    for (double a : tp.alpha) {
        s += a;
    }
    for (double b : tp.beta) {
        s += b;
    }
    return s;
}

/// True when alpha + beta and both BEKK persistence radii are at most rho_bar, up to rounding.
inline bool is_stationary(const Theta& th, double rho_bar = 0.999) {
    const double bound = rho_bar * (1.0 + 1e-12);
    return trace_persistence(th.trace) <= bound && th.row.persistence() <= bound && th.col.persistence() <= bound;
}

/// Flip signs of whole ARCH/GARCH matrices so that each (1,1) entry is non-negative.
/// The likelihood only sees A X X' A', so this does not change the model.
inline Theta canonicalize_signs(Theta th) {
    for (auto* side : {&th.row, &th.col}) {
        for (auto* group : {&side->arch, &side->garch}) {
            for (auto& a : *group) {
                if (a(0, 0) < 0.0) {
                    a = -a;
                }
            }
        }
    }
    return th;
}

/// Human-readable names of the natural parameter vector, e.g. "w", "alpha1", "A0[2,1]".
inline std::vector<std::string> param_names(const ThetaShape& s) {
    std::vector<std::string> names;
    names.emplace_back("w");
    detail::for_each_dynamic(s.order.arch, s.order.garch, [&](bool is_arch, int j, int) {
        names.push_back((is_arch ? "alpha" : "beta") + std::to_string(j + 1));
    });
    auto side = [&](Eigen::Index d, char letter) {
        const std::string l(1, letter);
        for (Eigen::Index c = 0; c < d; ++c) {
            for (Eigen::Index r = c; r < d; ++r) {
                if (r == 0 && c == 0) {
                    continue;
                }
                names.push_back(l + "0[" + std::to_string(r + 1) + "," + std::to_string(c + 1) + "]");
            }
        }
        detail::for_each_dynamic(s.order.arch, s.order.garch, [&](bool, int, int number) {
            const std::string base = l + std::to_string(number);
            for (Eigen::Index c = 0; c < d; ++c) {
                for (Eigen::Index r = 0; r < d; ++r) {
                    if (s.structure == Structure::diagonal && r != c) {
                        continue;
                    }
                    names.push_back(base + "[" + std::to_string(r + 1) + "," + std::to_string(c + 1) + "]");
                }
            }
        });
    };
    side(s.m, 'A');
    side(s.n, 'B');
    return names;
}

/// Natural parameter vector (w, alpha, beta, vech(A0)\A0_11, vec(A1), vec(A2), same for B).
///
/// Diagonal structure stores only the diagonal of each dynamic matrix. vech is column-major.
inline Vector to_natural(const Theta& th) {
    const ThetaShape s = ThetaShape::of(th);
    Vector v(static_cast<Eigen::Index>(param_count(s)));
    Eigen::Index k = 0;
    v(k++) = th.trace.w;
    detail::for_each_dynamic(s.order.arch, s.order.garch, [&](bool is_arch, int j, int) {
        v(k++) = is_arch ? th.trace.alpha[static_cast<std::size_t>(j)] : th.trace.beta[static_cast<std::size_t>(j)];
    });
    auto side = [&](const SideParams& sp) {
        const Eigen::Index d = sp.dim;
        for (Eigen::Index c = 0; c < d; ++c) {
            for (Eigen::Index r = c; r < d; ++r) {
                if (r == 0 && c == 0) {
                    continue;
                }
                v(k++) = sp.A0(r, c);
            }
        }
        detail::for_each_dynamic(s.order.arch, s.order.garch, [&](bool is_arch, int j, int) {
            const Matrix& a = is_arch ? sp.arch[static_cast<std::size_t>(j)] : sp.garch[static_cast<std::size_t>(j)];
            for (Eigen::Index c = 0; c < d; ++c) {
                for (Eigen::Index r = 0; r < d; ++r) {
                    if (sp.structure == Structure::diagonal && r != c) {
                        continue;
                    }
                    v(k++) = a(r, c);
                }
            }
        });
    };
    side(th.row);
    side(th.col);
    return v;
}

/// Inverse of to_natural. Does not validate positivity; callers decide.
inline Theta from_natural(const Vector& v, const ThetaShape& s) {
    check_order(s.order);
    if (static_cast<std::size_t>(v.size()) != param_count(s)) {
        throw invalid_input("from_natural: vector length " + std::to_string(v.size()) + " does not match p = " +
                            std::to_string(param_count(s)));
    }
    if (!v.allFinite()) {
        throw invalid_input("from_natural: non-finite entries");
    }
    Theta th;
    Eigen::Index k = 0;
    th.trace.w = v(k++);
    th.trace.alpha.assign(static_cast<std::size_t>(s.order.arch), 0.0);
    th.trace.beta.assign(static_cast<std::size_t>(s.order.garch), 0.0);
    detail::for_each_dynamic(s.order.arch, s.order.garch, [&](bool is_arch, int j, int) {
        (is_arch ? th.trace.alpha : th.trace.beta)[static_cast<std::size_t>(j)] = v(k++);
    });
    auto side = [&](Eigen::Index d) {
        SideParams sp = SideParams::constant(d, s.structure, s.order);
        for (Eigen::Index c = 0; c < d; ++c) {
            for (Eigen::Index r = c; r < d; ++r) {
                if (r == 0 && c == 0) {
                    continue;
                }
                sp.A0(r, c) = v(k++);
            }
        }
        detail::for_each_dynamic(s.order.arch, s.order.garch, [&](bool is_arch, int j, int) {
            Matrix& a = is_arch ? sp.arch[static_cast<std::size_t>(j)] : sp.garch[static_cast<std::size_t>(j)];
            for (Eigen::Index c = 0; c < d; ++c) {
                for (Eigen::Index r = 0; r < d; ++r) {
                    if (s.structure == Structure::diagonal && r != c) {
                        continue;
                    }
                    a(r, c) = v(k++);
                }
            }
        });
        return sp;
    };
    th.row = side(s.m);
    th.col = side(s.n);
    return th;
}

// ---------------------------------------------------------------------------
// Unconstrained parameterization used by the optimizer.
//
//   w, diag(A0), diag(B0)      -> exp
//   alpha_j, beta_j             -> squares, then a joint radial squash keeping the sum below rho_bar
//   ARCH/GARCH matrices         -> raw entries, then a radial squash keeping the persistence below
//                                  rho_bar (per diagonal index for diagonal structure)
//
// The squash is the identity up to `knee * rho_bar` and saturates smoothly (tanh) above it, so
// interior parameter values map one-to-one onto themselves.

struct TransformOptions {
    double rho_bar = 0.999;
    double knee = 0.9;
};

namespace detail {

inline double squash(double r, const TransformOptions& o) {
    const double k = o.knee * o.rho_bar;
    if (r <= k) {
        return r;
    }
    const double span = o.rho_bar - k;
    return k + span * std::tanh((r - k) / span);
}

inline double unsquash(double r, const TransformOptions& o) {
    const double k = o.knee * o.rho_bar;
    if (r <= k) {
        return r;
    }
    const double span = o.rho_bar - k;
    const double z = (r - k) / span;
    if (!(z < 1.0)) {
        throw invalid_input("pack: parameter violates the stationarity bound rho_bar");
    }
    return k + span * std::atanh(z);
}

// ratio squash(r)/r with the removable singularity at 0 handled
inline double squash_ratio(double r, const TransformOptions& o) { return r > 0.0 ? squash(r, o) / r : 1.0; }

inline double unsquash_ratio(double r, const TransformOptions& o) { return r > 0.0 ? unsquash(r, o) / r : 1.0; }

inline void scale_dynamic(SideParams& sp, const TransformOptions& o, bool forward) {
    if (sp.structure == Structure::diagonal) {
        for (Eigen::Index i = 0; i < sp.dim; ++i) {
            double r = 0.0;
            for (const auto* group : {&sp.arch, &sp.garch}) {
                for (const auto& a : *group) {
                    r += a(i, i) * a(i, i);
                }
            }
            const double c = std::sqrt(forward ? squash_ratio(r, o) : unsquash_ratio(r, o));
            for (auto* group : {&sp.arch, &sp.garch}) {
                for (auto& a : *group) {
                    a(i, i) *= c;
                }
            }
        }
        return;
    }
    const double r = sp.persistence();
    const double c = std::sqrt(forward ? squash_ratio(r, o) : unsquash_ratio(r, o));
    for (auto* group : {&sp.arch, &sp.garch}) {
        for (auto& a : *group) {
            a *= c;
        }
    }
}

}  // namespace detail

/// Maps a valid, strictly stationary theta to unconstrained reals.
inline Vector pack(const Theta& th, const TransformOptions& opt = {}) {
    validate(th);
    Theta raw = th;
    const double s = trace_persistence(th.trace);
    const double ratio = detail::unsquash_ratio(s, opt);
    for (auto* group : {&raw.trace.alpha, &raw.trace.beta}) {
        for (auto& x : *group) {
            x = std::sqrt(x * ratio);
        }
    }
    raw.trace.w = std::log(th.trace.w);
    for (auto* side : {&raw.row, &raw.col}) {
        detail::scale_dynamic(*side, opt, false);
        for (Eigen::Index i = 1; i < side->dim; ++i) {
            side->A0(i, i) = std::log(side->A0(i, i));
        }
    }
    Vector v = to_natural(raw);
    if (!v.allFinite()) {
        throw invalid_input("pack: theta lies on the boundary of the parameter space");
    }
    return v;
}

/// Maps any real vector of length p onto a valid theta (inverse of pack).
inline Theta unpack(const Vector& v, const ThetaShape& shape, const TransformOptions& opt = {}) {
    Theta th = from_natural(v, shape);
    th.trace.w = std::exp(th.trace.w);
    double s = 0.0;
    for (auto* group : {&th.trace.alpha, &th.trace.beta}) {
        for (auto& x : *group) {
            x = x * x;
            s += x;
        }
    }
    const double ratio = detail::squash_ratio(s, opt);
    for (auto* group : {&th.trace.alpha, &th.trace.beta}) {
        for (auto& x : *group) {
            x *= ratio;
        }
    }
    for (auto* side : {&th.row, &th.col}) {
        for (Eigen::Index i = 1; i < side->dim; ++i) {
            side->A0(i, i) = std::exp(side->A0(i, i));
        }
        detail::scale_dynamic(*side, opt, true);
    }
    return th;
}

}  // namespace mgarch

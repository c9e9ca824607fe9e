#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "homogfp/coefficients.hpp"
#include "homogfp/grid.hpp"
#include "homogfp/linalg.hpp"

namespace homogfp {

// ---------------------------------------------------------------------------
// Scaling regime: beta = 2*alpha (fast, time-periodic parabolic cell problem),
// beta > 2*alpha (fast, tau-averaged elliptic), beta < 2*alpha (slow, elliptic
// per tau-slice). omega_{alpha,1} gates the non-product perturbation.

struct Regime {
    enum class Scale { FastEqual, FastStrict, Slow };
    Scale tag = Scale::FastEqual;
    double omega = 1.0;
    double alpha = 1.0;
    double beta = 2.0;

    const char* name() const {
        switch (tag) {
            case Scale::FastEqual: return "fast-equal";
            case Scale::FastStrict: return "fast-strict";
            default: return "slow";
        }
    }
};

inline Regime classify_regime(double alpha, double beta, double tol = 1e-12) {
    if (!(alpha > 0.0) || alpha > 1.0 + tol)
        throw std::invalid_argument("classify_regime: alpha must lie in (0,1], got " + std::to_string(alpha));
    if (!(beta > 0.0)) throw std::invalid_argument("classify_regime: beta must be positive");
    Regime r;
    r.alpha = alpha;
    r.beta = beta;
    r.omega = std::fabs(alpha - 1.0) <= tol ? 1.0 : 0.0;
    const double d = beta - 2.0 * alpha;
    r.tag = std::fabs(d) <= tol ? Regime::Scale::FastEqual
                                : (d > 0.0 ? Regime::Scale::FastStrict : Regime::Scale::Slow);
    return r;
}

// Exact comparison when both exponents are given as rationals pa/qa and pb/qb.
inline Regime classify_regime_rational(long long pa, long long qa, long long pb, long long qb) {
    if (qa <= 0 || qb <= 0 || pa <= 0 || pb <= 0)
        throw std::invalid_argument("classify_regime_rational: exponents must be positive rationals");
    if (pa > qa) throw std::invalid_argument("classify_regime_rational: alpha must lie in (0,1]");
    Regime r;
    r.alpha = static_cast<double>(pa) / qa;
    r.beta = static_cast<double>(pb) / qb;
    r.omega = pa == qa ? 1.0 : 0.0;
    const long long lhs = pb * qa, rhs = 2 * pa * qb;
    r.tag = lhs == rhs ? Regime::Scale::FastEqual : (lhs > rhs ? Regime::Scale::FastStrict : Regime::Scale::Slow);
    return r;
}

// ---------------------------------------------------------------------------
// Flux-form discretization of A = -div_y(K grad_y .) on a periodic Y-slice with
// a symmetric matrix coefficient K. Diagonal entries live on faces (arithmetic
// average of node values), cross entries stay at nodes with central differences;
// apply/bilinear/flux/rhs are mutually consistent (exact discrete summation by
// parts), which the effective-coefficient identities rely on.
class FluxOperator {
  public:
    FluxOperator() = default;

    // Ktab: ynodes * dim * dim row-major node values of the symmetric coefficient.
    FluxOperator(const CellGrid& g, std::vector<double> Ktab) : dim_(g.dim), ny_(g.ny), h_(g.hy), K_(std::move(Ktab)) {
        const int yn = ynodes();
        face_.assign(static_cast<size_t>(dim_) * yn, 0.0);
        for (int d = 0; d < dim_; ++d)
            for (int n = 0; n < yn; ++n) face_[d * yn + n] = 0.5 * (Kdd(n, d) + Kdd(neighbor(n, d, +1), d));
        diag_.assign(yn, 0.0);
        for (int n = 0; n < yn; ++n) {
            double s = 0.0;
            for (int d = 0; d < dim_; ++d) s += face_[d * yn + n] + face_[d * yn + neighbor(n, d, -1)];
            diag_[n] = s / (h_ * h_);
        }
    }

    int ynodes() const { return dim_ == 1 ? ny_ : ny_ * ny_; }
    const std::vector<double>& diagonal() const { return diag_; }

    // out = A u
    void apply(const std::vector<double>& u, std::vector<double>& out) const {
        const int yn = ynodes();
        out.assign(yn, 0.0);
        for (int n = 0; n < yn; ++n) {
            double div = 0.0;
            for (int d = 0; d < dim_; ++d) {
                const int np = neighbor(n, d, +1), nm = neighbor(n, d, -1);
                div += face_[d * yn + n] * (u[np] - u[n]) - face_[d * yn + nm] * (u[n] - u[nm]);
            }
            out[n] = -div / (h_ * h_);
        }
        if (dim_ == 2 && has_cross()) {
            for (int n = 0; n < yn; ++n) {
                // d/dy1 (K12 d u/dy2) + d/dy2 (K12 d u/dy1), all central
                const int e1p = neighbor(n, 0, +1), e1m = neighbor(n, 0, -1);
                const int e2p = neighbor(n, 1, +1), e2m = neighbor(n, 1, -1);
                const double t1 = Koff(e1p) * dcentral(u, e1p, 1) - Koff(e1m) * dcentral(u, e1m, 1);
                const double t2 = Koff(e2p) * dcentral(u, e2p, 0) - Koff(e2m) * dcentral(u, e2m, 0);
                out[n] -= (t1 + t2) / (2.0 * h_);
            }
        }
    }

    // <A u, w> evaluated as the energy pairing; exact for the discretization above.
    double bilinear(const std::vector<double>& u, const std::vector<double>& w) const {
        const int yn = ynodes();
        double s = 0.0;
        for (int d = 0; d < dim_; ++d)
            for (int n = 0; n < yn; ++n) {
                const int np = neighbor(n, d, +1);
                s += face_[d * yn + n] * (u[np] - u[n]) * (w[np] - w[n]);
            }
        s /= h_ * h_;
        if (dim_ == 2 && has_cross()) {
            double c = 0.0;
            for (int n = 0; n < yn; ++n)
                c += Koff(n) * (dcentral(u, n, 0) * dcentral(w, n, 1) + dcentral(u, n, 1) * dcentral(w, n, 0));
            s += c;
        }
        return s / yn;  // node-average quadrature, |Y| = 1
    }

    // bilinear(u, y_j) without forming the non-periodic y_j field
    double bilinear_with_coordinate(const std::vector<double>& u, int j) const {
        const int yn = ynodes();
        double s = 0.0;
        for (int n = 0; n < yn; ++n) s += face_[j * yn + n] * (u[neighbor(n, j, +1)] - u[n]);
        s /= h_;
        if (dim_ == 2 && has_cross()) {
            const int other = 1 - j;
            for (int n = 0; n < yn; ++n) s += Koff(n) * dcentral(u, n, other);
        }
        return s / yn;
    }

    // energy pairing of (y_i, y_j): integral of K^{ij}
    double coordinate_pair(int i, int j) const {
        const int yn = ynodes();
        double s = 0.0;
        if (i == j)
            for (int n = 0; n < yn; ++n) s += face_[i * yn + n];
        else
            for (int n = 0; n < yn; ++n) s += Koff(n);
        return s / yn;
    }

    // rhs of the corrector problem: -div_y(K e_j), zero-mean by construction
    void rhs_probe(int j, std::vector<double>& out) const {
        const int yn = ynodes();
        out.assign(yn, 0.0);
        for (int n = 0; n < yn; ++n) {
            double div = face_[j * yn + n] - face_[j * yn + neighbor(n, j, -1)];
            div /= h_;
            if (dim_ == 2 && has_cross()) {
                const int other = 1 - j;
                div += dcentral_of(
                    [this](int m) { return Koff(m); }, n, other);
            }
            out[n] = -div;
        }
    }

    // -div_y(K w) for a y-independent vector w (the grad b2 forcing)
    void div_const_vector(const std::array<double, 2>& w, std::vector<double>& out) const {
        const int yn = ynodes();
        out.assign(yn, 0.0);
        for (int n = 0; n < yn; ++n) {
            double div = 0.0;
            for (int d = 0; d < dim_; ++d) {
                div += (face_[d * yn + n] - face_[d * yn + neighbor(n, d, -1)]) / h_ * w[d];
                if (dim_ == 2 && has_cross()) {
                    const int other = 1 - d;
                    div += dcentral_of(
                               [this](int m) { return Koff(m); }, n, d) *
                           w[other];
                }
            }
            out[n] = -div;
        }
    }

    // nodal flux K grad u: component d = mean of the two adjacent d-faces plus cross part
    void flux(const std::vector<double>& u, std::vector<double>& out /* yn*dim */) const {
        const int yn = ynodes();
        out.assign(static_cast<size_t>(yn) * dim_, 0.0);
        for (int n = 0; n < yn; ++n)
            for (int d = 0; d < dim_; ++d) {
                const int np = neighbor(n, d, +1), nm = neighbor(n, d, -1);
                double f = 0.5 * (face_[d * yn + n] * (u[np] - u[n]) + face_[d * yn + nm] * (u[n] - u[nm])) / h_;
                if (dim_ == 2 && has_cross()) f += Koff(n) * dcentral(u, n, 1 - d);
                out[static_cast<size_t>(n) * dim_ + d] = f;
            }
    }

    // nodal flux of the coordinate y_j: K e_j with the same face/node split
    void flux_of_coordinate(int j, std::vector<double>& out) const {
        const int yn = ynodes();
        out.assign(static_cast<size_t>(yn) * dim_, 0.0);
        for (int n = 0; n < yn; ++n)
            for (int d = 0; d < dim_; ++d) {
                double f = 0.0;
                if (d == j) f += 0.5 * (face_[d * yn + n] + face_[d * yn + neighbor(n, d, -1)]);
                if (dim_ == 2 && d != j && has_cross()) f += Koff(n);
                out[static_cast<size_t>(n) * dim_ + d] = f;
            }
    }

    int neighbor(int n, int d, int step) const {
        if (dim_ == 1) {
            int i = (n + step) % ny_;
            return i < 0 ? i + ny_ : i;
        }
        int i = n % ny_, j = n / ny_;
        if (d == 0) {
            i = (i + step) % ny_;
            if (i < 0) i += ny_;
        } else {
            j = (j + step) % ny_;
            if (j < 0) j += ny_;
        }
        return i + ny_ * j;
    }

  private:
    int dim_ = 1, ny_ = 0;
    double h_ = 1.0;
    std::vector<double> K_;     // node values, dim*dim each
    std::vector<double> face_;  // per direction d: K^{dd} averaged onto +d faces
    std::vector<double> diag_;

    double Kdd(int n, int d) const { return K_[static_cast<size_t>(n) * dim_ * dim_ + d * dim_ + d]; }
    double Koff(int n) const { return K_[static_cast<size_t>(n) * 4 + 1]; }
    bool has_cross() const {
        if (dim_ != 2) return false;
        for (size_t n = 0; n < K_.size() / 4; ++n)
            if (K_[n * 4 + 1] != 0.0) return true;
        return false;
    }
    double dcentral(const std::vector<double>& u, int n, int d) const {
        return (u[neighbor(n, d, +1)] - u[neighbor(n, d, -1)]) / (2.0 * h_);
    }
    template <class F>
    double dcentral_of(F&& f, int n, int d) const {
        return (f(neighbor(n, d, +1)) - f(neighbor(n, d, -1))) / (2.0 * h_);
    }
};

// Node coefficient table K(y) = mult * B(y, tau-slice) from a sampled cell.
inline std::vector<double> slice_coefficient(const SampledCell& s, const CellGrid& g, int itau, double mult) {
    const int yn = g.ynodes(), dd = g.dim * g.dim;
    std::vector<double> K(static_cast<size_t>(yn) * dd);
    for (int n = 0; n < yn; ++n)
        for (int c = 0; c < dd; ++c) K[static_cast<size_t>(n) * dd + c] = mult * s.B_q[(static_cast<size_t>(n) * g.ntau + itau) * dd + c];
    return K;
}

// M_S(b2 B / a2): micro-time average of the fast-strict coefficient.
inline std::vector<double> tau_averaged_coefficient(const SampledCell& s, const CellGrid& g) {
    const int yn = g.ynodes(), dd = g.dim * g.dim;
    std::vector<double> K(static_cast<size_t>(yn) * dd, 0.0);
    for (int it = 0; it < g.ntau; ++it) {
        const double w = s.b2_tau[it] / s.a2_tau[it] / g.ntau;
        for (int n = 0; n < yn; ++n)
            for (int c = 0; c < dd; ++c) K[static_cast<size_t>(n) * dd + c] += w * s.B_q[(static_cast<size_t>(n) * g.ntau + it) * dd + c];
    }
    return K;
}

struct CellSolveOptions {
    double linear_tol = 1e-12;      // relative residual of the inner solves
    int linear_maxit = 200000;
    double fixed_point_tol = 1e-10;  // sup-norm period defect
    int max_periods = 500;
};

struct MarchingDiagnostics {
    std::vector<double> defect_history;
    double contraction = 0.0;  // last observed defect ratio
    int periods = 0;
};

// Period-marching solution of  M d_tau u + (1/a2) A_tau u = F_tau  on Q, tau-periodic:
// implicit steps over one period, re-imposing the end state until the period map contracts.
inline CellField periodic_parabolic_fixed_point(const std::vector<double>& M, const std::vector<FluxOperator>& ops,
                                                const std::vector<double>& scale,
                                                const std::vector<std::vector<double>>& rhs, const CellGrid& g,
                                                const CellSolveOptions& opt, MarchingDiagnostics* diag = nullptr) {
    const int yn = g.ynodes(), nt = g.ntau;
    const double dtau = g.htau;
    std::vector<double> state(yn, 0.0), prev_start(yn, 0.0), tmp(yn), rhs_step(yn), precond(yn);
    CellField out = CellField::make(g, CellDomain::Q);
    double last_defect = -1.0;
    bool converged = false;
    int period = 0;
    for (; period < opt.max_periods; ++period) {
        prev_start = state;
        for (int m = 1; m <= nt; ++m) {
            const int sl = m % nt;
            const FluxOperator& A = ops[sl];
            const double c = scale[sl];
            for (int n = 0; n < yn; ++n) rhs_step[n] = M[n] * state[n] / dtau + rhs[sl][n];
            auto apply = [&](const std::vector<double>& u, std::vector<double>& o) {
                A.apply(u, o);
                for (int n = 0; n < yn; ++n) o[n] = M[n] * u[n] / dtau + c * o[n];
            };
            const auto& ad = A.diagonal();
            for (int n = 0; n < yn; ++n) precond[n] = M[n] / dtau + c * ad[n];
            SolveStats st = pcg(apply, rhs_step, state, opt.linear_tol, opt.linear_maxit, &precond, false);
            if (!st.converged)
                throw std::runtime_error("periodic_parabolic_fixed_point: implicit step did not converge (residual " +
                                         std::to_string(st.residual) + ")");
        }
        double defect = 0.0;
        for (int n = 0; n < yn; ++n) defect = std::max(defect, std::fabs(state[n] - prev_start[n]));
        if (diag) {
            if (last_defect > 0.0) diag->contraction = defect / last_defect;
            diag->defect_history.push_back(defect);
        }
        if (defect < opt.fixed_point_tol) {
            converged = true;
            ++period;
            break;
        }
        last_defect = defect;
    }
    if (!converged)
        throw std::runtime_error("periodic_parabolic_fixed_point: no contraction within " +
                                 std::to_string(opt.max_periods) + " periods");
    if (diag) diag->periods = period;
    // one more period to record the converged cycle on the tau-grid
    for (int m = 1; m <= nt; ++m) {
        const int sl = m % nt;
        const FluxOperator& A = ops[sl];
        const double c = scale[sl];
        for (int n = 0; n < yn; ++n) rhs_step[n] = M[n] * state[n] / dtau + rhs[sl][n];
        auto apply = [&](const std::vector<double>& u, std::vector<double>& o) {
            A.apply(u, o);
            for (int n = 0; n < yn; ++n) o[n] = M[n] * u[n] / dtau + c * o[n];
        };
        const auto& ad = A.diagonal();
        for (int n = 0; n < yn; ++n) precond[n] = M[n] / dtau + c * ad[n];
        pcg(apply, rhs_step, state, opt.linear_tol, opt.linear_maxit, &precond, false);
        for (int n = 0; n < yn; ++n) out.at(n, sl) = state[n];
    }
    return out;
}

namespace detail {

inline void center_field(CellField& f, Regime::Scale tag, const CellGrid& g) {
    const int yn = g.ynodes();
    if (tag == Regime::Scale::Slow) {
        for (int it = 0; it < g.ntau; ++it) {
            double m = 0.0;
            for (int n = 0; n < yn; ++n) m += f.at(n, it);
            m /= yn;
            for (int n = 0; n < yn; ++n) f.at(n, it) -= m;
        }
    } else {
        double m = 0.0;
        for (int n = 0; n < yn; ++n)
            for (int it = 0; it < g.ntau; ++it) m += f.at(n, it);
        m /= static_cast<double>(yn) * g.ntau;
        for (int n = 0; n < yn; ++n)
            for (int it = 0; it < g.ntau; ++it) f.at(n, it) -= m;
    }
}

inline double mean_defect(const CellField& f, Regime::Scale tag, const CellGrid& g) {
    const int yn = g.ynodes();
    double worst = 0.0;
    if (tag == Regime::Scale::Slow) {
        for (int it = 0; it < g.ntau; ++it) {
            double m = 0.0;
            for (int n = 0; n < yn; ++n) m += f.at(n, it);
            worst = std::max(worst, std::fabs(m / yn));
        }
    } else {
        double m = 0.0;
        for (int n = 0; n < yn; ++n)
            for (int it = 0; it < g.ntau; ++it) m += f.at(n, it);
        worst = std::fabs(m / (static_cast<double>(yn) * g.ntau));
    }
    return worst;
}

// capacity a1/b1 on Y-nodes
inline std::vector<double> capacity_table(const SampledCell& s) {
    std::vector<double> M(s.a1_y.size());
    for (size_t n = 0; n < M.size(); ++n) M[n] = s.a1_y[n] / s.b1_y[n];
    return M;
}

// b/b1 on Q (empty when b is absent)
inline std::vector<double> b_over_b1(const SampledCell& s, const CellGrid& g) {
    if (s.b_q.empty()) return {};
    const int yn = g.ynodes();
    std::vector<double> r(s.b_q.size());
    for (int n = 0; n < yn; ++n)
        for (int it = 0; it < g.ntau; ++it)
            r[static_cast<size_t>(n) * g.ntau + it] = s.b_q[static_cast<size_t>(n) * g.ntau + it] / s.b1_y[n];
    return r;
}

// zeta forcing on a tau-slice as a zero-mean rhs for the *unscaled* operator
// A_{b2 B}: rhs = -div_y(B (grad_x b2 + omega grad_y (b/b1))).
inline std::vector<double> zeta_slice_rhs(const SampledCell& s, const MacroDerivTables& md, const Regime& regime,
                                          const CellGrid& g, int itau, const std::vector<double>& bob1) {
    const int yn = g.ynodes();
    FluxOperator B_only(g, slice_coefficient(s, g, itau, 1.0));
    std::vector<double> rhs(yn, 0.0), part(yn);
    std::array<double, 2> w{0.0, 0.0};
    for (int d = 0; d < g.dim; ++d) w[d] = md.dx_b2[d].empty() ? 0.0 : md.dx_b2[d][itau];
    if (w[0] != 0.0 || w[1] != 0.0) {
        B_only.div_const_vector(w, part);
        for (int n = 0; n < yn; ++n) rhs[n] += part[n];
    }
    if (regime.omega != 0.0 && !bob1.empty()) {
        std::vector<double> gslice(yn);
        for (int n = 0; n < yn; ++n) gslice[n] = bob1[static_cast<size_t>(n) * g.ntau + itau];
        B_only.apply(gslice, part);  // A_B g = -div(B grad g)
        for (int n = 0; n < yn; ++n) rhs[n] += regime.omega * part[n];
    }
    return rhs;
}

}  // namespace detail

// Corrector fields chi^1..chi^n and zeta with regime tag and residuals. Fields are
// stored on Q in all regimes (fast-strict solutions are tau-constant).
struct CellCorrectors {
    Regime regime;
    std::vector<CellField> chi;
    CellField zeta;
    double residual = 0.0;
    double mean_defect = 0.0;
    MarchingDiagnostics marching;
};

inline std::vector<CellField> solve_chi(const SampledCell& s, const Regime& regime, const CellGrid& g,
                                        const CellSolveOptions& opt = {}, MarchingDiagnostics* diag = nullptr) {
    const int yn = g.ynodes();
    std::vector<CellField> chi;
    chi.reserve(g.dim);
    switch (regime.tag) {
        case Regime::Scale::Slow: {
            for (int j = 0; j < g.dim; ++j) {
                CellField f = CellField::make(g, CellDomain::Q);
                for (int it = 0; it < g.ntau; ++it) {
                    FluxOperator A(g, slice_coefficient(s, g, it, s.b2_tau[it]));
                    std::vector<double> rhs(yn), x(yn, 0.0);
                    A.rhs_probe(j, rhs);
                    remove_mean(rhs);
                    auto apply = [&](const std::vector<double>& u, std::vector<double>& o) { A.apply(u, o); };
                    SolveStats st = pcg(apply, rhs, x, opt.linear_tol, opt.linear_maxit, &A.diagonal(), true);
                    if (!st.converged) throw std::runtime_error("solve_chi(slow): cell solve did not converge");
                    for (int n = 0; n < yn; ++n) f.at(n, it) = x[n];
                }
                detail::center_field(f, regime.tag, g);
                chi.push_back(std::move(f));
            }
            break;
        }
        case Regime::Scale::FastStrict: {
            FluxOperator A(g, tau_averaged_coefficient(s, g));
            for (int j = 0; j < g.dim; ++j) {
                std::vector<double> rhs(yn), x(yn, 0.0);
                A.rhs_probe(j, rhs);
                remove_mean(rhs);
                auto apply = [&](const std::vector<double>& u, std::vector<double>& o) { A.apply(u, o); };
                SolveStats st = pcg(apply, rhs, x, opt.linear_tol, opt.linear_maxit, &A.diagonal(), true);
                if (!st.converged) throw std::runtime_error("solve_chi(fast-strict): cell solve did not converge");
                CellField f = CellField::make(g, CellDomain::Q);
                for (int n = 0; n < yn; ++n)
                    for (int it = 0; it < g.ntau; ++it) f.at(n, it) = x[n];
                detail::center_field(f, regime.tag, g);
                chi.push_back(std::move(f));
            }
            break;
        }
        case Regime::Scale::FastEqual: {
            std::vector<double> M = detail::capacity_table(s);
            std::vector<FluxOperator> ops;
            std::vector<double> scale(g.ntau);
            ops.reserve(g.ntau);
            for (int it = 0; it < g.ntau; ++it) {
                ops.emplace_back(g, slice_coefficient(s, g, it, s.b2_tau[it]));
                scale[it] = 1.0 / s.a2_tau[it];
            }
            for (int j = 0; j < g.dim; ++j) {
                std::vector<std::vector<double>> rhs(g.ntau);
                for (int it = 0; it < g.ntau; ++it) {
                    ops[it].rhs_probe(j, rhs[it]);
                    for (int n = 0; n < yn; ++n) rhs[it][n] *= scale[it];
                }
                CellField f = periodic_parabolic_fixed_point(M, ops, scale, rhs, g, opt,
                                                             (j == 0 && diag) ? diag : nullptr);
                detail::center_field(f, regime.tag, g);
                chi.push_back(std::move(f));
            }
            break;
        }
    }
    return chi;
}

inline CellField solve_zeta(const SampledCell& s, const MacroDerivTables& md, const Regime& regime, const CellGrid& g,
                            const CellSolveOptions& opt = {}) {
    const int yn = g.ynodes();
    const std::vector<double> bob1 = detail::b_over_b1(s, g);
    CellField f = CellField::make(g, CellDomain::Q);
    switch (regime.tag) {
        case Regime::Scale::Slow: {
            for (int it = 0; it < g.ntau; ++it) {
                FluxOperator A(g, slice_coefficient(s, g, it, s.b2_tau[it]));
                std::vector<double> rhs = detail::zeta_slice_rhs(s, md, regime, g, it, bob1);
                remove_mean(rhs);
                std::vector<double> x(yn, 0.0);
                auto apply = [&](const std::vector<double>& u, std::vector<double>& o) { A.apply(u, o); };
                SolveStats st = pcg(apply, rhs, x, opt.linear_tol, opt.linear_maxit, &A.diagonal(), true);
                if (!st.converged) throw std::runtime_error("solve_zeta(slow): cell solve did not converge");
                for (int n = 0; n < yn; ++n) f.at(n, it) = x[n];
            }
            break;
        }
        case Regime::Scale::FastStrict: {
            FluxOperator A(g, tau_averaged_coefficient(s, g));
            // forcing: -div_y M_S( (B/a2)(grad_x b2 + omega grad_y(b/b1)) ), assembled as the
            // tau-average of the per-slice forcings weighted by 1/a2
            std::vector<double> rhs(yn, 0.0);
            for (int it = 0; it < g.ntau; ++it) {
                std::vector<double> slice = detail::zeta_slice_rhs(s, md, regime, g, it, bob1);
                const double w = 1.0 / (s.a2_tau[it] * g.ntau);
                for (int n = 0; n < yn; ++n) rhs[n] += w * slice[n];
            }
            remove_mean(rhs);
            std::vector<double> x(yn, 0.0);
            auto apply = [&](const std::vector<double>& u, std::vector<double>& o) { A.apply(u, o); };
            SolveStats st = pcg(apply, rhs, x, opt.linear_tol, opt.linear_maxit, &A.diagonal(), true);
            if (!st.converged) throw std::runtime_error("solve_zeta(fast-strict): cell solve did not converge");
            for (int n = 0; n < yn; ++n)
                for (int it = 0; it < g.ntau; ++it) f.at(n, it) = x[n];
            break;
        }
        case Regime::Scale::FastEqual: {
            std::vector<double> M = detail::capacity_table(s);
            std::vector<FluxOperator> ops;
            std::vector<double> scale(g.ntau);
            std::vector<std::vector<double>> rhs(g.ntau);
            ops.reserve(g.ntau);
            for (int it = 0; it < g.ntau; ++it) {
                ops.emplace_back(g, slice_coefficient(s, g, it, s.b2_tau[it]));
                scale[it] = 1.0 / s.a2_tau[it];
                rhs[it] = detail::zeta_slice_rhs(s, md, regime, g, it, bob1);
                for (int n = 0; n < yn; ++n) rhs[it][n] *= scale[it];
            }
            f = periodic_parabolic_fixed_point(M, ops, scale, rhs, g, opt);
            break;
        }
    }
    detail::center_field(f, regime.tag, g);
    return f;
}

// Max discrete residual of the defining equations over all nodes, slices and fields.
// The fast-equal time derivative uses the marching scheme's backward difference.
inline double cell_residual(const CellCorrectors& cc, const SampledCell& s, const MacroDerivTables& md,
                            const CellGrid& g) {
    const int yn = g.ynodes();
    const std::vector<double> bob1 = detail::b_over_b1(s, g);
    const std::vector<double> M = detail::capacity_table(s);
    double worst = 0.0;
    auto slice_of = [&](const CellField& f, int it, std::vector<double>& out) {
        out.resize(yn);
        for (int n = 0; n < yn; ++n) out[n] = f.at(n, it);
    };
    std::vector<double> u(yn), up(yn), Au(yn), rhs(yn);
    const bool fast_strict = cc.regime.tag == Regime::Scale::FastStrict;
    const bool fast_equal = cc.regime.tag == Regime::Scale::FastEqual;

    if (fast_strict) {
        FluxOperator A(g, tau_averaged_coefficient(s, g));
        for (int j = 0; j < g.dim; ++j) {
            slice_of(cc.chi[j], 0, u);
            A.apply(u, Au);
            A.rhs_probe(j, rhs);
            for (int n = 0; n < yn; ++n) worst = std::max(worst, std::fabs(Au[n] - rhs[n]));
        }
        std::vector<double> zr(yn, 0.0);
        for (int it = 0; it < g.ntau; ++it) {
            std::vector<double> sl = detail::zeta_slice_rhs(s, md, cc.regime, g, it, bob1);
            const double w = 1.0 / (s.a2_tau[it] * g.ntau);
            for (int n = 0; n < yn; ++n) zr[n] += w * sl[n];
        }
        slice_of(cc.zeta, 0, u);
        A.apply(u, Au);
        for (int n = 0; n < yn; ++n) worst = std::max(worst, std::fabs(Au[n] - zr[n]));
        return worst;
    }

    for (int it = 0; it < g.ntau; ++it) {
        FluxOperator A(g, slice_coefficient(s, g, it, s.b2_tau[it]));
        const double c = 1.0 / s.a2_tau[it];
        for (int j = 0; j <= g.dim; ++j) {
            const bool is_zeta = j == g.dim;
            const CellField& f = is_zeta ? cc.zeta : cc.chi[j];
            slice_of(f, it, u);
            A.apply(u, Au);
            if (is_zeta)
                rhs = detail::zeta_slice_rhs(s, md, cc.regime, g, it, bob1);
            else
                A.rhs_probe(j, rhs);
            if (fast_equal) {
                slice_of(f, g.wrap_tau(it - 1), up);
                for (int n = 0; n < yn; ++n) {
                    const double r = M[n] * (u[n] - up[n]) / g.htau + c * Au[n] - c * rhs[n];
                    worst = std::max(worst, std::fabs(r));
                }
            } else {
                for (int n = 0; n < yn; ++n) worst = std::max(worst, std::fabs(Au[n] - rhs[n]));
            }
        }
    }
    return worst;
}

inline CellCorrectors solve_cell(const SampledCell& s, const MacroDerivTables& md, const Regime& regime,
                                 const CellGrid& g, const CellSolveOptions& opt = {}) {
    CellCorrectors cc;
    cc.regime = regime;
    cc.chi = solve_chi(s, regime, g, opt, &cc.marching);
    cc.zeta = solve_zeta(s, md, regime, g, opt);
    cc.residual = cell_residual(cc, s, md, g);
    cc.mean_defect = detail::mean_defect(cc.zeta, regime.tag, g);
    for (const CellField& f : cc.chi) cc.mean_defect = std::max(cc.mean_defect, detail::mean_defect(f, regime.tag, g));
    return cc;
}

}  // namespace homogfp

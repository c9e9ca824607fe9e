#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "homogfp/coefficients.hpp"
#include "homogfp/grid.hpp"
#include "homogfp/linalg.hpp"

namespace homogfp {

struct MicroOptions {
    int res_space = 16;       // nodes per spatial micro period (>= 16)
    int res_time = 16;        // steps per temporal micro period (>= 16)
    double T = 1.0;
    int nx_override = 0;      // explicit grid, mainly for constant-coefficient oracles
    int nt_override = 0;
    bool transformed = false;  // solve the transformed Fick form (gpro060) instead
    double linear_tol = 1e-11;
    int linear_maxit = 50000;
    bool quiet = true;
};

struct MicroSolution {
    MacroGrid grid;
    double eps = 1.0, alpha = 1.0, beta = 2.0;
    SpaceTimeField u;
    std::vector<double> energy_log;  // sum (a/c)(c u)^2 dx per level
    std::string warning;
};

namespace detail {

inline MacroGrid micro_grid(const CoefficientSet& c, double eps, const MacroGrid& domain, const MicroOptions& o) {
    MacroGrid g = domain;
    g.T = o.T;
    if (o.nx_override > 0) {
        g.nx = o.nx_override;
    } else {
        const double per = std::pow(eps, c.alpha);
        const double L = domain.hi[0] - domain.lo[0];
        const int cells = static_cast<int>(std::ceil(L / per - 1e-9));
        g.nx = cells * o.res_space + 1;
    }
    if (o.nt_override > 0) {
        g.nt = o.nt_override;
    } else {
        const double pert = std::pow(eps, c.beta);
        g.nt = static_cast<int>(std::ceil(o.T / (pert / o.res_time) - 1e-9));
    }
    return g;
}

}  // namespace detail

// Direct implicit-Euler solution of  a^eps u_t - div(B^eps grad(c^eps u)) = f  with
// Dirichlet zero boundary; flux form on w = c^eps u with the unknown u.
inline MicroSolution solve_micro(const CoefficientSet& c, double eps, const ScalarFn& f, const ScalarFn& ubar,
                                 const MacroGrid& domain, const MicroOptions& opt = {}) {
    if (opt.res_space < 16 || opt.res_time < 16)
        throw std::invalid_argument("solve_micro: fewer than 16 nodes per micro period requested");
    if (domain.dim == 1 && eps < 1.0 / 64 - 1e-12)
        throw std::invalid_argument("solve_micro: eps below 1/64 exceeds the cost guard");
    if (domain.dim == 2 && eps < 1.0 / 16 - 1e-12)
        throw std::invalid_argument("solve_micro: eps below 1/16 in 2D exceeds the cost guard");

    MicroSolution sol;
    sol.grid = detail::micro_grid(c, eps, domain, opt);
    sol.eps = eps;
    sol.alpha = c.alpha;
    sol.beta = c.beta;
    if (c.alpha > 1.0 + 1e-12)
        sol.warning = "alpha > 1: direct solve only; outside the rigorous homogenization theory";
    {
        // resolution guard against the actual spacing
        const double per = std::pow(eps, c.alpha);
        if (sol.grid.hx(0) > per / 16 + 1e-12)
            throw std::invalid_argument("solve_micro: grid does not resolve the spatial microstructure");
        const double pert = std::pow(eps, c.beta);
        if (sol.grid.dt() > pert / 16 + 1e-12)
            throw std::invalid_argument("solve_micro: time step does not resolve the temporal microstructure");
    }

    // positivity of c^eps = b1 b2 + eps b, probed on the cell
    {
        CellGrid probe = build_cell_grid(domain.dim, 32, 32);
        std::vector<std::pair<std::array<double, 2>, double>> pts;
        for (double fx : {0.0, 0.5, 1.0})
            for (double ft : {0.0, 0.5, 1.0})
                pts.push_back({{domain.lo[0] + fx * (domain.hi[0] - domain.lo[0]),
                                domain.lo[1] + fx * (domain.hi[1] - domain.lo[1])},
                               ft * opt.T});
        (void)to_general_form(c, eps, pts, probe);
    }
    EpsilonRealization er;
    er.base = &c;
    er.eps = eps;

    const MacroGrid& g = sol.grid;
    const int xn = g.xnodes();
    const double dt = g.dt();
    sol.u = SpaceTimeField::make(g);
    sol.energy_log.reserve(g.nt + 1);

    auto coord = [&](int n) {
        return std::array<double, 2>{g.xcoord(g.dim == 1 ? n : n % g.nx, 0),
                                     g.dim == 2 ? g.xcoord(n / g.nx, 1) : 0.0};
    };
    for (int n = 0; n < xn; ++n) {
        EvalPoint p;
        p.x = coord(n);
        sol.u.at(0, n) = g.on_boundary(n) ? 0.0 : ubar(p);
    }

    std::vector<double> a(xn), cc(xn), Bd(static_cast<size_t>(xn) * g.dim), Boff(g.dim == 2 ? xn : 0);
    std::vector<double> Bbuf(static_cast<size_t>(g.dim) * g.dim);
    std::vector<double> fa(xn), u(xn), rhs(xn), unew(xn);
    std::vector<double> ctab_trans, btab1, btab2, rho;  // transformed path tables

    auto sample_level = [&](double t) {
        double cmin = 1e300;
        for (int n = 0; n < xn; ++n) {
            const auto x = coord(n);
            a[n] = er.a(x, t);
            cc[n] = er.c(x, t);
            cmin = std::min(cmin, cc[n]);
            er.Bmat(x, t, Bbuf.data());
            for (int d = 0; d < g.dim; ++d) Bd[static_cast<size_t>(n) * g.dim + d] = Bbuf[d * g.dim + d];
            if (g.dim == 2) Boff[n] = Bbuf[1];
            EvalPoint p;
            p.x = x;
            p.t = t;
            fa[n] = f(p);
        }
        if (cmin <= 0.0) throw std::runtime_error("solve_micro: c^eps lost positivity during the run");
    };

    auto log_energy = [&](int level, double t) {
        double E = 0.0;
        for (int n = 0; n < xn; ++n) {
            const auto x = coord(n);
            const double cv = er.c(x, t);
            const double w = cv * sol.u.at(level, n);
            E += er.a(x, t) / cv * w * w;
        }
        const double vol = g.dim == 1 ? g.hx(0) : g.hx(0) * g.hx(1);
        sol.energy_log.push_back(E * vol);
    };
    log_energy(0, 0.0);

    if (!opt.transformed) {
        for (int m = 1; m <= g.nt; ++m) {
            const double t = g.tcoord(m);
            sample_level(t);
            for (int n = 0; n < xn; ++n) u[n] = sol.u.at(m - 1, n);
            if (g.dim == 1) {
                const double lam = dt / (g.hx(0) * g.hx(0));
                std::vector<double> lo(xn, 0.0), di(xn, 1.0), up(xn, 0.0);
                for (int n = 0; n < xn; ++n) rhs[n] = g.on_boundary(n) ? 0.0 : a[n] * u[n] + dt * fa[n];
                for (int n = 1; n < xn - 1; ++n) {
                    const double Bm = 0.5 * (Bd[n - 1] + Bd[n]), Bp = 0.5 * (Bd[n] + Bd[n + 1]);
                    lo[n] = -lam * Bm * cc[n - 1];
                    di[n] = a[n] + lam * (Bp + Bm) * cc[n];
                    up[n] = -lam * Bp * cc[n + 1];
                }
                solve_tridiagonal(lo, di, up, rhs, unew);
            } else {
                const double l0 = dt / (g.hx(0) * g.hx(0)), l1 = dt / (g.hx(1) * g.hx(1));
                const int nx = g.nx;
                auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
                    out.assign(xn, 0.0);
                    for (int n = 0; n < xn; ++n) {
                        if (g.on_boundary(n)) {
                            out[n] = x[n];
                            continue;
                        }
                        const double w = cc[n] * x[n];
                        const double wE = cc[n + 1] * x[n + 1], wW = cc[n - 1] * x[n - 1];
                        const double wN = cc[n + nx] * x[n + nx], wS = cc[n - nx] * x[n - nx];
                        double acc = a[n] * x[n];
                        acc -= l0 * (0.5 * (Bd[2 * n] + Bd[2 * (n + 1)]) * (wE - w) -
                                     0.5 * (Bd[2 * (n - 1)] + Bd[2 * n]) * (w - wW));
                        acc -= l1 * (0.5 * (Bd[2 * n + 1] + Bd[2 * (n + nx) + 1]) * (wN - w) -
                                     0.5 * (Bd[2 * (n - nx) + 1] + Bd[2 * n + 1]) * (w - wS));
                        if (Boff[n] != 0.0) {
                            auto wat = [&](int k) { return cc[k] * x[k]; };
                            const double cross = (Boff[n + 1] * (wat(n + 1 + nx) - wat(n + 1 - nx)) -
                                                  Boff[n - 1] * (wat(n - 1 + nx) - wat(n - 1 - nx))) /
                                                     (4.0 * g.hx(0) * g.hx(1)) +
                                                 (Boff[n + nx] * (wat(n + nx + 1) - wat(n + nx - 1)) -
                                                  Boff[n - nx] * (wat(n - nx + 1) - wat(n - nx - 1))) /
                                                     (4.0 * g.hx(0) * g.hx(1));
                            acc -= dt * cross;
                        }
                        out[n] = acc;
                    }
                };
                for (int n = 0; n < xn; ++n) rhs[n] = g.on_boundary(n) ? 0.0 : a[n] * u[n] + dt * fa[n];
                std::vector<double> diag(xn);
                for (int n = 0; n < xn; ++n)
                    diag[n] = g.on_boundary(n)
                                  ? 1.0
                                  : a[n] + cc[n] * (l0 * (Bd[2 * n] + Bd[2 * n]) + l1 * (Bd[2 * n + 1] + Bd[2 * n + 1]));
                unew = u;
                SolveStats st = bicgstab(apply, rhs, unew, opt.linear_tol, opt.linear_maxit, &diag);
                if (!st.converged)
                    throw std::runtime_error("solve_micro: linear solve failed at step " + std::to_string(m));
            }
            for (int n = 0; n < xn; ++n) sol.u.at(m, n) = g.on_boundary(n) ? 0.0 : unew[n];
            log_energy(m, t);
        }
        return sol;
    }

    // transformed Fick path (gpro060): unknown v = c^eps u, implicit Euler, then u = v/c^eps
    const double hs = std::pow(eps, c.alpha) * 1e-4;  // micro-aware FD steps
    const double ht = std::pow(eps, c.beta) * 1e-4;
    std::vector<double> v(xn), vnew(xn);
    for (int n = 0; n < xn; ++n) v[n] = g.on_boundary(n) ? 0.0 : er.c(coord(n), 0.0) * sol.u.at(0, n);
    for (int m = 1; m <= g.nt; ++m) {
        const double t = g.tcoord(m);
        sample_level(t);
        std::vector<double> D(xn), drift(static_cast<size_t>(xn) * g.dim), reac(xn);
        for (int n = 0; n < xn; ++n) {
            const auto x = coord(n);
            const double coa = cc[n] / a[n];
            D[n] = coa;  // multiplies B
            for (int d = 0; d < g.dim; ++d) {
                auto xp = x, xm = x;
                xp[d] += hs;
                xm[d] -= hs;
                const double dcoa = (er.c_over_a(xp, t) - er.c_over_a(xm, t)) / (2.0 * hs);
                double bd = 0.0;
                er.Bmat(x, t, Bbuf.data());
                for (int l = 0; l < g.dim; ++l) bd += Bbuf[d * g.dim + l] * (l == d ? dcoa : 0.0);
                drift[static_cast<size_t>(n) * g.dim + d] = bd;
            }
            // full drift B grad(c/a): recompute with both components for dim 2
            if (g.dim == 2) {
                std::array<double, 2> gca{};
                for (int d = 0; d < 2; ++d) {
                    auto xp = x, xm = x;
                    xp[d] += hs;
                    xm[d] -= hs;
                    gca[d] = (er.c_over_a(xp, t) - er.c_over_a(xm, t)) / (2.0 * hs);
                }
                er.Bmat(x, t, Bbuf.data());
                for (int d = 0; d < 2; ++d)
                    drift[static_cast<size_t>(n) * 2 + d] = Bbuf[d * 2 + 0] * gca[0] + Bbuf[d * 2 + 1] * gca[1];
            }
            reac[n] = -(er.c(x, t + ht) - er.c(x, t - ht)) / (2.0 * ht) / cc[n];
            rhs[n] = g.on_boundary(n) ? 0.0 : v[n] + dt * coa * fa[n];
        }
        if (g.dim == 1) {
            const double h = g.hx(0), lam = dt / (h * h);
            std::vector<double> lo(xn, 0.0), di(xn, 1.0), up(xn, 0.0);
            for (int n = 1; n < xn - 1; ++n) {
                const double DBm = 0.5 * (D[n - 1] * Bd[n - 1] + D[n] * Bd[n]);
                const double DBp = 0.5 * (D[n] * Bd[n] + D[n + 1] * Bd[n + 1]);
                const double bd = drift[n];
                lo[n] = -lam * DBm - dt * bd / (2.0 * h);
                di[n] = 1.0 + lam * (DBp + DBm) + dt * reac[n];
                up[n] = -lam * DBp + dt * bd / (2.0 * h);
            }
            solve_tridiagonal(lo, di, up, rhs, vnew);
        } else {
            throw std::runtime_error("solve_micro: the transformed path is provided in 1D only");
        }
        for (int n = 0; n < xn; ++n) {
            v[n] = g.on_boundary(n) ? 0.0 : vnew[n];
            sol.u.at(m, n) = v[n] / cc[n];
        }
        log_energy(m, t);
    }
    return sol;
}

// v_eps = b1^eps u_eps pointwise
inline SpaceTimeField to_v(const MicroSolution& micro, const CoefficientSet& c) {
    const MacroGrid& g = micro.grid;
    SpaceTimeField v = SpaceTimeField::make(g);
    EpsilonRealization er;
    er.base = &c;
    er.eps = micro.eps;
    for (int m = 0; m <= g.nt; ++m)
        for (int n = 0; n < g.xnodes(); ++n) {
            std::array<double, 2> x{g.xcoord(g.dim == 1 ? n : n % g.nx, 0),
                                    g.dim == 2 ? g.xcoord(n / g.nx, 1) : 0.0};
            v.at(m, n) = er.b1(x, g.tcoord(m)) * micro.u.at(m, n);
        }
    return v;
}

// the two terms of the energy estimate (fas100):
//   sup_t int v^2 dx   and   int_0^T int |grad v|^2 dx dt
inline std::pair<double, double> energy_functional(const SpaceTimeField& v, const MacroGrid& g) {
    const int xn = v.xnodes;
    const double vol = g.dim == 1 ? g.hx(0) : g.hx(0) * g.hx(1);
    double sup = 0.0, grad = 0.0;
    std::vector<double> gcomp(g.dim);
    for (int m = 0; m < v.nlevels; ++m) {
        double l2 = 0.0;
        double gl = 0.0;
        for (int n = 0; n < xn; ++n) {
            const double w = v.at(m, n);
            l2 += w * w;
            const int i = g.dim == 1 ? n : n % g.nx;
            for (int d = 0; d < g.dim; ++d) {
                const int idx = d == 0 ? i : n / g.nx;
                const int stride = d == 0 ? 1 : g.nx;
                double dv;
                if (idx == 0)
                    dv = (v.at(m, n + stride) - v.at(m, n)) / g.hx(d);
                else if (idx == g.nx - 1)
                    dv = (v.at(m, n) - v.at(m, n - stride)) / g.hx(d);
                else
                    dv = (v.at(m, n + stride) - v.at(m, n - stride)) / (2.0 * g.hx(d));
                gl += dv * dv;
            }
        }
        sup = std::max(sup, l2 * vol);
        const double wt = (m == 0 || m == v.nlevels - 1) ? 0.5 : 1.0;
        grad += wt * gl * vol * g.dt();
    }
    return {sup, grad};
}

// discrete int_delta^{T-delta} int |v(x,t+h) - v(x,t)|^2 dx dt   (eq:time_comp)
inline double time_shift_modulus(const SpaceTimeField& v, const MacroGrid& g, double h, double delta,
                                 bool* rounded = nullptr) {
    if (h == 0.0) return 0.0;
    if (!(h > 0.0 && h < delta / 2.0 && delta / 2.0 < g.T / 4.0))
        throw std::invalid_argument("time_shift_modulus: need 0 < h < delta/2 < T/4");
    const double dt = g.dt();
    const int k = static_cast<int>(std::lround(h / dt));
    if (rounded) *rounded = std::fabs(k * dt - h) > 1e-12 * g.T;
    if (k < 1) throw std::invalid_argument("time_shift_modulus: shift not representable on the time grid");
    const int m0 = static_cast<int>(std::ceil(delta / dt - 1e-9));
    const int m1 = static_cast<int>(std::floor((g.T - delta) / dt + 1e-9));
    const double vol = g.dim == 1 ? g.hx(0) : g.hx(0) * g.hx(1);
    double acc = 0.0;
    for (int m = m0; m <= m1; ++m) {
        if (m + k >= v.nlevels) break;
        for (int n = 0; n < v.xnodes; ++n) {
            const double d = v.at(m + k, n) - v.at(m, n);
            acc += d * d;
        }
    }
    return acc * vol * dt;
}

}  // namespace homogfp

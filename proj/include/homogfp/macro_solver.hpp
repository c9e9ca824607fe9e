#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "homogfp/effective.hpp"
#include "homogfp/grid.hpp"
#include "homogfp/linalg.hpp"

namespace homogfp {

struct MacroSolution {
    MacroGrid grid;
    SpaceTimeField v;
    SpaceTimeField u;
    double theta = 0.5;
    double peclet = 0.0;
    std::string warning;
};

// v(x,0) = ubar(x) (int_Y a1(x,0,y) dy) / (int_Y a1/b1 (x,0,y) dy)   (fas090)
inline std::vector<double> macro_initial(const ScalarFn& ubar, const CoefficientSet& c, const MacroGrid& mg,
                                         const CellGrid& cg) {
    std::vector<double> v0(mg.xnodes());
    double cached_ratio = 0.0;
    bool have_cached = false;
    for (int n = 0; n < mg.xnodes(); ++n) {
        EvalPoint p;
        p.x[0] = mg.xcoord(mg.dim == 1 ? n : n % mg.nx, 0);
        if (mg.dim == 2) p.x[1] = mg.xcoord(n / mg.nx, 1);
        p.t = 0.0;
        double ratio;
        if (!c.x_dependent && have_cached) {
            ratio = cached_ratio;
        } else {
            double a1int = 0.0, a1b1int = 0.0;
            const int yn = cg.ynodes();
            for (int iy = 0; iy < yn; ++iy) {
                EvalPoint q = cell_point(cg, p.x, 0.0, iy, 0);
                const double a1 = c.a1(q);
                a1int += a1;
                a1b1int += a1 / c.b1(q);
            }
            ratio = a1int / a1b1int;
            cached_ratio = ratio;
            have_cached = true;
        }
        v0[n] = ubar(p) * ratio;
        if (mg.on_boundary(n)) v0[n] = 0.0;
    }
    return v0;
}

namespace detail {

// Action of L = -div(B_hom grad .) + P.grad + z at a given time level;
// Dirichlet nodes are passed through untouched (rows handled by the caller).
struct MacroOperator {
    const EffectiveModel* em;
    const MacroGrid* g;
    int level;

    double Bface(int node_lo, int node_hi, int d) const {
        return 0.5 * (em->Bhom_at(level, node_lo, d, d) + em->Bhom_at(level, node_hi, d, d));
    }

    void apply(const std::vector<double>& v, std::vector<double>& out) const {
        const int xn = g->xnodes();
        out.assign(xn, 0.0);
        for (int n = 0; n < xn; ++n) {
            if (g->on_boundary(n)) continue;
            double acc = em->z[em->idx(level, n)] * v[n];
            if (g->dim == 1) {
                const double h = g->hx(0);
                acc -= (Bface(n, n + 1, 0) * (v[n + 1] - v[n]) - Bface(n - 1, n, 0) * (v[n] - v[n - 1])) / (h * h);
                acc += em->P_at(level, n, 0) * (v[n + 1] - v[n - 1]) / (2.0 * h);
            } else {
                const int nx = g->nx, i = n % nx;
                const double h0 = g->hx(0), h1 = g->hx(1);
                const int e0p = n + 1, e0m = n - 1, e1p = n + nx, e1m = n - nx;
                acc -= (Bface(n, e0p, 0) * (v[e0p] - v[n]) - Bface(e0m, n, 0) * (v[n] - v[e0m])) / (h0 * h0);
                acc -= (Bface(n, e1p, 1) * (v[e1p] - v[n]) - Bface(e1m, n, 1) * (v[n] - v[e1m])) / (h1 * h1);
                acc += em->P_at(level, n, 0) * (v[e0p] - v[e0m]) / (2.0 * h0);
                acc += em->P_at(level, n, 1) * (v[e1p] - v[e1m]) / (2.0 * h1);
                // symmetric cross part of B_hom, central differences both ways
                auto B12 = [&](int m) { return 0.5 * (em->Bhom_at(level, m, 0, 1) + em->Bhom_at(level, m, 1, 0)); };
                if (B12(n) != 0.0 || B12(e0p) != 0.0 || B12(e0m) != 0.0 || B12(e1p) != 0.0 || B12(e1m) != 0.0) {
                    auto d1 = [&](int m) { return (v[m + 1] - v[m - 1]) / (2.0 * h0); };
                    auto d2 = [&](int m) { return (v[m + nx] - v[m - nx]) / (2.0 * h1); };
                    const int j = n / nx;
                    const bool inner = i > 1 && i < nx - 2 && j > 1 && j < nx - 2;
                    if (inner) {
                        acc -= (B12(e0p) * d2(e0p) - B12(e0m) * d2(e0m)) / (2.0 * h0);
                        acc -= (B12(e1p) * d1(e1p) - B12(e1m) * d1(e1m)) / (2.0 * h1);
                    } else {
                        acc -= 2.0 * B12(n) * (v[e0p + nx] - v[e0m + nx] - v[e0p - nx] + v[e0m - nx]) / (4.0 * h0 * h1);
                    }
                }
            }
            out[n] = acc;
        }
    }
    double diag(int n) const {
        if (g->on_boundary(n)) return 1.0;
        double d = em->z[em->idx(level, n)];
        if (g->dim == 1) {
            const double h = g->hx(0);
            d += (Bface(n, n + 1, 0) + Bface(n - 1, n, 0)) / (h * h);
        } else {
            const int nx = g->nx;
            const double h0 = g->hx(0), h1 = g->hx(1);
            d += (Bface(n, n + 1, 0) + Bface(n - 1, n, 0)) / (h0 * h0);
            d += (Bface(n, n + nx, 1) + Bface(n - nx, n, 1)) / (h1 * h1);
        }
        return d;
    }
};

}  // namespace detail

// theta-scheme time stepping of  q_eff v_t - div(B_hom grad v) + P_eff.grad v + z_eff v = f s,
// Dirichlet rows enforced exactly.
inline MacroSolution solve_macro(const EffectiveModel& em, const ScalarFn& f, const std::vector<double>& v0,
                                 double theta = 0.5, double tol = 1e-10) {
    const MacroGrid& g = em.grid;
    if (!(theta >= 0.5 && theta <= 1.0)) throw std::invalid_argument("solve_macro: theta must lie in [1/2, 1]");
    const int xn = g.xnodes();
    if (static_cast<int>(v0.size()) != xn) throw std::invalid_argument("solve_macro: initial state has wrong size");
    for (size_t i = 0; i < em.q.size(); ++i)
        if (!(em.q[i] > 0.0)) throw std::invalid_argument("solve_macro: non-positive capacity q_eff in the model");

    MacroSolution sol;
    sol.grid = g;
    sol.theta = theta;
    sol.v = SpaceTimeField::make(g);
    for (int n = 0; n < xn; ++n) sol.v.at(0, n) = g.on_boundary(n) ? 0.0 : v0[n];

    // mesh Peclet number |P| h / (2 B)
    for (int m = 0; m <= g.nt; ++m)
        for (int n = 0; n < xn; ++n)
            for (int d = 0; d < g.dim; ++d) {
                const double B = em.Bhom_at(m, n, d, d);
                if (B > 0.0)
                    sol.peclet = std::max(sol.peclet, std::fabs(em.P_at(m, n, d)) * g.hx(d) / (2.0 * B));
            }
    if (sol.peclet > 2.0)
        sol.warning = "mesh Peclet number " + std::to_string(sol.peclet) + " above 2; central advection may oscillate";

    const double dt = g.dt();
    std::vector<double> vm(xn), rhs(xn), Lv(xn), vnew(xn), src_old(xn), src_new(xn);
    auto source_at = [&](int level, std::vector<double>& out) {
        for (int n = 0; n < xn; ++n) {
            EvalPoint p;
            p.x[0] = g.xcoord(g.dim == 1 ? n : n % g.nx, 0);
            if (g.dim == 2) p.x[1] = g.xcoord(n / g.nx, 1);
            p.t = g.tcoord(level);
            out[n] = f(p) * em.s[em.idx(level, n)];
        }
    };
    source_at(0, src_old);
    for (int m = 0; m < g.nt; ++m) {
        for (int n = 0; n < xn; ++n) vm[n] = sol.v.at(m, n);
        source_at(m + 1, src_new);
        detail::MacroOperator Lold{&em, &g, m}, Lnew{&em, &g, m + 1};
        Lold.apply(vm, Lv);
        std::vector<double> qmid(xn);
        for (int n = 0; n < xn; ++n)
            qmid[n] = theta * em.q[em.idx(m + 1, n)] + (1.0 - theta) * em.q[em.idx(m, n)];
        for (int n = 0; n < xn; ++n)
            rhs[n] = g.on_boundary(n)
                         ? 0.0
                         : qmid[n] * vm[n] / dt - (1.0 - theta) * Lv[n] + theta * src_new[n] + (1.0 - theta) * src_old[n];
        if (g.dim == 1) {
            // direct banded elimination
            std::vector<double> lo(xn, 0.0), di(xn, 1.0), up(xn, 0.0);
            const double h = g.hx(0);
            for (int n = 1; n < xn - 1; ++n) {
                const double Bm = Lnew.Bface(n - 1, n, 0), Bp = Lnew.Bface(n, n + 1, 0);
                const double P = em.P_at(m + 1, n, 0), z = em.z[em.idx(m + 1, n)];
                lo[n] = theta * (-Bm / (h * h) - P / (2.0 * h));
                di[n] = qmid[n] / dt + theta * ((Bp + Bm) / (h * h) + z);
                up[n] = theta * (-Bp / (h * h) + P / (2.0 * h));
            }
            solve_tridiagonal(lo, di, up, rhs, vnew);
        } else {
            auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
                Lnew.apply(x, out);
                for (int n = 0; n < xn; ++n)
                    out[n] = g.on_boundary(n) ? x[n] : qmid[n] * x[n] / dt + theta * out[n];
            };
            std::vector<double> diag(xn);
            for (int n = 0; n < xn; ++n)
                diag[n] = g.on_boundary(n) ? 1.0 : qmid[n] / dt + theta * Lnew.diag(n);
            vnew = vm;
            for (int n = 0; n < xn; ++n)
                if (g.on_boundary(n)) vnew[n] = 0.0;
            SolveStats st = bicgstab(apply, rhs, vnew, tol, 20000, &diag);
            if (!st.converged)
                throw std::runtime_error("solve_macro: linear solve did not converge at step " + std::to_string(m + 1) +
                                         " (residual " + std::to_string(st.residual) + ")");
        }
        for (int n = 0; n < xn; ++n) sol.v.at(m + 1, n) = g.on_boundary(n) ? 0.0 : vnew[n];
        src_old = src_new;
    }
    return sol;
}

// u = v * r with r = int_Y dy/b1 evaluated at (x,t)   (fas400)
inline void recover_u(MacroSolution& sol, const CoefficientSet& c, const CellGrid& cg) {
    const MacroGrid& g = sol.grid;
    sol.u = SpaceTimeField::make(g);
    const int xn = g.xnodes();
    double cached = 0.0;
    bool have = false;
    for (int m = 0; m <= g.nt; ++m) {
        for (int n = 0; n < xn; ++n) {
            double r;
            if (!c.x_dependent && !c.t_dependent && have) {
                r = cached;
            } else {
                std::array<double, 2> x{g.xcoord(g.dim == 1 ? n : n % g.nx, 0),
                                        g.dim == 2 ? g.xcoord(n / g.nx, 1) : 0.0};
                double w = 0.0;
                const int yn = cg.ynodes();
                for (int iy = 0; iy < yn; ++iy) {
                    EvalPoint q = cell_point(cg, x, g.tcoord(m), iy, 0);
                    w += 1.0 / c.b1(q);
                }
                r = w / yn;
                cached = r;
                have = true;
            }
            sol.u.at(m, n) = sol.v.at(m, n) * r;
        }
        if (!c.x_dependent && !c.t_dependent) {
            for (int mm = m + 1; mm <= g.nt; ++mm)
                for (int n = 0; n < xn; ++n) sol.u.at(mm, n) = sol.v.at(mm, n) * cached;
            break;
        }
    }
}

}  // namespace homogfp

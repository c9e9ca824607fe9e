#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "homogfp/cell_solver.hpp"
#include "homogfp/coefficients.hpp"
#include "homogfp/grid.hpp"

namespace homogfp {

inline double integrate_y(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// q_eff = int_Y a1/b1 dy
inline double compute_q_eff(const SampledCell& s) {
    double q = 0.0;
    for (size_t n = 0; n < s.a1_y.size(); ++n) q += s.a1_y[n] / s.b1_y[n];
    return q / static_cast<double>(s.a1_y.size());
}

// source weight int_S dtau/a2
inline double compute_source_weight(const SampledCell& s) {
    double w = 0.0;
    for (double v : s.a2_tau) w += 1.0 / v;
    return w / static_cast<double>(s.a2_tau.size());
}

// recovery weight int_Y dy/b1
inline double compute_recovery_weight(const SampledCell& s) {
    double w = 0.0;
    for (double v : s.b1_y) w += 1.0 / v;
    return w / static_cast<double>(s.b1_y.size());
}

struct BhomResult {
    std::array<double, 4> form1{};  // the defining integral (fas210 / fas>210, first equality)
    std::array<double, 4> form2{};  // symmetrized form (+ antisymmetric d_tau cross term when beta = 2 alpha)
    double form_gap = 0.0;
    double antisym = 0.0;      // max-abs of the antisymmetric part of form2
    double min_eig_sym = 0.0;  // of the symmetric part of form1
};

namespace detail {

inline double min_eig_sym2(const std::array<double, 4>& m, int dim) {
    if (dim == 1) return m[0];
    const double a = m[0], d = m[3], off = 0.5 * (m[1] + m[2]);
    const double mid = 0.5 * (a + d);
    const double rad = std::sqrt(0.25 * (a - d) * (a - d) + off * off);
    return mid - rad;
}

}  // namespace detail

// Both forms of B_hom through the flux operator's own bilinear quadrature, so that
// their gap reflects solver residuals only.
inline BhomResult compute_B_hom(const CellCorrectors& cc, const SampledCell& s, const CellGrid& g,
                                const Regime& regime) {
    if (cc.regime.tag != regime.tag)
        throw std::invalid_argument("compute_B_hom: correctors were solved for a different regime");
    const int yn = g.ynodes(), dim = g.dim;
    BhomResult r;
    std::vector<std::vector<double>> chi_sl(dim, std::vector<double>(yn));
    const bool fast_strict = regime.tag == Regime::Scale::FastStrict;
    const int nslices = fast_strict ? 1 : g.ntau;
    for (int it = 0; it < nslices; ++it) {
        FluxOperator A = fast_strict ? FluxOperator(g, tau_averaged_coefficient(s, g))
                                     : FluxOperator(g, slice_coefficient(s, g, it, s.b2_tau[it]));
        const double w = fast_strict ? 1.0 : 1.0 / (s.a2_tau[it] * g.ntau);
        for (int j = 0; j < dim; ++j)
            for (int n = 0; n < yn; ++n) chi_sl[j][n] = cc.chi[j].at(n, it);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) {
                const double ayiyj = A.coordinate_pair(i, j);
                const double achj_yi = A.bilinear_with_coordinate(chi_sl[j], i);
                const double achi_yj = A.bilinear_with_coordinate(chi_sl[i], j);
                const double achichj = A.bilinear(chi_sl[j], chi_sl[i]);
                r.form1[i * dim + j] += w * (ayiyj - achj_yi);
                r.form2[i * dim + j] += w * (ayiyj - achj_yi - achi_yj + achichj);
            }
    }
    if (regime.tag == Regime::Scale::FastEqual) {
        // + int_Q (a1/b1) (d chi^j/d tau) chi^i, backward difference of the marching scheme
        const std::vector<double> M = detail::capacity_table(s);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) {
                double t = 0.0;
                for (int it = 0; it < g.ntau; ++it) {
                    const int itm = g.wrap_tau(it - 1);
                    for (int n = 0; n < yn; ++n)
                        t += M[n] * (cc.chi[j].at(n, it) - cc.chi[j].at(n, itm)) / g.htau * cc.chi[i].at(n, it);
                }
                r.form2[i * dim + j] += t / (static_cast<double>(yn) * g.ntau);
            }
    }
    for (int c = 0; c < dim * dim; ++c) r.form_gap = std::max(r.form_gap, std::fabs(r.form1[c] - r.form2[c]));
    if (dim == 2) r.antisym = 0.5 * std::fabs(r.form2[1] - r.form2[2]);
    std::array<double, 4> sym = r.form1;
    if (dim == 2) sym[1] = sym[2] = 0.5 * (r.form1[1] + r.form1[2]);
    r.min_eig_sym = detail::min_eig_sym2(sym, dim);
    return r;
}

// Pointwise B grad_y(y - chi) on the cell grid; component (i,j) is the i-component
// of the flux of y^j - chi^j. Fluxes are face-averaged like the operator, so the
// Q-average of (b2/a2) B_eff reproduces B_hom form1 exactly.
inline CellField compute_B_eff(const CellCorrectors& cc, const SampledCell& s, const CellGrid& g) {
    const int yn = g.ynodes(), dim = g.dim;
    CellField out = CellField::make(g, CellDomain::Q, FieldKind::Matrix);
    std::vector<double> chi_sl(yn), fy(static_cast<size_t>(yn) * dim), fc(static_cast<size_t>(yn) * dim);
    for (int it = 0; it < g.ntau; ++it) {
        FluxOperator B_only(g, slice_coefficient(s, g, it, 1.0));
        for (int j = 0; j < dim; ++j) {
            for (int n = 0; n < yn; ++n) chi_sl[n] = cc.chi[j].at(n, it);
            B_only.flux_of_coordinate(j, fy);
            B_only.flux(chi_sl, fc);
            for (int n = 0; n < yn; ++n)
                for (int i = 0; i < dim; ++i)
                    out.at(n, it, i * dim + j) = fy[static_cast<size_t>(n) * dim + i] - fc[static_cast<size_t>(n) * dim + i];
        }
    }
    return out;
}

// P_eff (fas220). The dagger on (B grad_y(y-chi)) is read as transpose.
inline std::array<double, 2> compute_P_eff(const CellCorrectors& cc, const SampledCell& s, const MacroDerivTables& md,
                                           const CellGrid& g, const Regime& regime) {
    const int yn = g.ynodes(), dim = g.dim;
    std::array<double, 2> P{0.0, 0.0};
    const std::vector<double> bob1 = detail::b_over_b1(s, g);
    std::vector<double> zeta_sl(yn), chi_sl(yn), fz(static_cast<size_t>(yn) * dim), fv(static_cast<size_t>(yn) * dim),
        fy(static_cast<size_t>(yn) * dim);
    const double invQ = 1.0 / (static_cast<double>(yn) * g.ntau);
    for (int it = 0; it < g.ntau; ++it) {
        FluxOperator B_only(g, slice_coefficient(s, g, it, 1.0));
        const double b2 = s.b2_tau[it], inva2 = 1.0 / s.a2_tau[it];
        for (int n = 0; n < yn; ++n) zeta_sl[n] = cc.zeta.at(n, it);
        B_only.flux(zeta_sl, fz);
        for (int i = 0; i < dim; ++i) {
            // (b2/a2) B grad_y zeta
            double t1 = 0.0;
            for (int n = 0; n < yn; ++n) t1 += fz[static_cast<size_t>(n) * dim + i];
            P[i] += b2 * inva2 * t1 * invQ;
        }
        // b2 (B grad_y(y - chi))^T grad_x(1/a2)
        for (int i = 0; i < dim; ++i) {
            for (int n = 0; n < yn; ++n) chi_sl[n] = cc.chi[i].at(n, it);
            B_only.flux_of_coordinate(i, fy);
            B_only.flux(chi_sl, fv);
            double t2 = 0.0;
            for (int n = 0; n < yn; ++n)
                for (int j = 0; j < dim; ++j)
                    t2 += (fy[static_cast<size_t>(n) * dim + j] - fv[static_cast<size_t>(n) * dim + j]) *
                          (md.dx_inv_a2[j].empty() ? 0.0 : md.dx_inv_a2[j][it]);
            P[i] += b2 * t2 * invQ;
        }
        // -(1/a2) B grad_x b2
        for (int n = 0; n < yn; ++n)
            for (int i = 0; i < dim; ++i) {
                double bi = 0.0;
                for (int j = 0; j < dim; ++j)
                    bi += s.Bval(g, n, it, i, j) * (md.dx_b2[j].empty() ? 0.0 : md.dx_b2[j][it]);
                P[i] -= inva2 * bi * invQ;
            }
        // -omega B grad_y(b/(a2 b1))
        if (regime.omega != 0.0 && !bob1.empty()) {
            std::vector<double> gsl(yn);
            for (int n = 0; n < yn; ++n) gsl[n] = bob1[static_cast<size_t>(n) * g.ntau + it];
            B_only.flux(gsl, fv);
            for (int i = 0; i < dim; ++i) {
                double t4 = 0.0;
                for (int n = 0; n < yn; ++n) t4 += fv[static_cast<size_t>(n) * dim + i];
                P[i] -= regime.omega * inva2 * t4 * invQ;
            }
        }
    }
    return P;
}

// int_Q (b2/a2) B grad_y zeta dy dtau; the vector whose macroscopic divergence enters z_eff.
inline std::array<double, 2> compute_zeta_flux_integral(const CellCorrectors& cc, const SampledCell& s,
                                                        const CellGrid& g) {
    const int yn = g.ynodes(), dim = g.dim;
    std::array<double, 2> F{0.0, 0.0};
    std::vector<double> zeta_sl(yn), fz(static_cast<size_t>(yn) * dim);
    const double invQ = 1.0 / (static_cast<double>(yn) * g.ntau);
    for (int it = 0; it < g.ntau; ++it) {
        FluxOperator B_only(g, slice_coefficient(s, g, it, 1.0));
        for (int n = 0; n < yn; ++n) zeta_sl[n] = cc.zeta.at(n, it);
        B_only.flux(zeta_sl, fz);
        const double w = s.b2_tau[it] / s.a2_tau[it] * invQ;
        for (int n = 0; n < yn; ++n)
            for (int i = 0; i < dim; ++i) F[i] += w * fz[static_cast<size_t>(n) * dim + i];
    }
    return F;
}

// Macroscopic-derivative contributions to z_eff that the assembly supplies:
//   div_F1  = div_x int_Q (b2/a2) B grad_y zeta   (differenced across macro nodes)
//   z2      = int_Q (1/a2) div_x( B(grad_x b2 + omega grad_y(b/b1)) )
struct MacroDivTerms {
    double div_F1 = 0.0;
    double z2 = 0.0;
};

// z_eff (fas230): int_Y a1 d_t(1/b1) + div_F1 - z2 - int_Q b2 B grad_y zeta . grad_x(1/a2).
inline double compute_z_eff(const CellCorrectors& cc, const SampledCell& s, const MacroDerivTables& md,
                            const CellGrid& g, const MacroDivTerms& div_terms) {
    const int yn = g.ynodes(), dim = g.dim;
    double zA = 0.0;
    for (int n = 0; n < yn; ++n) zA += s.a1_y[n] * md.dt_inv_b1[n];
    zA /= yn;
    double z3 = 0.0;
    bool have_dx_a2 = false;
    for (int j = 0; j < dim; ++j)
        if (!md.dx_inv_a2[j].empty())
            for (double v : md.dx_inv_a2[j])
                if (v != 0.0) have_dx_a2 = true;
    if (have_dx_a2) {
        std::vector<double> zeta_sl(yn), fz(static_cast<size_t>(yn) * dim);
        const double invQ = 1.0 / (static_cast<double>(yn) * g.ntau);
        for (int it = 0; it < g.ntau; ++it) {
            FluxOperator B_only(g, slice_coefficient(s, g, it, 1.0));
            for (int n = 0; n < yn; ++n) zeta_sl[n] = cc.zeta.at(n, it);
            B_only.flux(zeta_sl, fz);
            for (int n = 0; n < yn; ++n)
                for (int j = 0; j < dim; ++j)
                    z3 += s.b2_tau[it] * fz[static_cast<size_t>(n) * dim + j] * md.dx_inv_a2[j][it] * invQ;
        }
    }
    return zA + div_terms.div_F1 - div_terms.z2 - z3;
}

// z2 by centered differences of the coefficient flux V = B(grad_x b2 + omega grad_y(b/b1))
// with the configured derivative step (coefficient evaluations only, no cell solves).
inline double compute_z2(const CoefficientSet& c, std::array<double, 2> x, double t, const CellGrid& g,
                         const Regime& regime, const MacroGrid& domain) {
    if (!c.x_dependent) return 0.0;
    const int yn = g.ynodes(), dim = g.dim;
    const double h = c.deriv.hx;
    SampledCell s0 = sample_on_cell(c, x, t, g, regime.omega != 0.0 && c.has_b());
    auto Vk = [&](std::array<double, 2> xp, int k, std::vector<std::vector<double>>& out) {
        // out[itau][node] = V_k(xp, t, y, tau)
        SampledCell sp = sample_on_cell(c, xp, t, g, regime.omega != 0.0 && c.has_b());
        MacroDerivTables mdp = macro_derivatives(c, xp, t, g, domain);
        const std::vector<double> bob1 = detail::b_over_b1(sp, g);
        out.assign(g.ntau, std::vector<double>(yn, 0.0));
        for (int it = 0; it < g.ntau; ++it) {
            FluxOperator B_only(g, slice_coefficient(sp, g, it, 1.0));
            std::vector<double> flx(static_cast<size_t>(yn) * dim, 0.0);
            if (regime.omega != 0.0 && !bob1.empty()) {
                std::vector<double> gsl(yn);
                for (int n = 0; n < yn; ++n) gsl[n] = bob1[static_cast<size_t>(n) * g.ntau + it];
                B_only.flux(gsl, flx);
                for (int n = 0; n < yn; ++n) out[it][n] = regime.omega * flx[static_cast<size_t>(n) * dim + k];
            }
            for (int n = 0; n < yn; ++n) {
                double bi = 0.0;
                for (int j = 0; j < dim; ++j)
                    bi += sp.Bval(g, n, it, k, j) * (mdp.dx_b2[j].empty() ? 0.0 : mdp.dx_b2[j][it]);
                out[it][n] += bi;
            }
        }
    };
    double z2 = 0.0;
    std::vector<std::vector<double>> Vp, Vm;
    for (int k = 0; k < dim; ++k) {
        std::array<double, 2> xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const bool interior = xp[k] <= domain.hi[k] && xm[k] >= domain.lo[k];
        if (!interior) {
            // shift the centered stencil inside; coefficients are globally smooth
            const double off = xp[k] > domain.hi[k] ? domain.hi[k] - xp[k] : domain.lo[k] - xm[k];
            xp[k] += off;
            xm[k] += off;
        }
        Vk(xp, k, Vp);
        Vk(xm, k, Vm);
        const double invQ = 1.0 / (static_cast<double>(yn) * g.ntau);
        for (int it = 0; it < g.ntau; ++it) {
            const double w = invQ / s0.a2_tau[it];
            for (int n = 0; n < yn; ++n) z2 += w * (Vp[it][n] - Vm[it][n]) / (2.0 * h);
        }
    }
    return z2;
}

// ---------------------------------------------------------------------------
// The effective model sampled on the macro grid.

struct EffectiveModel {
    MacroGrid grid;
    Regime regime;
    int dim = 1;
    // per (level, x-node), flattened as level*xnodes + node
    std::vector<double> q, s, r, z;
    std::vector<double> Bhom;  // dim*dim entries each
    std::vector<double> P;     // dim entries each
    // diagnostics over all assembled entries
    double max_form_gap = 0.0;
    double max_antisym = 0.0;
    double min_eig_sym = 0.0;
    double max_residual = 0.0;
    double max_mean_defect = 0.0;
    int cell_solves = 0;

    size_t idx(int level, int node) const { return static_cast<size_t>(level) * grid.xnodes() + node; }
    double Bhom_at(int level, int node, int i, int j) const {
        return Bhom[idx(level, node) * dim * dim + i * dim + j];
    }
    double P_at(int level, int node, int i) const { return P[idx(level, node) * dim + i]; }

    // scalar effective diffusion / capacity of the recovered u-equation
    // Fokker-Planck normalization (eq:fin): coefficients of  cap u_t - Lap(D u) = f
    double fp_diffusion(int level = 0, int node = 0) const {
        return Bhom_at(level, node, 0, 0) / (r[idx(level, node)] * s[idx(level, node)]);
    }
    double fp_capacity(int level = 0, int node = 0) const {
        return q[idx(level, node)] / (r[idx(level, node)] * s[idx(level, node)]);
    }
    // Fick normalization (fick:fin): coefficients of  cap u_t - div(D grad u) = f
    double fick_diffusion(int level = 0, int node = 0) const {
        return Bhom_at(level, node, 0, 0) / s[idx(level, node)];
    }
    double fick_capacity(int level = 0, int node = 0) const { return q[idx(level, node)] / s[idx(level, node)]; }
};

// Per macro node: sample -> solve correctors -> assemble q, B_hom, P, z, s, r.
// A single cell solve is reused whenever the coefficients do not depend on the
// corresponding macro variable.
inline EffectiveModel effective_model(const CoefficientSet& c, const MacroGrid& mg, const CellGrid& cg,
                                      const Regime& regime, const CellSolveOptions& opt = {}) {
    EffectiveModel em;
    em.grid = mg;
    em.regime = regime;
    em.dim = mg.dim;
    const int xn = mg.xnodes(), nl = mg.nt + 1, dd = mg.dim * mg.dim;
    const size_t total = static_cast<size_t>(xn) * nl;
    em.q.assign(total, 0.0);
    em.s.assign(total, 0.0);
    em.r.assign(total, 0.0);
    em.z.assign(total, 0.0);
    em.Bhom.assign(total * dd, 0.0);
    em.P.assign(total * mg.dim, 0.0);
    em.min_eig_sym = 1e300;

    const bool want_b = regime.omega != 0.0 && c.has_b();
    const int nx_entries = c.x_dependent ? xn : 1;
    const int nt_entries = c.t_dependent ? nl : 1;

    struct Entry {
        double q, s, r, zA_z2_z3;  // z without the div_F1 part
        std::array<double, 4> Bhom;
        std::array<double, 2> P;
        std::array<double, 2> F1;
    };
    std::vector<Entry> entries(static_cast<size_t>(nx_entries) * nt_entries);

    for (int et = 0; et < nt_entries; ++et) {
        const double t = c.t_dependent ? mg.tcoord(et) : 0.0;
        for (int ex = 0; ex < nx_entries; ++ex) {
            std::array<double, 2> x{mg.lo[0] + 0.5 * (mg.hi[0] - mg.lo[0]), mg.lo[1] + 0.5 * (mg.hi[1] - mg.lo[1])};
            if (c.x_dependent) {
                if (mg.dim == 1)
                    x = {mg.xcoord(ex), 0.0};
                else
                    x = {mg.xcoord(ex % mg.nx, 0), mg.xcoord(ex / mg.nx, 1)};
            }
            SampledCell sc = sample_on_cell(c, x, t, cg, want_b);
            MacroDerivTables md = macro_derivatives(c, x, t, cg, mg);
            CellCorrectors cc;
            try {
                cc = solve_cell(sc, md, regime, cg, opt);
            } catch (const std::exception& e) {
                std::ostringstream os;
                os << "effective_model: cell solve failed at x = (" << x[0];
                if (mg.dim == 2) os << ", " << x[1];
                os << "), t = " << t << ": " << e.what();
                throw std::runtime_error(os.str());
            }
            ++em.cell_solves;
            em.max_residual = std::max(em.max_residual, cc.residual);
            em.max_mean_defect = std::max(em.max_mean_defect, cc.mean_defect);
            Entry en{};
            en.q = compute_q_eff(sc);
            en.s = compute_source_weight(sc);
            en.r = compute_recovery_weight(sc);
            BhomResult bh = compute_B_hom(cc, sc, cg, regime);
            en.Bhom = bh.form1;
            em.max_form_gap = std::max(em.max_form_gap, bh.form_gap);
            em.max_antisym = std::max(em.max_antisym, bh.antisym);
            em.min_eig_sym = std::min(em.min_eig_sym, bh.min_eig_sym);
            en.P = compute_P_eff(cc, sc, md, cg, regime);
            en.F1 = compute_zeta_flux_integral(cc, sc, cg);
            MacroDivTerms dv;
            dv.z2 = compute_z2(c, x, t, cg, regime, mg);
            dv.div_F1 = 0.0;  // filled in the second pass
            en.zA_z2_z3 = compute_z_eff(cc, sc, md, cg, dv);
            entries[static_cast<size_t>(et) * nx_entries + ex] = en;
        }
    }

    // second pass: macroscopic divergence of F1 across macro nodes (second-order centered,
    // one-sided at the boundary), then broadcast into the per-(level,node) tables
    for (int m = 0; m < nl; ++m) {
        const int et = c.t_dependent ? m : 0;
        for (int node = 0; node < xn; ++node) {
            const int ex = c.x_dependent ? node : 0;
            const Entry& en = entries[static_cast<size_t>(et) * nx_entries + ex];
            double divF1 = 0.0;
            if (c.x_dependent) {
                auto F1_of = [&](int nd, int k) { return entries[static_cast<size_t>(et) * nx_entries + nd].F1[k]; };
                for (int k = 0; k < mg.dim; ++k) {
                    const double h = mg.hx(k);
                    int i = mg.dim == 1 ? node : (k == 0 ? node % mg.nx : node / mg.nx);
                    auto node_at = [&](int ii) {
                        if (mg.dim == 1) return ii;
                        return k == 0 ? ii + mg.nx * (node / mg.nx) : (node % mg.nx) + mg.nx * ii;
                    };
                    if (i > 0 && i < mg.nx - 1)
                        divF1 += (F1_of(node_at(i + 1), k) - F1_of(node_at(i - 1), k)) / (2.0 * h);
                    else if (i == 0)
                        divF1 += (-3.0 * F1_of(node_at(0), k) + 4.0 * F1_of(node_at(1), k) - F1_of(node_at(2), k)) /
                                 (2.0 * h);
                    else
                        divF1 += (3.0 * F1_of(node_at(i), k) - 4.0 * F1_of(node_at(i - 1), k) +
                                  F1_of(node_at(i - 2), k)) /
                                 (2.0 * h);
                }
            }
            const size_t id = em.idx(m, node);
            em.q[id] = en.q;
            em.s[id] = en.s;
            em.r[id] = en.r;
            em.z[id] = en.zA_z2_z3 + divF1;
            for (int cidx = 0; cidx < dd; ++cidx) em.Bhom[id * dd + cidx] = en.Bhom[cidx];
            for (int k = 0; k < mg.dim; ++k) em.P[id * mg.dim + k] = en.P[k];
        }
    }
    return em;
}

// ---------------------------------------------------------------------------
// Closed-form special cases, used as oracles against effective_model.

enum class SpecialCase { PureFokkerPlanck, PureFick, FormalIdentityDiffusion };

struct SpecialCaseCoefficients {
    double capacity = 0.0;
    double diffusion = 0.0;
};

// Averaged coefficients by direct quadrature, bypassing cell solves.
//   pure-FP (eq:fin):    needs B = I and x-independent coefficients
//   pure-Fick (fick:fin): needs b1 = b2 = 1, b = 0; n = 1
//   formal-B-eq-I (nppr240): needs a1 = a2 = 1 and B = I
inline SpecialCaseCoefficients closed_form_special(const CoefficientSet& c, const CellGrid& g, SpecialCase sc,
                                                   const Regime& regime, std::array<double, 2> x = {0.0, 0.0},
                                                   double t = 0.0) {
    SampledCell s = sample_on_cell(c, x, t, g, false);
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("closed_form_special: case restriction violated: ") + what);
    };
    auto is_identity_B = [&]() {
        const int yn = g.ynodes();
        for (int n = 0; n < yn; ++n)
            for (int it = 0; it < g.ntau; ++it)
                for (int i = 0; i < g.dim; ++i)
                    for (int j = 0; j < g.dim; ++j)
                        if (std::fabs(s.Bval(g, n, it, i, j) - (i == j ? 1.0 : 0.0)) > 1e-12) return false;
        return true;
    };
    auto near_one = [](const std::vector<double>& v) {
        for (double w : v)
            if (std::fabs(w - 1.0) > 1e-12) return false;
        return true;
    };
    const double inv_b1 = [&] {
        double w = 0.0;
        for (double v : s.b1_y) w += 1.0 / v;
        return w / s.b1_y.size();
    }();
    const double inv_a2 = [&] {
        double w = 0.0;
        for (double v : s.a2_tau) w += 1.0 / v;
        return w / s.a2_tau.size();
    }();
    SpecialCaseCoefficients out;
    switch (sc) {
        case SpecialCase::PureFokkerPlanck: {
            require(is_identity_B(), "B must be the identity for pure-FP");
            require(!c.x_dependent, "pure-FP closed form needs x-independent coefficients");
            double a1_over_b1 = 0.0;
            for (size_t n = 0; n < s.a1_y.size(); ++n) a1_over_b1 += s.a1_y[n] / s.b1_y[n];
            a1_over_b1 /= s.a1_y.size();
            double b2_over_a2 = 0.0;
            for (size_t it = 0; it < s.a2_tau.size(); ++it) b2_over_a2 += s.b2_tau[it] / s.a2_tau[it];
            b2_over_a2 /= s.a2_tau.size();
            out.capacity = a1_over_b1 / (inv_b1 * inv_a2);
            out.diffusion = b2_over_a2 / (inv_b1 * inv_a2);
            break;
        }
        case SpecialCase::PureFick: {
            require(g.dim == 1, "pure-Fick closed form implemented for n = 1");
            require(near_one(s.b1_y) && near_one(s.b2_tau), "pure-Fick needs b1 = b2 = 1");
            require(!c.has_b(), "pure-Fick needs b = 0");
            out.capacity = integrate_y(s.a1_y) / inv_a2;
            // int_Q (B_eff/a2): the 1D flux constant per slice (slow) or of the tau-average (fast)
            double int_Beff_over_a2 = 0.0;
            if (regime.tag == Regime::Scale::FastStrict) {
                std::vector<double> Ms(g.ny, 0.0);
                for (int n = 0; n < g.ny; ++n)
                    for (int it = 0; it < g.ntau; ++it) Ms[n] += s.Bval(g, n, it, 0, 0) / s.a2_tau[it] / g.ntau;
                double hm = 0.0;
                for (double v : Ms) hm += 1.0 / v;
                int_Beff_over_a2 = g.ny / hm;
            } else {
                // slow regime; fast-equal only reduces to this when B is tau-independent (checked)
                if (regime.tag == Regime::Scale::FastEqual) {
                    for (int n = 0; n < g.ny; ++n)
                        for (int it = 1; it < g.ntau; ++it)
                            require(std::fabs(s.Bval(g, n, it, 0, 0) - s.Bval(g, n, 0, 0, 0)) <= 1e-12,
                                    "fast-equal pure-Fick closed form needs tau-independent B");
                }
                for (int it = 0; it < g.ntau; ++it) {
                    double hm = 0.0;
                    for (int n = 0; n < g.ny; ++n) hm += 1.0 / s.Bval(g, n, it, 0, 0);
                    int_Beff_over_a2 += (g.ny / hm) / s.a2_tau[it] / g.ntau;
                }
            }
            out.diffusion = int_Beff_over_a2 / inv_a2;
            break;
        }
        case SpecialCase::FormalIdentityDiffusion: {
            require(is_identity_B(), "formal-B-eq-I needs B = I");
            require(near_one(s.a1_y) && near_one(s.a2_tau), "formal-B-eq-I needs a1 = a2 = 1");
            out.capacity = 1.0;
            out.diffusion = integrate_y(s.b2_tau) / inv_b1;
            break;
        }
    }
    return out;
}

}  // namespace homogfp

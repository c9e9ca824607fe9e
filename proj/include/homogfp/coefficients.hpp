#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "homogfp/expr.hpp"
#include "homogfp/grid.hpp"

namespace homogfp {

using ScalarFn = std::function<double(const EvalPoint&)>;
// writes dim*dim entries row-major
using MatrixFn = std::function<void(const EvalPoint&, double*)>;

struct DerivativeConfig {
    enum class Mode { Analytic, FiniteDifference } mode = Mode::FiniteDifference;
    double hx = 1e-4;
    double ht = 1e-4;
};

// Optional closed-form macroscopic derivatives a coefficient family may supply.
struct AnalyticDerivatives {
    std::array<ScalarFn, 2> dx_b2{};      // d b2 / d x_k
    std::array<ScalarFn, 2> dx_inv_a2{};  // d (1/a2) / d x_k
    ScalarFn dt_inv_b1;                   // d (1/b1) / d t
};

// The coefficient family of the weakly non-product problem:
//   capacity a1(x,t,y) a2(x,t,tau), Fokker coefficient b1(x,t,y) b2(x,t,tau) + eps b(x,t,y,tau),
//   diffusion matrix B(x,t,y,tau).
struct CoefficientSet {
    int dim = 1;
    ScalarFn a1, a2, b1, b2;
    ScalarFn b;  // null means b == 0
    MatrixFn B;
    double alpha = 1.0;
    double beta = 2.0;
    double bound = 0.0;  // the constant C; 0 requests deriving it from sampled extremes
    bool x_dependent = false;
    bool t_dependent = false;
    DerivativeConfig deriv;
    AnalyticDerivatives analytic;

    mutable long long b_eval_count = 0;  // instrumentation for the omega=0 no-read check

    bool has_b() const { return static_cast<bool>(b); }
    double eval_b(const EvalPoint& p) const {
        ++b_eval_count;
        return b ? b(p) : 0.0;
    }
    void eval_B(const EvalPoint& p, double* out) const { B(p, out); }
};

struct ProblemData {
    ScalarFn source;   // f(x,t)
    ScalarFn initial;  // ubar(x), zero on the boundary
};

inline CoefficientSet make_constant_coefficients(int dim) {
    CoefficientSet c;
    c.dim = dim;
    c.a1 = c.a2 = c.b1 = c.b2 = [](const EvalPoint&) { return 1.0; };
    c.B = [dim](const EvalPoint&, double* out) {
        for (int i = 0; i < dim * dim; ++i) out[i] = 0.0;
        for (int i = 0; i < dim; ++i) out[i * dim + i] = 1.0;
    };
    return c;
}

// ---------------------------------------------------------------------------
// Sampling on the microscopic cell at a fixed macro point (x,t).

struct SampledCell {
    int dim = 1;
    std::array<double, 2> x{0.0, 0.0};
    double t = 0.0;
    std::vector<double> a1_y, b1_y;      // ynodes
    std::vector<double> a2_tau, b2_tau;  // ntau
    std::vector<double> b_q;             // ynodes*ntau when sampled, else empty
    std::vector<double> B_q;             // ynodes*ntau*dim*dim

    double Bval(const CellGrid& g, int iy, int it, int i, int j) const {
        return B_q[(static_cast<size_t>(iy) * g.ntau + it) * g.dim * g.dim + i * g.dim + j];
    }
};

inline EvalPoint cell_point(const CellGrid& g, std::array<double, 2> x, double t, int iy, int it) {
    EvalPoint p;
    p.x = x;
    p.t = t;
    if (g.dim == 1) {
        p.y[0] = g.ycoord(iy);
    } else {
        p.y[0] = g.ycoord(iy % g.ny);
        p.y[1] = g.ycoord(iy / g.ny);
    }
    p.tau = g.taucoord(it);
    return p;
}

// Tabulates a1,b1 on Y-nodes, a2,b2 on S-nodes and b,B on Q-nodes.
// with_b=false skips the non-product factor entirely (omega = 0 path never reads it).
inline SampledCell sample_on_cell(const CoefficientSet& c, std::array<double, 2> x, double t, const CellGrid& g,
                                  bool with_b = true) {
    SampledCell s;
    s.dim = g.dim;
    s.x = x;
    s.t = t;
    const int yn = g.ynodes();
    s.a1_y.resize(yn);
    s.b1_y.resize(yn);
    for (int iy = 0; iy < yn; ++iy) {
        EvalPoint p = cell_point(g, x, t, iy, 0);
        s.a1_y[iy] = c.a1(p);
        s.b1_y[iy] = c.b1(p);
    }
    s.a2_tau.resize(g.ntau);
    s.b2_tau.resize(g.ntau);
    for (int it = 0; it < g.ntau; ++it) {
        EvalPoint p = cell_point(g, x, t, 0, it);
        s.a2_tau[it] = c.a2(p);
        s.b2_tau[it] = c.b2(p);
    }
    s.B_q.resize(static_cast<size_t>(yn) * g.ntau * g.dim * g.dim);
    if (with_b && c.has_b()) s.b_q.resize(static_cast<size_t>(yn) * g.ntau);
    for (int iy = 0; iy < yn; ++iy)
        for (int it = 0; it < g.ntau; ++it) {
            EvalPoint p = cell_point(g, x, t, iy, it);
            c.eval_B(p, &s.B_q[(static_cast<size_t>(iy) * g.ntau + it) * g.dim * g.dim]);
            if (!s.b_q.empty()) s.b_q[static_cast<size_t>(iy) * g.ntau + it] = c.eval_b(p);
        }
    return s;
}

// ---------------------------------------------------------------------------
// Macroscopic derivatives entering the z_eff / P_eff / zeta formulas.

struct MacroDerivTables {
    std::array<std::vector<double>, 2> dx_b2;      // per direction, ntau values
    std::array<std::vector<double>, 2> dx_inv_a2;  // per direction, ntau values
    std::vector<double> dt_inv_b1;                 // ynodes values
    bool one_sided = false;                        // an FD stencil had to fall back near the boundary
};

namespace detail {

// Second-order derivative of g at s within [lo,hi]; one-sided 3-point fallback at the edges.
inline double d1_fd(const std::function<double(double)>& g, double s, double h, double lo, double hi,
                    bool* one_sided) {
    if (s - h >= lo && s + h <= hi) return (g(s + h) - g(s - h)) / (2.0 * h);
    if (one_sided) *one_sided = true;
    if (s + 2 * h <= hi) return (-3.0 * g(s) + 4.0 * g(s + h) - g(s + 2 * h)) / (2.0 * h);
    return (3.0 * g(s) - 4.0 * g(s - h) + g(s - 2 * h)) / (2.0 * h);
}

}  // namespace detail

inline MacroDerivTables macro_derivatives(const CoefficientSet& c, std::array<double, 2> x, double t,
                                          const CellGrid& g, const MacroGrid& domain) {
    MacroDerivTables d;
    const int yn = g.ynodes();
    const bool analytic = c.deriv.mode == DerivativeConfig::Mode::Analytic;
    for (int k = 0; k < g.dim; ++k) {
        d.dx_b2[k].assign(g.ntau, 0.0);
        d.dx_inv_a2[k].assign(g.ntau, 0.0);
    }
    d.dt_inv_b1.assign(yn, 0.0);
    if (!c.x_dependent) {
        // exact zeros; nothing to evaluate
    } else {
        for (int k = 0; k < g.dim; ++k) {
            const double h = c.deriv.hx;
            for (int it = 0; it < g.ntau; ++it) {
                EvalPoint p = cell_point(g, x, t, 0, it);
                if (analytic && c.analytic.dx_b2[k]) {
                    d.dx_b2[k][it] = c.analytic.dx_b2[k](p);
                } else {
                    auto gb2 = [&](double s) {
                        EvalPoint q = p;
                        q.x[k] = s;
                        return c.b2(q);
                    };
                    d.dx_b2[k][it] = detail::d1_fd(gb2, x[k], h, domain.lo[k], domain.hi[k], &d.one_sided);
                }
                if (analytic && c.analytic.dx_inv_a2[k]) {
                    d.dx_inv_a2[k][it] = c.analytic.dx_inv_a2[k](p);
                } else {
                    auto gia2 = [&](double s) {
                        EvalPoint q = p;
                        q.x[k] = s;
                        return 1.0 / c.a2(q);
                    };
                    d.dx_inv_a2[k][it] = detail::d1_fd(gia2, x[k], h, domain.lo[k], domain.hi[k], &d.one_sided);
                }
            }
        }
    }
    if (c.t_dependent) {
        const double h = c.deriv.ht;
        for (int iy = 0; iy < yn; ++iy) {
            EvalPoint p = cell_point(g, x, t, iy, 0);
            if (analytic && c.analytic.dt_inv_b1) {
                d.dt_inv_b1[iy] = c.analytic.dt_inv_b1(p);
            } else {
                auto gb1 = [&](double s) {
                    EvalPoint q = p;
                    q.t = s;
                    return 1.0 / c.b1(q);
                };
                d.dt_inv_b1[iy] = detail::d1_fd(gb1, t, h, 0.0, domain.T, &d.one_sided);
            }
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Bound validation (report-only).

struct ValidationReport {
    struct Range {
        double min = 0.0, max = 0.0;
    };
    std::map<std::string, Range> factor_ranges;
    Range rayleigh;           // min/max of xi^T B xi / |xi|^2 over probes
    double symmetry_defect = 0.0;
    double bound_used = 0.0;  // the constant C the checks ran against
    bool bound_derived = false;
    std::vector<std::string> violations;
    bool pass = true;

    std::string summary() const {
        std::ostringstream os;
        os.precision(10);
        os << "{\n  \"pass\": " << (pass ? "true" : "false") << ",\n  \"bound\": " << bound_used
           << ",\n  \"bound_derived\": " << (bound_derived ? "true" : "false") << ",\n";
        for (const auto& [k, r] : factor_ranges)
            os << "  \"" << k << "\": {\"min\": " << r.min << ", \"max\": " << r.max << "},\n";
        os << "  \"rayleigh\": {\"min\": " << rayleigh.min << ", \"max\": " << rayleigh.max << "},\n";
        os << "  \"symmetry_defect\": " << symmetry_defect << ",\n  \"violations\": [";
        for (size_t i = 0; i < violations.size(); ++i) os << (i ? ", " : "") << '"' << violations[i] << '"';
        os << "]\n}\n";
        return os.str();
    }
};

// Checks C^-1 <= a1,a2,b1,b2 <= C, |b| <= C and the ellipticity bounds of B over a probe
// grid of macro samples x cell nodes. The perturbation b has no positive lower bound:
// the pure product case b = 0 must validate.
inline ValidationReport validate_bounds(const CoefficientSet& c, const CellGrid& g,
                                        const std::vector<std::pair<std::array<double, 2>, double>>& macro_samples) {
    ValidationReport rep;
    auto track = [&](const std::string& name, double v) {
        auto it = rep.factor_ranges.find(name);
        if (it == rep.factor_ranges.end())
            rep.factor_ranges[name] = {v, v};
        else {
            it->second.min = std::min(it->second.min, v);
            it->second.max = std::max(it->second.max, v);
        }
    };
    bool first_probe = true;
    std::vector<double> Bv(static_cast<size_t>(c.dim) * c.dim);
    for (const auto& [x, t] : macro_samples) {
        SampledCell s = sample_on_cell(c, x, t, g, c.has_b());
        for (double v : s.a1_y) track("a1", v);
        for (double v : s.b1_y) track("b1", v);
        for (double v : s.a2_tau) track("a2", v);
        for (double v : s.b2_tau) track("b2", v);
        for (double v : s.b_q) track("b", v);
        const int yn = g.ynodes();
        for (int iy = 0; iy < yn; ++iy)
            for (int it = 0; it < g.ntau; ++it) {
                for (int i = 0; i < c.dim; ++i)
                    for (int j = 0; j < c.dim; ++j) Bv[i * c.dim + j] = s.Bval(g, iy, it, i, j);
                if (c.dim == 1) {
                    const double q = Bv[0];
                    if (first_probe) {
                        rep.rayleigh = {q, q};
                        first_probe = false;
                    }
                    rep.rayleigh.min = std::min(rep.rayleigh.min, q);
                    rep.rayleigh.max = std::max(rep.rayleigh.max, q);
                } else {
                    rep.symmetry_defect = std::max(rep.symmetry_defect, std::fabs(Bv[1] - Bv[2]));
                    for (int a = 0; a < 8; ++a) {
                        const double th = 3.14159265358979323846 * a / 8.0;
                        const double xi0 = std::cos(th), xi1 = std::sin(th);
                        const double q = Bv[0] * xi0 * xi0 + (Bv[1] + Bv[2]) * xi0 * xi1 + Bv[3] * xi1 * xi1;
                        if (first_probe) {
                            rep.rayleigh = {q, q};
                            first_probe = false;
                        }
                        rep.rayleigh.min = std::min(rep.rayleigh.min, q);
                        rep.rayleigh.max = std::max(rep.rayleigh.max, q);
                    }
                }
            }
    }
    if (!c.has_b()) rep.factor_ranges["b"] = {0.0, 0.0};

    double C = c.bound;
    if (C <= 0.0) {
        // derive the admissible constant from the sampled extremes
        C = 1.0;
        for (const auto& [k, r] : rep.factor_ranges) {
            if (k == "b") {
                C = std::max(C, std::max(std::fabs(r.min), std::fabs(r.max)));
            } else {
                C = std::max(C, r.max);
                if (r.min > 0) C = std::max(C, 1.0 / r.min);
            }
        }
        C = std::max({C, rep.rayleigh.max, rep.rayleigh.min > 0 ? 1.0 / rep.rayleigh.min : C});
        rep.bound_derived = true;
    }
    rep.bound_used = C;
    auto check = [&](const std::string& name, double lo, double hi) {
        const auto& r = rep.factor_ranges[name];
        std::ostringstream os;
        os.precision(10);
        if (r.min < lo) {
            os << name << ": min " << r.min << " below " << lo;
            rep.violations.push_back(os.str());
        } else if (r.max > hi) {
            os << name << ": max " << r.max << " above " << hi;
            rep.violations.push_back(os.str());
        }
    };
    for (const char* k : {"a1", "a2", "b1", "b2"}) check(k, 1.0 / C, C);
    check("b", -C, C);
    if (rep.rayleigh.min < 1.0 / C) rep.violations.push_back("B: Rayleigh quotient below C^-1");
    if (rep.rayleigh.max > C) rep.violations.push_back("B: Rayleigh quotient above C");
    if (c.dim == 2 && rep.symmetry_defect > 1e-12) rep.violations.push_back("B: not symmetric");
    rep.pass = rep.violations.empty();
    return rep;
}

// ---------------------------------------------------------------------------
// The eps-realization of the general problem (a^eps, c^eps, B^eps).

struct EpsilonRealization {
    const CoefficientSet* base = nullptr;
    double eps = 1.0;

    double ypos(double x) const {
        const double s = x / std::pow(eps, base->alpha);
        return s - std::floor(s);
    }
    double taupos(double t) const {
        const double s = t / std::pow(eps, base->beta);
        return s - std::floor(s);
    }
    EvalPoint point(std::array<double, 2> x, double t) const {
        EvalPoint p;
        p.x = x;
        p.t = t;
        p.y[0] = ypos(x[0]);
        if (base->dim == 2) p.y[1] = ypos(x[1]);
        p.tau = taupos(t);
        return p;
    }
    double a(std::array<double, 2> x, double t) const {
        EvalPoint p = point(x, t);
        return base->a1(p) * base->a2(p);
    }
    double c(std::array<double, 2> x, double t) const {
        EvalPoint p = point(x, t);
        return base->b1(p) * base->b2(p) + eps * (base->has_b() ? base->eval_b(p) : 0.0);
    }
    void Bmat(std::array<double, 2> x, double t, double* out) const {
        EvalPoint p = point(x, t);
        base->eval_B(p, out);
    }
    // b1 sampled at (x, t, x/eps^alpha); used by the v-transformation
    double b1(std::array<double, 2> x, double t) const {
        EvalPoint p = point(x, t);
        return base->b1(p);
    }
    // chain-rule time derivative of c^eps (finite differences in both slots)
    double dc_dt(std::array<double, 2> x, double t, double h) const {
        return (c(x, t + h) - c(x, t - h)) / (2.0 * h);
    }
    double c_over_a(std::array<double, 2> x, double t) const { return c(x, t) / a(x, t); }
};

// Maps the weakly non-product data to the general form (gpro000):
//   a^eps = a1^eps a2^eps, c^eps = b1^eps b2^eps + eps b^eps.
// Fails when eps is too large for positivity of c^eps (probed on the cell grid).
inline EpsilonRealization to_general_form(const CoefficientSet& c, double eps,
                                          const std::vector<std::pair<std::array<double, 2>, double>>& macro_samples,
                                          const CellGrid& probe_grid) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("to_general_form: eps must lie in (0,1]");
    double min_prod = 1e300, max_abs_b = 0.0;
    for (const auto& [x, t] : macro_samples) {
        SampledCell s = sample_on_cell(c, x, t, probe_grid, c.has_b());
        double b1min = 1e300, b2min = 1e300;
        for (double v : s.b1_y) b1min = std::min(b1min, v);
        for (double v : s.b2_tau) b2min = std::min(b2min, v);
        min_prod = std::min(min_prod, b1min * b2min);
        for (double v : s.b_q) max_abs_b = std::max(max_abs_b, std::fabs(v));
    }
    if (min_prod - eps * max_abs_b <= 0.0) {
        std::ostringstream os;
        os << "to_general_form: eps = " << eps << " breaks positivity of c^eps (min b1*b2 = " << min_prod
           << ", eps*max|b| = " << eps * max_abs_b << ")";
        throw std::invalid_argument(os.str());
    }
    EpsilonRealization r;
    r.base = &c;
    r.eps = eps;
    return r;
}

}  // namespace homogfp

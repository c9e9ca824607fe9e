#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "homogfp/config.hpp"
#include "homogfp/effective.hpp"
#include "homogfp/macro_solver.hpp"
#include "homogfp/micro_solver.hpp"
#include "homogfp/unfolding.hpp"

namespace homogfp {

// Bilinear-in-x, linear-in-t interpolation of a macro-grid field onto another grid.
inline SpaceTimeField interpolate_to(const SpaceTimeField& f, const MacroGrid& from, const MacroGrid& to,
                                     int stride_x = 1, int stride_t = 1) {
    SpaceTimeField out = SpaceTimeField::make(to);
    const int cn = (from.nx - 1) / stride_x;  // coarse intervals
    const int ct = from.nt / stride_t;
    auto sample = [&](double xq1, double xq2, double tq) {
        double st = tq / from.T * ct;
        int mt = std::min(static_cast<int>(st), ct - 1);
        const double wt = st - mt;
        auto space = [&](int mlev) {
            const int lev = mlev * stride_t;
            if (from.dim == 1) {
                double sx = (xq1 - from.lo[0]) / (from.hi[0] - from.lo[0]) * cn;
                int i = std::min(static_cast<int>(sx), cn - 1);
                const double w = sx - i;
                return (1.0 - w) * f.at(lev, i * stride_x) + w * f.at(lev, (i + 1) * stride_x);
            }
            double sx = (xq1 - from.lo[0]) / (from.hi[0] - from.lo[0]) * cn;
            double sy = (xq2 - from.lo[1]) / (from.hi[1] - from.lo[1]) * cn;
            int i = std::min(static_cast<int>(sx), cn - 1);
            int j = std::min(static_cast<int>(sy), cn - 1);
            const double wx = sx - i, wy = sy - j;
            auto v = [&](int ii, int jj) { return f.at(lev, ii * stride_x + from.nx * jj * stride_x); };
            return (1.0 - wx) * (1.0 - wy) * v(i, j) + wx * (1.0 - wy) * v(i + 1, j) +
                   (1.0 - wx) * wy * v(i, j + 1) + wx * wy * v(i + 1, j + 1);
        };
        return (1.0 - wt) * space(mt) + wt * space(mt + 1);
    };
    for (int m = 0; m <= to.nt; ++m)
        for (int n = 0; n < to.xnodes(); ++n) {
            const double x1 = to.xcoord(to.dim == 1 ? n : n % to.nx, 0);
            const double x2 = to.dim == 2 ? to.xcoord(n / to.nx, 1) : 0.0;
            out.at(m, n) = sample(x1, x2, to.tcoord(m));
        }
    return out;
}

inline double l2_difference(const SpaceTimeField& a, const SpaceTimeField& b, const MacroGrid& g) {
    SpaceTimeField d = a;
    for (size_t i = 0; i < d.data.size(); ++i) d.data[i] -= b.data[i];
    return l2_norm_spacetime(d, g);
}

struct HomogenizedReference {
    EffectiveModel model;
    MacroSolution solution;
};

inline HomogenizedReference solve_homogenized(const Scenario& sc) {
    HomogenizedReference out;
    Regime regime = sc.regime();
    out.model = effective_model(sc.coefficients, sc.domain, sc.cell, regime, sc.cell_options);
    std::vector<double> v0 = macro_initial(sc.initial, sc.coefficients, sc.domain, sc.cell);
    out.solution = solve_macro(out.model, sc.source, v0, sc.theta, sc.macro_tol);
    recover_u(out.solution, sc.coefficients, sc.cell);
    return out;
}

// Per-eps record of the convergence study.
struct EpsRecord {
    double eps = 0.0;
    double err_v = 0.0;       // ||v_eps - v||_{L2(Omega_T)}, the strong-convergence metric
    double err_u = 0.0;       // ||u_eps - u||; bounded but not decaying (u converges weakly)
    double err_u_avg = 0.0;   // cell-averaged u difference over Lambda_eps
    double energy_sup = 0.0;  // the two terms of (fas100)
    double energy_grad = 0.0;
    std::vector<double> shift_h;        // physical shifts
    std::vector<double> shift_modulus;  // (eq:time_comp) modulus per shift
    double wall_seconds = 0.0;
};

struct ConvergenceReport {
    std::vector<EpsRecord> records;
    std::vector<double> ratios_v;  // consecutive err_v ratios
    std::vector<double> ratios_u;
    double interp_error = 0.0;  // macro->micro interpolation error estimate (coarsened Richardson)
    json to_json(const Scenario& sc) const {
        json rep;
        rep["config"] = sc.resolved;
        rep["interp_error"] = interp_error;
        rep["records"] = json::array();
        for (const auto& r : records) {
            json e;
            e["eps"] = r.eps;
            e["err_v"] = r.err_v;
            e["err_u"] = r.err_u;
            e["err_u_avg"] = r.err_u_avg;
            e["energy_sup"] = r.energy_sup;
            e["energy_grad"] = r.energy_grad;
            e["shift_h"] = r.shift_h;
            e["shift_modulus"] = r.shift_modulus;
            e["wall_seconds"] = r.wall_seconds;
            rep["records"].push_back(e);
        }
        rep["ratios_v"] = ratios_v;
        rep["ratios_u"] = ratios_u;
        return rep;
    }
};

inline EpsRecord measure_eps_run(const Scenario& sc, const MicroSolution& micro, const SpaceTimeField& v_eps,
                                 const HomogenizedReference& ref) {
    EpsRecord rec;
    rec.eps = micro.eps;
    const MacroGrid& mg = micro.grid;
    SpaceTimeField u_hom = interpolate_to(ref.solution.u, sc.domain, mg);
    SpaceTimeField v_hom = interpolate_to(ref.solution.v, sc.domain, mg);
    rec.err_u = l2_difference(micro.u, u_hom, mg);
    rec.err_v = l2_difference(v_eps, v_hom, mg);
    auto [es, eg] = energy_functional(v_eps, mg);
    rec.energy_sup = es;
    rec.energy_grad = eg;
    const double delta = sc.delta_fraction * mg.T;
    for (int k : sc.shift_multiples) {
        const double h = k * mg.dt();
        rec.shift_h.push_back(h);
        rec.shift_modulus.push_back(time_shift_modulus(v_eps, mg, h, delta));
    }
    // cell-averaged comparison on commensurate grids; skipped silently otherwise
    try {
        const int px = static_cast<int>(std::lround(std::pow(micro.eps, sc.coefficients.alpha) / mg.hx(0)));
        const int pt = static_cast<int>(std::lround(std::pow(micro.eps, sc.coefficients.beta) / mg.dt()));
        if (px >= 4 && pt >= 4) {
            CellGrid avg_grid = build_cell_grid(mg.dim, px, pt);
            CellAverages Ma = cell_average(micro.u, mg, micro.eps, sc.coefficients.alpha, sc.coefficients.beta, avg_grid);
            CellAverages Mh = cell_average(u_hom, mg, micro.eps, sc.coefficients.alpha, sc.coefficients.beta, avg_grid);
            double acc = 0.0;
            const double cellvol = std::pow(std::pow(micro.eps, sc.coefficients.alpha), mg.dim) *
                                   std::pow(micro.eps, sc.coefficients.beta);
            for (size_t i = 0; i < Ma.value.size(); ++i) {
                if (!Ma.inside[i]) continue;
                const double d = Ma.value[i] - Mh.value[i];
                acc += d * d * cellvol;
            }
            rec.err_u_avg = std::sqrt(acc);
        }
    } catch (const std::exception&) {
        rec.err_u_avg = -1.0;  // grids not commensurate; diagnostic unavailable
    }
    return rec;
}

// For each eps: solve the micro problem, compare against the homogenized solution
// (solved once), and collect the energy/compactness diagnostics.
inline ConvergenceReport run_convergence_study(const Scenario& sc, const HomogenizedReference* ref_in = nullptr) {
    if (sc.epsilons.empty()) throw std::invalid_argument("run_convergence_study: the eps list is empty");
    HomogenizedReference local;
    const HomogenizedReference* ref = ref_in;
    if (!ref) {
        local = solve_homogenized(sc);
        ref = &local;
    }
    ConvergenceReport rep;
    // interpolation error estimate: compare full and coarsened interpolants on the finest micro grid
    {
        MicroOptions probe;
        probe.res_space = sc.res_space;
        probe.res_time = sc.res_time;
        probe.T = sc.domain.T;
        MacroGrid finest = detail::micro_grid(sc.coefficients, sc.epsilons.back(), sc.domain, probe);
        SpaceTimeField a = interpolate_to(ref->solution.u, sc.domain, finest);
        SpaceTimeField b = interpolate_to(ref->solution.u, sc.domain, finest, 2, 2);
        rep.interp_error = l2_difference(a, b, finest);
    }
    for (double eps : sc.epsilons) {
        const auto t0 = std::chrono::steady_clock::now();
        MicroOptions mo;
        mo.res_space = sc.res_space;
        mo.res_time = sc.res_time;
        mo.T = sc.domain.T;
        MicroSolution micro;
        try {
            micro = solve_micro(sc.coefficients, eps, sc.source, sc.initial, sc.domain, mo);
        } catch (const std::exception& e) {
            throw std::runtime_error("convergence study failed at eps = " + std::to_string(eps) + ": " + e.what());
        }
        SpaceTimeField v_eps = to_v(micro, sc.coefficients);
        EpsRecord rec = measure_eps_run(sc, micro, v_eps, *ref);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rep.records.push_back(rec);
    }
    for (size_t i = 1; i < rep.records.size(); ++i) {
        rep.ratios_v.push_back(rep.records[i].err_v / rep.records[i - 1].err_v);
        rep.ratios_u.push_back(rep.records[i].err_u / rep.records[i - 1].err_u);
    }
    return rep;
}

struct PerturbationReport {
    double dq = 0.0, dB = 0.0, dP = 0.0, dz = 0.0;  // max-abs effective-coefficient differences
    double dmacro = 0.0;                            // macro solution difference
    std::vector<double> eps;
    std::vector<double> micro_diff;  // ||u_eps(b) - u_eps(0)||_{L2}
    double slope = 0.0;              // least-squares fit of log(diff) vs log(eps)
    json to_json(const Scenario& sc) const {
        json rep;
        rep["config"] = sc.resolved;
        rep["d_q_eff"] = dq;
        rep["d_B_hom"] = dB;
        rep["d_P_eff"] = dP;
        rep["d_z_eff"] = dz;
        rep["d_macro"] = dmacro;
        rep["eps"] = eps;
        rep["micro_diff"] = micro_diff;
        rep["slope"] = slope;
        return rep;
    }
};

// Assembles the effective model with the perturbation b and with b := 0 and reports the
// differences; at the micro level the difference is O(eps), not zero.
inline PerturbationReport run_perturbation_study(const Scenario& sc) {
    // precondition: B may not depend on y (otherwise the perturbation does enter the limit)
    {
        SampledCell probe = sample_on_cell(sc.coefficients, {sc.domain.lo[0], sc.domain.lo[1]}, 0.0, sc.cell, false);
        const CellGrid& g = sc.cell;
        for (int n = 1; n < g.ynodes(); ++n)
            for (int it = 0; it < g.ntau; ++it)
                for (int i = 0; i < g.dim; ++i)
                    for (int j = 0; j < g.dim; ++j)
                        if (std::fabs(probe.Bval(g, n, it, i, j) - probe.Bval(g, 0, it, i, j)) > 1e-12)
                            throw std::invalid_argument(
                                "run_perturbation_study: B depends on y; the independence claim does not apply");
    }
    Scenario base = sc;
    base.coefficients.b = nullptr;
    Regime regime = sc.regime();
    EffectiveModel with_b = effective_model(sc.coefficients, sc.domain, sc.cell, regime, sc.cell_options);
    EffectiveModel no_b = effective_model(base.coefficients, base.domain, base.cell, regime, base.cell_options);
    PerturbationReport rep;
    for (size_t i = 0; i < with_b.q.size(); ++i) {
        rep.dq = std::max(rep.dq, std::fabs(with_b.q[i] - no_b.q[i]));
        rep.dz = std::max(rep.dz, std::fabs(with_b.z[i] - no_b.z[i]));
    }
    for (size_t i = 0; i < with_b.Bhom.size(); ++i)
        rep.dB = std::max(rep.dB, std::fabs(with_b.Bhom[i] - no_b.Bhom[i]));
    for (size_t i = 0; i < with_b.P.size(); ++i) rep.dP = std::max(rep.dP, std::fabs(with_b.P[i] - no_b.P[i]));
    {
        std::vector<double> v0 = macro_initial(sc.initial, sc.coefficients, sc.domain, sc.cell);
        MacroSolution sol_b = solve_macro(with_b, sc.source, v0, sc.theta, sc.macro_tol);
        MacroSolution sol_0 = solve_macro(no_b, sc.source, v0, sc.theta, sc.macro_tol);
        rep.dmacro = l2_difference(sol_b.v, sol_0.v, sc.domain);
    }
    for (double eps : sc.epsilons) {
        MicroOptions mo;
        mo.res_space = sc.res_space;
        mo.res_time = sc.res_time;
        mo.T = sc.domain.T;
        MicroSolution mb = solve_micro(sc.coefficients, eps, sc.source, sc.initial, sc.domain, mo);
        MicroSolution m0 = solve_micro(base.coefficients, eps, sc.source, sc.initial, base.domain, mo);
        rep.eps.push_back(eps);
        rep.micro_diff.push_back(l2_difference(mb.u, m0.u, mb.grid));
    }
    if (rep.eps.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int n = static_cast<int>(rep.eps.size());
        for (int i = 0; i < n; ++i) {
            const double lx = std::log(rep.eps[i]), ly = std::log(rep.micro_diff[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Stage-by-stage scenario runner producing a reproducible artifact bundle.

struct StageFailure : std::runtime_error {
    std::string stage;
    StageFailure(std::string st, const std::string& what)
        : std::runtime_error("stage '" + st + "' failed: " + what), stage(std::move(st)) {}
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
    os << text;
}

inline void write_effective_csv(const std::filesystem::path& p, const EffectiveModel& em) {
    std::ofstream os(p);
    os.precision(17);
    const MacroGrid& g = em.grid;
    os << (g.dim == 2 ? "x1,x2,t" : "x,t") << ",q_eff,src_weight,rec_weight,z_eff";
    for (int d = 0; d < g.dim; ++d) os << ",P" << d + 1;
    for (int i = 0; i < g.dim; ++i)
        for (int j = 0; j < g.dim; ++j) os << ",Bhom" << i + 1 << j + 1;
    os << "\n";
    for (int m = 0; m <= g.nt; ++m)
        for (int n = 0; n < g.xnodes(); ++n) {
            if (g.dim == 2)
                os << g.xcoord(n % g.nx, 0) << "," << g.xcoord(n / g.nx, 1);
            else
                os << g.xcoord(n);
            const size_t id = em.idx(m, n);
            os << "," << g.tcoord(m) << "," << em.q[id] << "," << em.s[id] << "," << em.r[id] << "," << em.z[id];
            for (int d = 0; d < g.dim; ++d) os << "," << em.P_at(m, n, d);
            for (int i = 0; i < g.dim; ++i)
                for (int j = 0; j < g.dim; ++j) os << "," << em.Bhom_at(m, n, i, j);
            os << "\n";
        }
}

inline void write_convergence_csv(const std::filesystem::path& p, const ConvergenceReport& rep) {
    std::ofstream os(p);
    os.precision(17);
    os << "eps,err_v,err_u,err_u_avg,energy_sup,energy_grad";
    if (!rep.records.empty())
        for (size_t k = 0; k < rep.records.front().shift_h.size(); ++k) os << ",shift_h" << k << ",modulus" << k;
    os << "\n";
    for (const auto& r : rep.records) {
        os << r.eps << "," << r.err_v << "," << r.err_u << "," << r.err_u_avg << "," << r.energy_sup << ","
           << r.energy_grad;
        for (size_t k = 0; k < r.shift_h.size(); ++k) os << "," << r.shift_h[k] << "," << r.shift_modulus[k];
        os << "\n";
    }
}

// Executes the requested pipeline stages in order and writes all outputs plus the
// resolved configuration. Throws StageFailure naming the failing stage.
inline void run_scenario(const Scenario& sc, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    write_text(out / "resolved_config.json", sc.resolved.dump(2) + "\n");

    Regime regime = sc.regime();
    HomogenizedReference ref;
    bool have_ref = false;
    auto want = [&](const char* st) {
        for (const auto& s : sc.stages)
            if (s == st) return true;
        return false;
    };

    if (want("validate")) {
        try {
            std::vector<std::pair<std::array<double, 2>, double>> pts;
            for (double fx : {0.0, 0.5, 1.0})
                for (double ft : {0.0, 0.5, 1.0})
                    pts.push_back({{sc.domain.lo[0] + fx * (sc.domain.hi[0] - sc.domain.lo[0]),
                                    sc.domain.lo[1] + fx * (sc.domain.hi[1] - sc.domain.lo[1])},
                                   ft * sc.domain.T});
            ValidationReport vr = validate_bounds(sc.coefficients, sc.cell, pts);
            write_text(out / "validation.json", vr.summary());
            if (!vr.pass) throw std::runtime_error("coefficient bounds violated; see validation.json");
        } catch (const StageFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw StageFailure("validate", e.what());
        }
    }
    if (want("cell")) {
        try {
            std::array<double, 2> x{0.5 * (sc.domain.lo[0] + sc.domain.hi[0]),
                                    0.5 * (sc.domain.lo[1] + sc.domain.hi[1])};
            SampledCell s = sample_on_cell(sc.coefficients, x, 0.0, sc.cell,
                                           regime.omega != 0.0 && sc.coefficients.has_b());
            MacroDerivTables md = macro_derivatives(sc.coefficients, x, 0.0, sc.cell, sc.domain);
            CellCorrectors cc = solve_cell(s, md, regime, sc.cell, sc.cell_options);
            for (int j = 0; j < sc.dim; ++j)
                write_cell_field_csv((out / ("chi" + std::to_string(j + 1) + ".csv")).string(), cc.chi[j], sc.cell);
            write_cell_field_csv((out / "zeta.csv").string(), cc.zeta, sc.cell);
            json rep;
            rep["config"] = sc.resolved;
            rep["regime"] = regime.name();
            rep["omega"] = regime.omega;
            rep["residual"] = cc.residual;
            rep["mean_defect"] = cc.mean_defect;
            rep["marching_defects"] = cc.marching.defect_history;
            rep["contraction"] = cc.marching.contraction;
            write_text(out / "cell_report.json", rep.dump(2) + "\n");
        } catch (const std::exception& e) {
            throw StageFailure("cell", e.what());
        }
    }
    if (want("effective") || want("macro") || want("report")) {
        try {
            ref.model = effective_model(sc.coefficients, sc.domain, sc.cell, regime, sc.cell_options);
            write_effective_csv(out / "effective.csv", ref.model);
            json rep;
            rep["config"] = sc.resolved;
            rep["min_eig_sym"] = ref.model.min_eig_sym;
            rep["max_form_gap"] = ref.model.max_form_gap;
            rep["max_antisym"] = ref.model.max_antisym;
            rep["max_cell_residual"] = ref.model.max_residual;
            rep["cell_solves"] = ref.model.cell_solves;
            rep["fp_capacity"] = ref.model.fp_capacity();
            rep["fp_diffusion"] = ref.model.fp_diffusion();
            rep["fick_capacity"] = ref.model.fick_capacity();
            rep["fick_diffusion"] = ref.model.fick_diffusion();
            write_text(out / "effective_summary.json", rep.dump(2) + "\n");
        } catch (const std::exception& e) {
            throw StageFailure("effective", e.what());
        }
    }
    if (want("macro") || want("report")) {
        try {
            std::vector<double> v0 = macro_initial(sc.initial, sc.coefficients, sc.domain, sc.cell);
            ref.solution = solve_macro(ref.model, sc.source, v0, sc.theta, sc.macro_tol);
            recover_u(ref.solution, sc.coefficients, sc.cell);
            have_ref = true;
            write_spacetime_csv((out / "macro.csv").string(), sc.domain, ref.solution.v, &ref.solution.u);
        } catch (const std::exception& e) {
            throw StageFailure("macro", e.what());
        }
    }
    if (want("micro")) {
        try {
            for (double eps : sc.epsilons) {
                MicroOptions mo;
                mo.res_space = sc.res_space;
                mo.res_time = sc.res_time;
                mo.T = sc.domain.T;
                MicroSolution micro = solve_micro(sc.coefficients, eps, sc.source, sc.initial, sc.domain, mo);
                std::ostringstream tag;
                tag << "micro_eps_" << eps;
                write_spacetime_csv((out / (tag.str() + ".csv")).string(), micro.grid, micro.u, nullptr, "u");
                std::ofstream el(out / (tag.str() + "_energy.csv"));
                el.precision(17);
                el << "t,energy\n";
                for (size_t m = 0; m < micro.energy_log.size(); ++m)
                    el << micro.grid.tcoord(static_cast<int>(m)) << "," << micro.energy_log[m] << "\n";
            }
        } catch (const std::exception& e) {
            throw StageFailure("micro", e.what());
        }
    }
    if (want("unfold")) {
        try {
            if (!sc.epsilons.empty()) {
                const double eps = sc.epsilons.front();
                MicroOptions mo;
                mo.res_space = sc.res_space;
                mo.res_time = sc.res_time;
                mo.T = sc.domain.T;
                MicroSolution micro = solve_micro(sc.coefficients, eps, sc.source, sc.initial, sc.domain, mo);
                SpaceTimeField v = to_v(micro, sc.coefficients);
                CellGrid ug = build_cell_grid(sc.dim, sc.res_space, sc.res_time);
                UnfoldedField T = unfold(v, micro.grid, eps, sc.coefficients.alpha, sc.coefficients.beta, ug);
                write_unfolded_csv((out / "unfolded_v.csv").string(), T, ug);
            }
        } catch (const std::exception& e) {
            throw StageFailure("unfold", e.what());
        }
    }
    if (want("report")) {
        try {
            if (!sc.epsilons.empty()) {
                ConvergenceReport rep = run_convergence_study(sc, have_ref ? &ref : nullptr);
                write_convergence_csv(out / "convergence.csv", rep);
                write_text(out / "report.json", rep.to_json(sc).dump(2) + "\n");
            }
        } catch (const std::exception& e) {
            throw StageFailure("report", e.what());
        }
    }
}

}  // namespace homogfp

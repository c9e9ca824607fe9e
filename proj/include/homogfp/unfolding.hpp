#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "homogfp/grid.hpp"

namespace homogfp {

// Discrete time-periodic unfolding: values indexed by (macro cell xi, time slab,
// y-node, tau-node); zero outside Lambda_eps = Omega_hat x T_hat.
struct UnfoldedField {
    int dim = 1;
    double eps = 1.0, alpha = 1.0, beta = 2.0;
    std::array<int, 2> ncells{0, 0};  // cells per spatial direction covering Omega
    int nslabs = 0;                   // time slabs covering [0, T], full or partial
    int ny = 0, ntau = 0;
    std::vector<uint8_t> cell_inside;  // per spatial cell: fully inside Omega
    std::vector<uint8_t> slab_inside;  // per slab: entirely below T
    std::vector<double> data;          // [((cell)*nslabs + slab)*Q + q]
    bool exact = true;                 // pure re-indexing (commensurate grids)

    int cells_total() const { return dim == 1 ? ncells[0] : ncells[0] * ncells[1]; }
    int ynodes() const { return dim == 1 ? ny : ny * ny; }
    int qnodes() const { return ynodes() * ntau; }
    size_t idx(int cell, int slab, int iy, int it) const {
        return ((static_cast<size_t>(cell) * nslabs + slab) * ynodes() + iy) * ntau + it;
    }
    double at(int cell, int slab, int iy, int it) const { return data[idx(cell, slab, iy, it)]; }
    double& at(int cell, int slab, int iy, int it) { return data[idx(cell, slab, iy, it)]; }
    bool inside(int cell, int slab) const {
        return cell_inside[static_cast<size_t>(cell)] && slab_inside[static_cast<size_t>(slab)];
    }
};

namespace detail {

struct UnfoldLayout {
    std::array<int, 2> ncells{0, 0};
    int nslabs = 0;
    int px = 0;  // grid nodes per cell per direction
    int pt = 0;  // time steps per slab
    std::array<int, 2> first_node{0, 0};
};

// Strict commensurability: the macro grid must be an integer refinement of the
// eps-cell lattice so unfolding is a pure permutation.
inline UnfoldLayout commensurate_layout(const MacroGrid& g, double eps, double alpha, double beta,
                                        const CellGrid& cg, bool strict) {
    UnfoldLayout L;
    const double per = std::pow(eps, alpha);
    const double pert = std::pow(eps, beta);
    const double rx = per / g.hx(0);
    const double rt = pert / g.dt();
    L.px = static_cast<int>(std::lround(rx));
    L.pt = static_cast<int>(std::lround(rt));
    const bool ok_x = std::fabs(rx - L.px) < 1e-9 && L.px >= 1;
    const bool ok_t = std::fabs(rt - L.pt) < 1e-9 && L.pt >= 1;
    // Omega must start on the cell lattice for node indices to line up
    const double ox = g.lo[0] / per;
    const bool ok_o = std::fabs(ox - std::lround(ox)) < 1e-9;
    if (strict && (!ok_x || !ok_t || !ok_o))
        throw std::invalid_argument("unfold: macro grid is not commensurate with the eps-cells (strict mode)");
    if (cg.ny != L.px || cg.ntau != L.pt)
        throw std::invalid_argument("unfold: cell grid must carry " + std::to_string(L.px) + " x " +
                                    std::to_string(L.pt) + " nodes to match the eps-cell sampling");
    for (int d = 0; d < g.dim; ++d) {
        const double span = g.hi[d] - g.lo[d];
        L.ncells[d] = static_cast<int>(std::floor(span / per + 1e-9));
        if (strict && std::fabs(L.ncells[d] * per - span) > 1e-9 * span)
            throw std::invalid_argument("unfold: Omega is not a whole number of eps-cells (strict mode)");
    }
    L.nslabs = static_cast<int>(std::ceil(g.T / pert - 1e-9));
    return L;
}

}  // namespace detail

// T_eps(w)(xi, slab, y, tau) = w(eps^a(xi + y), eps^b(slab + tau)); exact re-indexing
// on commensurate grids.
inline UnfoldedField unfold(const SpaceTimeField& w, const MacroGrid& g, double eps, double alpha, double beta,
                            const CellGrid& cg, bool strict = true) {
    detail::UnfoldLayout L = detail::commensurate_layout(g, eps, alpha, beta, cg, strict);
    UnfoldedField out;
    out.dim = g.dim;
    out.eps = eps;
    out.alpha = alpha;
    out.beta = beta;
    out.ncells = L.ncells;
    out.nslabs = L.nslabs;
    out.ny = cg.ny;
    out.ntau = cg.ntau;
    out.cell_inside.assign(out.cells_total(), 1);
    out.slab_inside.assign(out.nslabs, 0);
    const double pert = std::pow(eps, beta);
    for (int s = 0; s < out.nslabs; ++s) out.slab_inside[s] = (s + 1) * pert <= g.T + 1e-12 ? 1 : 0;
    out.data.assign(static_cast<size_t>(out.cells_total()) * out.nslabs * out.qnodes(), 0.0);
    const int levels = w.nlevels;
    for (int cell = 0; cell < out.cells_total(); ++cell) {
        const int c1 = g.dim == 1 ? cell : cell % out.ncells[0];
        const int c2 = g.dim == 1 ? 0 : cell / out.ncells[0];
        for (int s = 0; s < out.nslabs; ++s) {
            if (!out.inside(cell, s)) continue;  // extension by zero outside Lambda_eps
            for (int iy = 0; iy < out.ynodes(); ++iy) {
                const int j1 = g.dim == 1 ? iy : iy % cg.ny;
                const int j2 = g.dim == 1 ? 0 : iy / cg.ny;
                const int n1 = c1 * L.px + j1;
                const int n2 = c2 * L.px + j2;
                if (n1 >= g.nx || (g.dim == 2 && n2 >= g.nx)) continue;
                const int node = g.dim == 1 ? n1 : n1 + g.nx * n2;
                for (int it = 0; it < cg.ntau; ++it) {
                    const int level = s * L.pt + it;
                    if (level >= levels) continue;
                    out.at(cell, s, iy, it) = w.at(level, node);
                }
            }
        }
    }
    return out;
}

// Per-cell space-time means M_eps(w); constant within each cell, zero outside Lambda_eps.
struct CellAverages {
    int dim = 1;
    std::array<int, 2> ncells{0, 0};
    int nslabs = 0;
    std::vector<double> value;  // cell*nslabs + slab
    std::vector<uint8_t> inside;
    double at(int cell, int slab) const { return value[static_cast<size_t>(cell) * nslabs + slab]; }
};

inline CellAverages cell_average(const SpaceTimeField& w, const MacroGrid& g, double eps, double alpha, double beta,
                                 const CellGrid& cg, bool strict = true) {
    UnfoldedField T = unfold(w, g, eps, alpha, beta, cg, strict);
    CellAverages M;
    M.dim = T.dim;
    M.ncells = T.ncells;
    M.nslabs = T.nslabs;
    M.value.assign(static_cast<size_t>(T.cells_total()) * T.nslabs, 0.0);
    M.inside.assign(M.value.size(), 0);
    const double invQ = 1.0 / T.qnodes();
    for (int cell = 0; cell < T.cells_total(); ++cell)
        for (int s = 0; s < T.nslabs; ++s) {
            if (!T.inside(cell, s)) continue;
            double acc = 0.0;
            for (int iy = 0; iy < T.ynodes(); ++iy)
                for (int it = 0; it < T.ntau; ++it) acc += T.at(cell, s, iy, it);
            M.value[static_cast<size_t>(cell) * T.nslabs + s] = acc * invQ;
            M.inside[static_cast<size_t>(cell) * T.nslabs + s] = 1;
        }
    return M;
}

// Z_eps = T_eps(w) - M_eps(w) pointwise.
inline UnfoldedField oscillation(const SpaceTimeField& w, const MacroGrid& g, double eps, double alpha, double beta,
                                 const CellGrid& cg, bool strict = true) {
    UnfoldedField Z = unfold(w, g, eps, alpha, beta, cg, strict);
    const double invQ = 1.0 / Z.qnodes();
    for (int cell = 0; cell < Z.cells_total(); ++cell)
        for (int s = 0; s < Z.nslabs; ++s) {
            if (!Z.inside(cell, s)) continue;
            double mean = 0.0;
            for (int iy = 0; iy < Z.ynodes(); ++iy)
                for (int it = 0; it < Z.ntau; ++it) mean += Z.at(cell, s, iy, it);
            mean *= invQ;
            for (int iy = 0; iy < Z.ynodes(); ++iy)
                for (int it = 0; it < Z.ntau; ++it) Z.at(cell, s, iy, it) -= mean;
        }
    return Z;
}

// M_S: tau-mean per y-node of a field on Q.
inline CellField micro_time_average(const CellField& f, const CellGrid& g) {
    if (f.ntau != g.ntau) throw std::invalid_argument("micro_time_average: field must live on Q");
    CellField out = CellField::make(g, CellDomain::Y, f.kind);
    out.comps = f.comps;
    out.data.assign(static_cast<size_t>(out.ynodes()) * out.comps, 0.0);
    for (int iy = 0; iy < f.ynodes(); ++iy)
        for (int c = 0; c < f.comps; ++c) {
            double acc = 0.0;
            for (int it = 0; it < g.ntau; ++it) acc += f.at(iy, it, c);
            out.at(iy, 0, c) = acc / g.ntau;
        }
    return out;
}

// sum over Lambda_eps of the Q-averaged square; equals the plain grid sum on
// commensurate grids (unfolding is a permutation of interior nodes)
inline double unfolded_square_sum(const UnfoldedField& T) {
    double acc = 0.0;
    const double invQ = 1.0 / T.qnodes();
    for (int cell = 0; cell < T.cells_total(); ++cell)
        for (int s = 0; s < T.nslabs; ++s) {
            if (!T.inside(cell, s)) continue;
            for (int iy = 0; iy < T.ynodes(); ++iy)
                for (int it = 0; it < T.ntau; ++it) {
                    const double v = T.at(cell, s, iy, it);
                    acc += v * v * invQ;
                }
        }
    return acc;
}

inline void write_unfolded_csv(const std::string& path, const UnfoldedField& T, const CellGrid& cg) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.precision(17);
    os << (T.dim == 2 ? "xi1,xi2,slab,y1,y2,tau,value\n" : "xi,slab,y1,tau,value\n");
    for (int cell = 0; cell < T.cells_total(); ++cell)
        for (int s = 0; s < T.nslabs; ++s)
            for (int iy = 0; iy < T.ynodes(); ++iy)
                for (int it = 0; it < T.ntau; ++it) {
                    if (T.dim == 2)
                        os << cell % T.ncells[0] << "," << cell / T.ncells[0] << ",";
                    else
                        os << cell << ",";
                    os << s << ",";
                    if (T.dim == 2)
                        os << cg.ycoord(iy % cg.ny) << "," << cg.ycoord(iy / cg.ny) << ",";
                    else
                        os << cg.ycoord(iy) << ",";
                    os << cg.taucoord(it) << "," << T.at(cell, s, iy, it) << "\n";
                }
}

}  // namespace homogfp

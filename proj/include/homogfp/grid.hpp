#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace homogfp {

// Periodic tensor grid on the microscopic cell Q = Y x S, Y = (0,1)^n, S = (0,1).
// Node 0 is identified with node 1 of the periodic interval; no duplicated endpoint.
struct CellGrid {
    int dim = 1;   // spatial dimension n, 1 or 2
    int ny = 4;    // nodes per y-direction
    int ntau = 4;  // nodes in tau
    double hy = 0.25;
    double htau = 0.25;

    int ynodes() const { return dim == 1 ? ny : ny * ny; }
    int nodes() const { return ynodes() * ntau; }

    // flatten a y multi-index
    int yindex(int i1, int i2 = 0) const { return dim == 1 ? i1 : i1 + ny * i2; }
    double ycoord(int i) const { return i * hy; }
    double taucoord(int m) const { return m * htau; }
    int wrap_y(int i) const { int r = i % ny; return r < 0 ? r + ny : r; }
    int wrap_tau(int m) const { int r = m % ntau; return r < 0 ? r + ntau : r; }
};

inline CellGrid build_cell_grid(int dim, int ny, int ntau) {
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("build_cell_grid: dimension must be 1 or 2, got " + std::to_string(dim));
    if (ny < 4 || ntau < 4)
        throw std::invalid_argument("build_cell_grid: ny and ntau must be >= 4");
    CellGrid g;
    g.dim = dim;
    g.ny = ny;
    g.ntau = ntau;
    g.hy = 1.0 / ny;
    g.htau = 1.0 / ntau;
    return g;
}

enum class FieldKind { Scalar, Vector, Matrix };

enum class CellDomain { Q, Y, S };

// Values indexed by (y-node(s), tau-node); periodic indexing semantics.
// A field on Y stores ntau = 1; a field on S stores a single y node.
struct CellField {
    FieldKind kind = FieldKind::Scalar;
    int dim = 1;
    int ny = 1;    // nodes per y-direction carried by this field
    int ntau = 1;  // tau nodes carried by this field
    int comps = 1;
    std::vector<double> data;

    int ynodes() const { return dim == 1 ? ny : ny * ny; }
    int size() const { return ynodes() * ntau; }

    double& at(int iy, int it, int c = 0) { return data[(static_cast<size_t>(iy) * ntau + it) * comps + c]; }
    double at(int iy, int it, int c = 0) const { return data[(static_cast<size_t>(iy) * ntau + it) * comps + c]; }

    static CellField make(const CellGrid& g, CellDomain dom, FieldKind kind = FieldKind::Scalar) {
        CellField f;
        f.kind = kind;
        f.dim = g.dim;
        f.comps = kind == FieldKind::Scalar ? 1 : (kind == FieldKind::Vector ? g.dim : g.dim * g.dim);
        switch (dom) {
            case CellDomain::Q: f.ny = g.ny; f.ntau = g.ntau; break;
            case CellDomain::Y: f.ny = g.ny; f.ntau = 1; break;
            case CellDomain::S: f.ny = 1; f.dim = 1; f.ntau = g.ntau; break;
        }
        f.data.assign(static_cast<size_t>(f.ynodes()) * f.ntau * f.comps, 0.0);
        return f;
    }
};

inline CellDomain field_domain(const CellField& f, const CellGrid& g) {
    if (f.ny == g.ny && f.ntau == g.ntau && f.dim == g.dim) return CellDomain::Q;
    if (f.ny == g.ny && f.ntau == 1 && f.dim == g.dim) return CellDomain::Y;
    if (f.ynodes() == 1 && f.ntau == g.ntau) return CellDomain::S;
    throw std::invalid_argument("cell field extent matches neither Q, Y nor S of the given grid");
}

// Node-average quadrature over the periodic cell; |Q| = |Y| = |S| = 1, so the
// midpoint rule is the plain node average.
inline double integrate_cell(const CellField& f, const CellGrid& g, CellDomain dom, int comp = 0) {
    CellDomain actual = field_domain(f, g);
    if (actual != dom) {
        // integrating a Q-field over Y or S is a different operation (see unfolding);
        // here the declared domain must match the field extent
        throw std::invalid_argument("integrate_cell: domain mismatch with field extent");
    }
    double s = 0.0;
    const int yn = f.ynodes();
    for (int iy = 0; iy < yn; ++iy)
        for (int it = 0; it < f.ntau; ++it) s += f.at(iy, it, comp);
    return s / (static_cast<double>(yn) * f.ntau);
}

// Central differences with periodic wraparound. Works on Q-fields and Y-fields.
inline CellField periodic_gradient(const CellField& f, const CellGrid& g) {
    if (f.kind != FieldKind::Scalar) throw std::invalid_argument("periodic_gradient: scalar field expected");
    if (f.ny != g.ny || f.dim != g.dim) throw std::invalid_argument("periodic_gradient: field/grid shape mismatch");
    CellField out;
    out.kind = FieldKind::Vector;
    out.dim = g.dim;
    out.ny = f.ny;
    out.ntau = f.ntau;
    out.comps = g.dim;
    out.data.assign(static_cast<size_t>(out.ynodes()) * out.ntau * out.comps, 0.0);
    const double inv2h = 1.0 / (2.0 * g.hy);
    for (int it = 0; it < f.ntau; ++it) {
        if (g.dim == 1) {
            for (int i = 0; i < g.ny; ++i) {
                const int ip = g.wrap_y(i + 1), im = g.wrap_y(i - 1);
                out.at(i, it, 0) = (f.at(ip, it) - f.at(im, it)) * inv2h;
            }
        } else {
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.ny; ++i) {
                    const int n = g.yindex(i, j);
                    out.at(n, it, 0) = (f.at(g.yindex(g.wrap_y(i + 1), j), it) - f.at(g.yindex(g.wrap_y(i - 1), j), it)) * inv2h;
                    out.at(n, it, 1) = (f.at(g.yindex(i, g.wrap_y(j + 1)), it) - f.at(g.yindex(i, g.wrap_y(j - 1)), it)) * inv2h;
                }
        }
    }
    return out;
}

// Central tau-derivative with periodic wraparound (Q-fields).
inline CellField periodic_tau_derivative(const CellField& f, const CellGrid& g) {
    if (f.ntau != g.ntau) throw std::invalid_argument("periodic_tau_derivative: field must live on Q");
    CellField out = f;
    const double inv2h = 1.0 / (2.0 * g.htau);
    for (int iy = 0; iy < f.ynodes(); ++iy)
        for (int it = 0; it < g.ntau; ++it)
            for (int c = 0; c < f.comps; ++c)
                out.at(iy, it, c) = (f.at(iy, g.wrap_tau(it + 1), c) - f.at(iy, g.wrap_tau(it - 1), c)) * inv2h;
    return out;
}

inline void write_cell_field_csv(const std::string& path, const CellField& f, const CellGrid& g) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.precision(17);
    const bool two = g.dim == 2 && f.ny == g.ny;
    os << (two ? "y1,y2,tau" : (f.ynodes() == 1 ? "tau" : "y1,tau"));
    for (int c = 0; c < f.comps; ++c) os << ",v" << c + 1;
    os << "\n";
    for (int iy = 0; iy < f.ynodes(); ++iy)
        for (int it = 0; it < f.ntau; ++it) {
            if (f.ynodes() > 1) {
                if (two)
                    os << g.ycoord(iy % g.ny) << "," << g.ycoord(iy / g.ny) << ",";
                else
                    os << g.ycoord(iy) << ",";
            }
            os << (f.ntau > 1 ? g.taucoord(it) : 0.0);
            for (int c = 0; c < f.comps; ++c) os << "," << f.at(iy, it, c);
            os << "\n";
        }
}

// Non-periodic tensor grid on Omega x (0,T); nodes include the Dirichlet boundary.
struct MacroGrid {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    int nx = 3;  // nodes per direction, boundary included
    int nt = 1;  // time steps; levels are 0..nt
    double T = 1.0;

    double hx(int d = 0) const { return (hi[d] - lo[d]) / (nx - 1); }
    double dt() const { return T / nt; }
    int xnodes() const { return dim == 1 ? nx : nx * nx; }
    int xindex(int i1, int i2 = 0) const { return dim == 1 ? i1 : i1 + nx * i2; }
    double xcoord(int i, int d = 0) const { return lo[d] + i * hx(d); }
    double tcoord(int m) const { return m * dt(); }
    bool on_boundary(int node) const {
        if (dim == 1) return node == 0 || node == nx - 1;
        const int i = node % nx, j = node / nx;
        return i == 0 || i == nx - 1 || j == 0 || j == nx - 1;
    }
};

inline MacroGrid build_macro_grid(int dim, std::array<double, 2> lo, std::array<double, 2> hi, int nx, int nt,
                                  double T) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("build_macro_grid: dimension must be 1 or 2");
    if (nx < 3) throw std::invalid_argument("build_macro_grid: nx must be >= 3");
    if (nt < 1 || T <= 0) throw std::invalid_argument("build_macro_grid: need nt >= 1 and T > 0");
    for (int d = 0; d < dim; ++d)
        if (!(hi[d] > lo[d])) throw std::invalid_argument("build_macro_grid: empty domain box");
    MacroGrid g;
    g.dim = dim;
    g.lo = lo;
    g.hi = hi;
    g.nx = nx;
    g.nt = nt;
    g.T = T;
    return g;
}

// Space-time scalar field on a MacroGrid, one slice per time level 0..nt.
struct SpaceTimeField {
    int xnodes = 0;
    int nlevels = 0;  // nt + 1
    std::vector<double> data;

    static SpaceTimeField make(const MacroGrid& g) {
        SpaceTimeField f;
        f.xnodes = g.xnodes();
        f.nlevels = g.nt + 1;
        f.data.assign(static_cast<size_t>(f.xnodes) * f.nlevels, 0.0);
        return f;
    }
    double& at(int level, int node) { return data[static_cast<size_t>(level) * xnodes + node]; }
    double at(int level, int node) const { return data[static_cast<size_t>(level) * xnodes + node]; }
    const double* level(int m) const { return data.data() + static_cast<size_t>(m) * xnodes; }
    double* level(int m) { return data.data() + static_cast<size_t>(m) * xnodes; }
};

// Discrete L2(Omega_T) norm, trapezoidal weights in t and in each x-direction.
inline double l2_norm_spacetime(const SpaceTimeField& f, const MacroGrid& g) {
    double acc = 0.0;
    const double cell = (g.dim == 1 ? g.hx(0) : g.hx(0) * g.hx(1)) * g.dt();
    for (int m = 0; m < f.nlevels; ++m) {
        const double wt = (m == 0 || m == f.nlevels - 1) ? 0.5 : 1.0;
        for (int n = 0; n < f.xnodes; ++n) {
            double wx = 1.0;
            const int i = g.dim == 1 ? n : n % g.nx;
            if (i == 0 || i == g.nx - 1) wx *= 0.5;
            if (g.dim == 2) {
                const int j = n / g.nx;
                if (j == 0 || j == g.nx - 1) wx *= 0.5;
            }
            const double v = f.at(m, n);
            acc += wt * wx * v * v;
        }
    }
    return std::sqrt(acc * cell);
}

inline void write_spacetime_csv(const std::string& path, const MacroGrid& g, const SpaceTimeField& a,
                                const SpaceTimeField* b = nullptr, const char* aname = "v",
                                const char* bname = "u") {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.precision(17);
    os << (g.dim == 2 ? "x1,x2,t," : "x,t,") << aname;
    if (b) os << "," << bname;
    os << "\n";
    for (int m = 0; m < a.nlevels; ++m)
        for (int n = 0; n < a.xnodes; ++n) {
            if (g.dim == 2)
                os << g.xcoord(n % g.nx, 0) << "," << g.xcoord(n / g.nx, 1) << ",";
            else
                os << g.xcoord(n) << ",";
            os << g.tcoord(m) << "," << a.at(m, n);
            if (b) os << "," << b->at(m, n);
            os << "\n";
        }
}

}  // namespace homogfp

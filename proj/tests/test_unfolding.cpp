#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "homogfp/unfolding.hpp"

using namespace homogfp;

namespace {
constexpr double kPi = 3.14159265358979323846;

// a commensurate micro-style grid: eps-cells of p nodes, q steps per slab
struct Setup {
    MacroGrid g;
    CellGrid cg;
    double eps, alpha, beta;
};

Setup make_setup(int cells = 4, int p = 8, int slabs = 4, int q = 8) {
    Setup s;
    s.eps = 1.0 / cells;
    s.alpha = 1.0;
    s.beta = 2.0;
    const double pert = std::pow(s.eps, s.beta);
    s.g = build_macro_grid(1, {0, 0}, {1, 1}, cells * p + 1, slabs * q, slabs * pert);
    s.cg = build_cell_grid(1, p, q);
    return s;
}
}  // namespace

TEST_CASE("unfolding of constants and pure oscillations") {
    Setup s = make_setup();
    SECTION("constant field unfolds to the constant on Lambda_eps, zero outside") {
        SpaceTimeField w = SpaceTimeField::make(s.g);
        for (auto& v : w.data) v = 5.0;
        UnfoldedField T = unfold(w, s.g, s.eps, s.alpha, s.beta, s.cg);
        for (int cell = 0; cell < T.cells_total(); ++cell)
            for (int sl = 0; sl < T.nslabs; ++sl)
                for (int iy = 0; iy < T.ynodes(); ++iy)
                    for (int it = 0; it < T.ntau; ++it)
                        CHECK(T.at(cell, sl, iy, it) == (T.inside(cell, sl) ? 5.0 : 0.0));
    }
    SECTION("w(x) = phi(x/eps^alpha) unfolds to phi(y) independent of the cell") {
        SpaceTimeField w = SpaceTimeField::make(s.g);
        auto phi = [](double y) { return 2.0 + std::cos(2.0 * kPi * y); };
        for (int m = 0; m <= s.g.nt; ++m)
            for (int n = 0; n < s.g.nx; ++n) {
                const double yy = s.g.xcoord(n) / s.eps;
                w.at(m, n) = phi(yy - std::floor(yy));
            }
        UnfoldedField T = unfold(w, s.g, s.eps, s.alpha, s.beta, s.cg);
        for (int cell = 0; cell < T.cells_total(); ++cell)
            for (int sl = 0; sl < T.nslabs; ++sl) {
                if (!T.inside(cell, sl)) continue;
                for (int iy = 0; iy < T.ynodes(); ++iy)
                    for (int it = 0; it < T.ntau; ++it)
                        CHECK(T.at(cell, sl, iy, it) == Catch::Approx(phi(s.cg.ycoord(iy))).margin(1e-13));
            }
    }
}

TEST_CASE("multiplicativity T(w1 w2) = T(w1) T(w2) holds exactly") {
    Setup s = make_setup();
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    SpaceTimeField w1 = SpaceTimeField::make(s.g), w2 = SpaceTimeField::make(s.g), w12 = SpaceTimeField::make(s.g);
    for (size_t i = 0; i < w1.data.size(); ++i) {
        w1.data[i] = dist(rng);
        w2.data[i] = dist(rng);
        w12.data[i] = w1.data[i] * w2.data[i];
    }
    UnfoldedField T1 = unfold(w1, s.g, s.eps, s.alpha, s.beta, s.cg);
    UnfoldedField T2 = unfold(w2, s.g, s.eps, s.alpha, s.beta, s.cg);
    UnfoldedField T12 = unfold(w12, s.g, s.eps, s.alpha, s.beta, s.cg);
    double worst = 0.0;
    for (size_t i = 0; i < T12.data.size(); ++i) worst = std::max(worst, std::fabs(T12.data[i] - T1.data[i] * T2.data[i]));
    CHECK(worst <= 1e-14);
}

TEST_CASE("M_eps equals the Q-integral of T_eps exactly on commensurate grids") {
    Setup s = make_setup();
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    SpaceTimeField w = SpaceTimeField::make(s.g);
    for (auto& v : w.data) v = dist(rng);
    UnfoldedField T = unfold(w, s.g, s.eps, s.alpha, s.beta, s.cg);
    CellAverages M = cell_average(w, s.g, s.eps, s.alpha, s.beta, s.cg);
    for (int cell = 0; cell < T.cells_total(); ++cell)
        for (int sl = 0; sl < T.nslabs; ++sl) {
            double acc = 0.0;
            for (int iy = 0; iy < T.ynodes(); ++iy)
                for (int it = 0; it < T.ntau; ++it) acc += T.at(cell, sl, iy, it);
            acc /= T.qnodes();
            CHECK(M.at(cell, sl) == Catch::Approx(acc).margin(1e-15));
        }
}

TEST_CASE("zero-mean oscillations average to zero exactly") {
    Setup s = make_setup(4, 8, 4, 8);
    SpaceTimeField w = SpaceTimeField::make(s.g);
    for (int m = 0; m <= s.g.nt; ++m)
        for (int n = 0; n < s.g.nx; ++n) {
            const double yy = s.g.xcoord(n) / s.eps;
            w.at(m, n) = std::sin(2.0 * kPi * (yy - std::floor(yy)));  // zero mean on the uniform y-grid
        }
    CellAverages M = cell_average(w, s.g, s.eps, s.alpha, s.beta, s.cg);
    for (double v : M.value) CHECK(std::fabs(v) < 1e-14);
}

TEST_CASE("oscillation operator removes the cell mean exactly") {
    Setup s = make_setup();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    SpaceTimeField w = SpaceTimeField::make(s.g);
    for (auto& v : w.data) v = dist(rng);
    UnfoldedField Z = oscillation(w, s.g, s.eps, s.alpha, s.beta, s.cg);
    for (int cell = 0; cell < Z.cells_total(); ++cell)
        for (int sl = 0; sl < Z.nslabs; ++sl) {
            double mean = 0.0;
            for (int iy = 0; iy < Z.ynodes(); ++iy)
                for (int it = 0; it < Z.ntau; ++it) mean += Z.at(cell, sl, iy, it);
            CHECK(std::fabs(mean / Z.qnodes()) < 1e-15);
        }
    SpaceTimeField c = SpaceTimeField::make(s.g);
    for (auto& v : c.data) v = 3.25;
    UnfoldedField Zc = oscillation(c, s.g, s.eps, s.alpha, s.beta, s.cg);
    for (double v : Zc.data) CHECK(v == 0.0);
}

TEST_CASE("isometry on interior cells is exact") {
    Setup s = make_setup();
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    SpaceTimeField w = SpaceTimeField::make(s.g);
    for (auto& v : w.data) v = dist(rng);
    UnfoldedField T = unfold(w, s.g, s.eps, s.alpha, s.beta, s.cg);
    // plain grid sum over the nodes that belong to Lambda_eps
    double direct = 0.0;
    const int p = s.cg.ny, q = s.cg.ntau;
    for (int cell = 0; cell < T.cells_total(); ++cell)
        for (int sl = 0; sl < T.nslabs; ++sl) {
            if (!T.inside(cell, sl)) continue;
            for (int iy = 0; iy < p; ++iy)
                for (int it = 0; it < q; ++it) {
                    const double v = w.at(sl * q + it, cell * p + iy);
                    direct += v * v / (p * q);
                }
        }
    CHECK(unfolded_square_sum(T) == Catch::Approx(direct).margin(1e-12));
}

TEST_CASE("strict mode rejects non-commensurate grids; micro time average") {
    Setup s = make_setup();
    MacroGrid off = s.g;
    off.nx = s.g.nx + 1;  // spacing no longer divides the cell
    SpaceTimeField w = SpaceTimeField::make(off);
    CHECK_THROWS_AS(unfold(w, off, s.eps, s.alpha, s.beta, s.cg), std::invalid_argument);

    CellGrid cg = build_cell_grid(1, 8, 16);
    SECTION("tau-independent field is its own average") {
        CellField f = CellField::make(cg, CellDomain::Q);
        for (int n = 0; n < cg.ny; ++n)
            for (int it = 0; it < cg.ntau; ++it) f.at(n, it) = std::cos(2.0 * kPi * cg.ycoord(n));
        CellField a = micro_time_average(f, cg);
        for (int n = 0; n < cg.ny; ++n) CHECK(a.at(n, 0) == Catch::Approx(std::cos(2.0 * kPi * cg.ycoord(n))));
    }
    SECTION("b2 = 1 + 0.5 sin averages to 1 exactly on the uniform tau-grid") {
        CellField f = CellField::make(cg, CellDomain::Q);
        for (int n = 0; n < cg.ny; ++n)
            for (int it = 0; it < cg.ntau; ++it) f.at(n, it) = 1.0 + 0.5 * std::sin(2.0 * kPi * cg.taucoord(it));
        CellField a = micro_time_average(f, cg);
        for (int n = 0; n < cg.ny; ++n) CHECK(a.at(n, 0) == Catch::Approx(1.0).margin(1e-15));
    }
    SECTION("separable factors average to the product of 1D averages") {
        CellField f = CellField::make(cg, CellDomain::Q);
        auto fy = [](double y) { return 2.0 + std::cos(2.0 * kPi * y); };
        auto ft = [](double t) { return 1.0 + 0.25 * std::cos(2.0 * kPi * t); };
        double ft_mean = 0.0;
        for (int it = 0; it < cg.ntau; ++it) ft_mean += ft(cg.taucoord(it)) / cg.ntau;
        for (int n = 0; n < cg.ny; ++n)
            for (int it = 0; it < cg.ntau; ++it) f.at(n, it) = fy(cg.ycoord(n)) * ft(cg.taucoord(it));
        CellField a = micro_time_average(f, cg);
        for (int n = 0; n < cg.ny; ++n)
            CHECK(a.at(n, 0) == Catch::Approx(fy(cg.ycoord(n)) * ft_mean).margin(1e-14));
    }
}

TEST_CASE("unfolding in 2D is a permutation as well") {
    const int cells = 2, p = 4, slabs = 2, q = 4;
    const double eps = 0.5, alpha = 1.0, beta = 2.0;
    const double pert = std::pow(eps, beta);
    MacroGrid g = build_macro_grid(2, {0, 0}, {1, 1}, cells * p + 1, slabs * q, slabs * pert);
    CellGrid cg = build_cell_grid(2, p, q);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    SpaceTimeField w = SpaceTimeField::make(g);
    for (auto& v : w.data) v = dist(rng);
    UnfoldedField T = unfold(w, g, eps, alpha, beta, cg);
    double direct = 0.0;
    for (int c2 = 0; c2 < cells; ++c2)
        for (int c1 = 0; c1 < cells; ++c1)
            for (int sl = 0; sl < slabs; ++sl)
                for (int j2 = 0; j2 < p; ++j2)
                    for (int j1 = 0; j1 < p; ++j1)
                        for (int it = 0; it < q; ++it) {
                            const double v = w.at(sl * q + it, (c1 * p + j1) + g.nx * (c2 * p + j2));
                            direct += v * v / (p * p * q);
                        }
    CHECK(unfolded_square_sum(T) == Catch::Approx(direct).margin(1e-12));
}

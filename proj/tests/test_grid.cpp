#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "homogfp/grid.hpp"

using namespace homogfp;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt3 = 0.5773502691896258;  // high-resolution quadrature of 1/(2+sin 2*pi*y)

CellField sampled_y(const CellGrid& g, double (*f)(double)) {
    CellField out = CellField::make(g, CellDomain::Y);
    for (int i = 0; i < g.ny; ++i) out.at(i, 0) = f(g.ycoord(i));
    return out;
}
}  // namespace

TEST_CASE("build_cell_grid spacing and node counts") {
    CellGrid g = build_cell_grid(1, 8, 8);
    CHECK(g.hy == Catch::Approx(0.125));
    CHECK(g.htau == Catch::Approx(0.125));
    CellGrid g2 = build_cell_grid(2, 16, 4);
    CHECK(g2.nodes() == 1024);
    CHECK_THROWS_AS(build_cell_grid(3, 8, 8), std::invalid_argument);
    CHECK_THROWS_AS(build_cell_grid(1, 3, 8), std::invalid_argument);
    CHECK_THROWS_AS(build_cell_grid(1, 8, 2), std::invalid_argument);
}

TEST_CASE("integrate_cell on Q, Y and S") {
    CellGrid g = build_cell_grid(1, 16, 8);
    CellField c = CellField::make(g, CellDomain::Q);
    for (auto& v : c.data) v = 3.0;
    CHECK(integrate_cell(c, g, CellDomain::Q) == Catch::Approx(3.0));

    CellField s = sampled_y(g, [](double y) { return std::sin(2.0 * kPi * y); });
    CHECK(std::fabs(integrate_cell(s, g, CellDomain::Y)) < 1e-12);

    CellGrid fine = build_cell_grid(1, 256, 8);
    CellField r = sampled_y(fine, [](double y) { return 1.0 / (2.0 + std::sin(2.0 * kPi * y)); });
    CHECK(integrate_cell(r, fine, CellDomain::Y) == Catch::Approx(kInvSqrt3).margin(1e-6));

    CHECK_THROWS_AS(integrate_cell(s, g, CellDomain::Q), std::invalid_argument);
}

TEST_CASE("periodic_gradient basics") {
    CellGrid g = build_cell_grid(1, 128, 4);
    CellField c = CellField::make(g, CellDomain::Y);
    for (auto& v : c.data) v = 7.5;
    CellField gc = periodic_gradient(c, g);
    for (double v : gc.data) CHECK(v == 0.0);

    CellField s = sampled_y(g, [](double y) { return std::sin(2.0 * kPi * y); });
    CellField gs = periodic_gradient(s, g);
    double maxerr = 0.0;
    for (int i = 0; i < g.ny; ++i)
        maxerr = std::max(maxerr, std::fabs(gs.at(i, 0) - 2.0 * kPi * std::cos(2.0 * kPi * g.ycoord(i))));
    CHECK(maxerr < 4.0 * kPi * kPi * kPi * g.hy * g.hy);  // O(hy^2)
}

TEST_CASE("gradient of any periodic field has exactly zero discrete mean") {
    std::mt19937 rng(20240811);
    std::uniform_real_distribution<double> amp(-2.0, 2.0);
    for (int dim : {1, 2}) {
        CellGrid g = build_cell_grid(dim, 24, 4);
        for (int rep = 0; rep < 20; ++rep) {
            CellField f = CellField::make(g, CellDomain::Y);
            for (auto& v : f.data) v = amp(rng);
            CellField gf = periodic_gradient(f, g);
            for (int d = 0; d < dim; ++d) {
                double mean = 0.0;
                for (int n = 0; n < g.ynodes(); ++n) mean += gf.at(n, 0, d);
                CHECK(std::fabs(mean / g.ynodes()) < 1e-14);  // telescoping, up to rounding of the summands
            }
        }
    }
}

TEST_CASE("quadrature is linear and monotone") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> amp(0.0, 3.0);
    CellGrid g = build_cell_grid(1, 16, 16);
    CellField a = CellField::make(g, CellDomain::Q), b = CellField::make(g, CellDomain::Q);
    for (auto& v : a.data) v = amp(rng);
    for (auto& v : b.data) v = amp(rng);
    CellField sum = a;
    for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] = 2.0 * a.data[i] - 0.5 * b.data[i];
    const double ia = integrate_cell(a, g, CellDomain::Q), ib = integrate_cell(b, g, CellDomain::Q);
    CHECK(integrate_cell(sum, g, CellDomain::Q) == Catch::Approx(2.0 * ia - 0.5 * ib).margin(1e-14));
    CHECK(ia >= 0.0);
}

TEST_CASE("quadrature of smooth periodic fields converges at order >= 2") {
    auto value = [](int ny) {
        CellGrid g = build_cell_grid(1, ny, 4);
        CellField f = sampled_y(g, [](double y) { return 1.0 / (2.0 + std::sin(2.0 * kPi * y) * 0.99) ; });
        return integrate_cell(f, g, CellDomain::Y);
    };
    // Richardson ratio on a smooth periodic integrand sampled coarsely enough
    // that the error is measurable
    const double e1 = std::fabs(value(6) - value(3072));
    const double e2 = std::fabs(value(12) - value(3072));
    CHECK(e1 / e2 >= 4.0);  // order >= 2
}

TEST_CASE("cell field CSV has header and one row per node") {
    CellGrid g = build_cell_grid(1, 4, 4);
    CellField f = CellField::make(g, CellDomain::Q);
    const std::string path = "grid_field.csv";
    write_cell_field_csv(path, f, g);
    std::ifstream is(path);
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == std::string("y1,tau,v1"));
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == g.nodes());
}

TEST_CASE("macro grid invariants") {
    CHECK_THROWS_AS(build_macro_grid(1, {0, 0}, {1, 1}, 2, 4, 1.0), std::invalid_argument);
    MacroGrid g = build_macro_grid(1, {0, 0}, {1, 1}, 5, 4, 2.0);
    CHECK(g.hx(0) == Catch::Approx(0.25));
    CHECK(g.tcoord(4) == Catch::Approx(2.0));
    CHECK(g.on_boundary(0));
    CHECK(g.on_boundary(4));
    CHECK(!g.on_boundary(2));
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "homogfp/coefficients.hpp"
#include "homogfp/config.hpp"

using namespace homogfp;

namespace {
constexpr double kPi = 3.14159265358979323846;

CoefficientSet demo_b1_sin(double amplitude = 1.0) {
    CoefficientSet c = make_constant_coefficients(1);
    c.b1 = [amplitude](const EvalPoint& p) { return 2.0 + amplitude * std::sin(2.0 * kPi * p.y[0]); };
    return c;
}

std::vector<std::pair<std::array<double, 2>, double>> probes() {
    return {{{0.0, 0.0}, 0.0}, {{0.5, 0.5}, 0.5}, {{1.0, 1.0}, 1.0}};
}
}  // namespace

TEST_CASE("validate_bounds pass and fail cases") {
    CellGrid g = build_cell_grid(1, 32, 16);
    CoefficientSet ones = make_constant_coefficients(1);
    ones.bound = 2.0;
    ValidationReport r = validate_bounds(ones, g, probes());
    CHECK(r.pass);
    CHECK(r.factor_ranges["a1"].min == Catch::Approx(1.0));
    CHECK(r.factor_ranges["a1"].max == Catch::Approx(1.0));
    CHECK(r.rayleigh.min == Catch::Approx(1.0));

    CoefficientSet c = demo_b1_sin();
    c.bound = 2.0;
    ValidationReport bad = validate_bounds(c, g, probes());
    CHECK_FALSE(bad.pass);  // max b1 = 3 above C = 2

    c.bound = 3.0;
    ValidationReport ok = validate_bounds(c, g, probes());
    CHECK(ok.pass);
    CHECK(ok.factor_ranges["b1"].min == Catch::Approx(1.0).margin(1e-3));
    CHECK(ok.factor_ranges["b1"].max == Catch::Approx(3.0).margin(1e-3));
}

TEST_CASE("default bound is derived from the sampled extremes") {
    CellGrid g = build_cell_grid(1, 64, 8);
    CoefficientSet c = demo_b1_sin();
    ValidationReport r = validate_bounds(c, g, probes());
    CHECK(r.bound_derived);
    CHECK(r.pass);
    CHECK(r.bound_used >= 3.0);
}

TEST_CASE("sample_on_cell tabulates the factors") {
    CellGrid g = build_cell_grid(1, 16, 8);
    CoefficientSet c = make_constant_coefficients(1);
    c.a1 = [](const EvalPoint& p) { return (1.0 + p.x[0]) * (2.0 + std::cos(2.0 * kPi * p.y[0])); };
    c.x_dependent = true;
    SampledCell s = sample_on_cell(c, {1.0, 0.0}, 0.0, g);
    for (int i = 0; i < g.ny; ++i)
        CHECK(s.a1_y[i] == Catch::Approx(2.0 * (2.0 + std::cos(2.0 * kPi * g.ycoord(i)))));
    for (int i = 0; i < g.ny; ++i)
        for (int it = 0; it < g.ntau; ++it) CHECK(s.Bval(g, i, it, 0, 0) == 1.0);
}

TEST_CASE("periodicity of built-in families") {
    Scenario sc = parse_scenario(json::parse(R"cfg({
      "dimension": 1,
      "coefficients": {
        "a1": {"family":"cos","offset":2.0,"amplitude":0.5},
        "a2": {"family":"constant","value":1.0},
        "b1": {"family":"piecewise","offset":2.0,"amplitude":0.5},
        "b2": {"family":"sin","offset":1.0,"amplitude":0.25},
        "b":  {"family":"custom-expression","expr":"cos(2*pi*y1)*sin(2*pi*tau)"},
        "B":  {"type":"scalar","factor":{"family":"constant","value":1.0}}
      }})cfg"));
    const CoefficientSet& c = sc.coefficients;
    for (double y : {0.1, 0.33, 0.77}) {
        EvalPoint p, q;
        p.y[0] = y;
        q.y[0] = y + 1.0;
        p.tau = 0.3;
        q.tau = 1.3;
        CHECK(c.a1(p) == Catch::Approx(c.a1(q)).margin(1e-14));
        CHECK(c.b1(p) == Catch::Approx(c.b1(q)).margin(1e-14));
        CHECK(c.b2(p) == Catch::Approx(c.b2(q)).margin(1e-14));
        CHECK(c.eval_b(p) == Catch::Approx(c.eval_b(q)).margin(1e-14));
    }
}

TEST_CASE("macro_derivatives: exact zeros and FD accuracy") {
    CellGrid g = build_cell_grid(1, 8, 32);
    MacroGrid dom = build_macro_grid(1, {0, 0}, {2, 1}, 9, 8, 1.0);
    CoefficientSet c = make_constant_coefficients(1);
    MacroDerivTables d0 = macro_derivatives(c, {0.5, 0.0}, 0.2, g, dom);
    for (double v : d0.dx_b2[0]) CHECK(v == 0.0);
    for (double v : d0.dt_inv_b1) CHECK(v == 0.0);

    // b2 = (1+x)(1 + 0.5 sin 2 pi tau): analytic d b2/dx = 1 + 0.5 sin 2 pi tau
    c.b2 = [](const EvalPoint& p) { return (1.0 + p.x[0]) * (1.0 + 0.5 * std::sin(2.0 * kPi * p.tau)); };
    c.x_dependent = true;
    c.deriv.hx = 1e-4 * 2.0;
    MacroDerivTables d = macro_derivatives(c, {0.5, 0.0}, 0.0, g, dom);
    for (int it = 0; it < g.ntau; ++it) {
        const double exact = 1.0 + 0.5 * std::sin(2.0 * kPi * g.taucoord(it));
        CHECK(d.dx_b2[0][it] == Catch::Approx(exact).margin(1e-7));
    }
    CHECK_FALSE(d.one_sided);

    // near the boundary the one-sided fallback is applied and flagged
    MacroDerivTables db = macro_derivatives(c, {0.0, 0.0}, 0.0, g, dom);
    CHECK(db.one_sided);
    CHECK(db.dx_b2[0][0] == Catch::Approx(1.0).margin(1e-6));

    // t-dependent b1
    CoefficientSet ct = make_constant_coefficients(1);
    ct.b1 = [](const EvalPoint& p) { return 1.0 + 0.5 * p.t; };
    ct.t_dependent = true;
    ct.deriv.ht = 1e-4;
    MacroDerivTables dt = macro_derivatives(ct, {0.5, 0.0}, 0.4, g, dom);
    const double exact = -0.5 / ((1.0 + 0.2) * (1.0 + 0.2));
    CHECK(dt.dt_inv_b1[0] == Catch::Approx(exact).margin(1e-9));
}

TEST_CASE("to_general_form maps the weakly non-product data") {
    CellGrid g = build_cell_grid(1, 32, 32);
    CoefficientSet c = make_constant_coefficients(1);
    SECTION("b = 0 gives c^eps = b1 b2") {
        c.b1 = [](const EvalPoint& p) { return 2.0 + std::sin(2.0 * kPi * p.y[0]); };
        EpsilonRealization er = to_general_form(c, 0.5, probes(), g);
        CHECK(er.c({0.25, 0.0}, 0.0) == Catch::Approx(2.0 + std::sin(2.0 * kPi * 0.5)));
        CHECK(er.a({0.25, 0.0}, 0.0) == Catch::Approx(1.0));
    }
    SECTION("constant b shifts c^eps by eps b") {
        c.b = [](const EvalPoint&) { return 1.0; };
        EpsilonRealization er = to_general_form(c, 0.1, probes(), g);
        CHECK(er.c({0.3, 0.0}, 0.7) == Catch::Approx(1.1));
    }
    SECTION("eps too large for positivity is rejected") {
        c.b = [](const EvalPoint&) { return -1.5; };
        CHECK_THROWS_AS(to_general_form(c, 0.9, probes(), g), std::invalid_argument);
    }
}

TEST_CASE("pure Fick data reduces to c^eps = 1") {
    CellGrid g = build_cell_grid(1, 16, 16);
    CoefficientSet c = make_constant_coefficients(1);
    EpsilonRealization er = to_general_form(c, 0.25, probes(), g);
    for (double x : {0.1, 0.6, 0.9}) CHECK(er.c({x, 0.0}, 0.4) == Catch::Approx(1.0));
}

TEST_CASE("config errors name the offending key") {
    json bad = json::parse(R"cfg({"dimension":1,"coefficients":{"a1":{"family":"nope"},
      "a2":{"family":"constant"},"b1":{"family":"constant"},"b2":{"family":"constant"},
      "B":{"type":"scalar","factor":{"family":"constant"}}}})cfg");
    try {
        parse_scenario(bad);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("coefficients.a1.family") != std::string::npos);
    }
    json bad2 = json::parse(R"cfg({"dimension":1,"coefficients":{"a2":{"family":"constant"},
      "b1":{"family":"constant"},"b2":{"family":"constant"},
      "B":{"type":"scalar","factor":{"family":"constant"}}}})cfg");
    CHECK_THROWS_AS(parse_scenario(bad2), ConfigError);
}

TEST_CASE("expression parser reports used variables and errors") {
    Expression e("sin(2*pi*y1)*(1+0.5*x1) + t^2");
    CHECK(e.uses_any({"x1"}));
    CHECK(e.uses_any({"t"}));
    CHECK_FALSE(e.uses_any({"tau"}));
    EvalPoint p;
    p.y[0] = 0.25;
    p.x[0] = 1.0;
    p.t = 2.0;
    CHECK(e(p) == Catch::Approx(std::sin(kPi / 2) * 1.5 + 4.0));
    CHECK_THROWS_AS(Expression("sin(2*pi*q)"), std::invalid_argument);
    CHECK_THROWS_AS(Expression("1 + * 2"), std::invalid_argument);
}

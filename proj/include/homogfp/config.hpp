#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "homogfp/cell_solver.hpp"
#include "homogfp/coefficients.hpp"
#include "homogfp/expr.hpp"
#include "homogfp/grid.hpp"

namespace homogfp {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error("config error at '" + key + "': " + what) {}
};

namespace detail {

inline double get_number(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(path + "." + key, "missing required number");
    if (!j[key].is_number()) throw ConfigError(path + "." + key, "expected a number");
    return j[key].get<double>();
}

inline double get_number_or(const json& j, const std::string& key, double dflt) {
    if (!j.contains(key)) return dflt;
    return j[key].get<double>();
}

// One scalar factor: micro basis (constant | sin | cos | piecewise | product |
// custom-expression) with amplitude/offset, optionally times a macro modulation in (x,t).
struct Factor {
    std::function<double(const EvalPoint&)> micro;
    std::shared_ptr<Expression> macro;  // multiplicative, may be null
    bool uses_x = false, uses_t = false;

    double operator()(const EvalPoint& p) const {
        double v = micro(p);
        if (macro) v *= (*macro)(p);
        return v;
    }
};

inline Factor parse_factor(const json& j, const std::string& path, const std::string& default_var) {
    if (!j.is_object()) throw ConfigError(path, "expected an object with a 'family' key");
    if (!j.contains("family")) throw ConfigError(path + ".family", "missing factor family");
    const std::string fam = j["family"].get<std::string>();
    Factor f;
    auto pick_var = [&](const std::string& v) -> std::function<double(const EvalPoint&)> {
        if (v == "y1" || v == "y") return [](const EvalPoint& p) { return p.y[0]; };
        if (v == "y2") return [](const EvalPoint& p) { return p.y[1]; };
        if (v == "tau") return [](const EvalPoint& p) { return p.tau; };
        throw ConfigError(path + ".variable", "expected y1, y2 or tau, got '" + v + "'");
    };
    if (fam == "constant") {
        const double v = j.contains("value") ? get_number(j, "value", path) : get_number_or(j, "offset", 1.0);
        f.micro = [v](const EvalPoint&) { return v; };
    } else if (fam == "sin" || fam == "cos") {
        const double off = get_number_or(j, "offset", 0.0);
        const double amp = get_number_or(j, "amplitude", 1.0);
        const double freq = get_number_or(j, "frequency", 1.0);
        auto var = pick_var(j.contains("variable") ? j["variable"].get<std::string>() : default_var);
        const bool is_sin = fam == "sin";
        f.micro = [=](const EvalPoint& p) {
            const double a = 2.0 * 3.14159265358979323846 * freq * var(p);
            return off + amp * (is_sin ? std::sin(a) : std::cos(a));
        };
    } else if (fam == "piecewise") {
        // offset + amplitude on the first part of the period, offset - amplitude on the rest
        const double off = get_number_or(j, "offset", 0.0);
        const double amp = get_number_or(j, "amplitude", 1.0);
        const double duty = get_number_or(j, "duty", 0.5);
        const double freq = get_number_or(j, "frequency", 1.0);
        auto var = pick_var(j.contains("variable") ? j["variable"].get<std::string>() : default_var);
        f.micro = [=](const EvalPoint& p) {
            double s = var(p) * freq;
            s -= std::floor(s);
            return off + (s < duty ? amp : -amp);
        };
    } else if (fam == "product") {
        if (!j.contains("factors") || !j["factors"].is_array() || j["factors"].empty())
            throw ConfigError(path + ".factors", "product needs a non-empty factor array");
        auto parts = std::make_shared<std::vector<Factor>>();
        int k = 0;
        for (const auto& sub : j["factors"]) {
            parts->push_back(parse_factor(sub, path + ".factors[" + std::to_string(k) + "]", default_var));
            f.uses_x = f.uses_x || parts->back().uses_x;
            f.uses_t = f.uses_t || parts->back().uses_t;
            ++k;
        }
        f.micro = [parts](const EvalPoint& p) {
            double v = 1.0;
            for (const auto& q : *parts) v *= q(p);
            return v;
        };
    } else if (fam == "custom-expression") {
        if (!j.contains("expr")) throw ConfigError(path + ".expr", "missing expression text");
        auto e = std::make_shared<Expression>(j["expr"].get<std::string>());
        f.uses_x = e->uses_any({"x1", "x2"});
        f.uses_t = e->uses_any({"t"});
        f.micro = [e](const EvalPoint& p) { return (*e)(p); };
    } else {
        throw ConfigError(path + ".family", "unknown family '" + fam + "'");
    }
    if (j.contains("macro")) {
        if (!j["macro"].is_object() || !j["macro"].contains("expr"))
            throw ConfigError(path + ".macro.expr", "macro modulation needs an expression");
        f.macro = std::make_shared<Expression>(j["macro"]["expr"].get<std::string>());
        f.uses_x = f.uses_x || f.macro->uses_any({"x1", "x2"});
        f.uses_t = f.uses_t || f.macro->uses_any({"t"});
    }
    return f;
}

}  // namespace detail

// Configuration-driven experiment description.
struct Scenario {
    std::string name = "scenario";
    int dim = 1;
    CoefficientSet coefficients;
    ScalarFn source;
    ScalarFn initial;
    MacroGrid domain;  // bounds, T, and the homogenized solve resolution nx/nt
    CellGrid cell;
    std::string regime_choice = "auto";  // auto | fast-equal | fast-strict | slow
    std::vector<double> epsilons;
    int res_space = 16, res_time = 16;
    double theta = 0.5;
    CellSolveOptions cell_options;
    double macro_tol = 1e-10;
    double delta_fraction = 0.25;              // margin of the time-shift window, as a fraction of T
    std::vector<int> shift_multiples{2, 4, 8};
    std::vector<std::string> stages{"validate", "cell", "effective", "macro", "micro", "unfold", "report"};
    json resolved;  // normalized configuration, embedded in every report

    Regime regime() const {
        if (regime_choice == "fast-equal") {
            Regime r = classify_regime(coefficients.alpha, 2.0 * coefficients.alpha);
            r.beta = coefficients.beta;
            return r;
        }
        if (regime_choice == "fast-strict" || regime_choice == "slow") {
            Regime r;
            r.alpha = coefficients.alpha;
            r.beta = coefficients.beta;
            r.omega = std::fabs(coefficients.alpha - 1.0) <= 1e-12 ? 1.0 : 0.0;
            r.tag = regime_choice == "slow" ? Regime::Scale::Slow : Regime::Scale::FastStrict;
            return r;
        }
        if (regime_choice != "auto") throw ConfigError("regime", "expected auto, fast-equal, fast-strict or slow");
        return classify_regime(coefficients.alpha, coefficients.beta);
    }
};

inline Scenario parse_scenario(const json& cfg) {
    Scenario sc;
    if (cfg.contains("name")) sc.name = cfg["name"].get<std::string>();
    sc.dim = cfg.contains("dimension") ? cfg["dimension"].get<int>() : 1;
    if (sc.dim != 1 && sc.dim != 2) throw ConfigError("dimension", "must be 1 or 2");

    if (!cfg.contains("coefficients")) throw ConfigError("coefficients", "missing section");
    const json& co = cfg["coefficients"];
    CoefficientSet& c = sc.coefficients;
    c.dim = sc.dim;
    c.alpha = detail::get_number_or(cfg, "alpha", 1.0);
    c.beta = detail::get_number_or(cfg, "beta", 2.0);
    struct Slot {
        const char* key;
        const char* var;
        ScalarFn CoefficientSet::*member;
    };
    bool uses_x = false, uses_t = false;
    for (const Slot& sl : {Slot{"a1", "y1", &CoefficientSet::a1}, Slot{"a2", "tau", &CoefficientSet::a2},
                           Slot{"b1", "y1", &CoefficientSet::b1}, Slot{"b2", "tau", &CoefficientSet::b2}}) {
        if (!co.contains(sl.key)) throw ConfigError(std::string("coefficients.") + sl.key, "missing factor");
        detail::Factor f = detail::parse_factor(co[sl.key], std::string("coefficients.") + sl.key, sl.var);
        uses_x |= f.uses_x;
        uses_t |= f.uses_t;
        c.*(sl.member) = [f](const EvalPoint& p) { return f(p); };
    }
    if (co.contains("b") && !co["b"].is_null()) {
        detail::Factor f = detail::parse_factor(co["b"], "coefficients.b", "y1");
        uses_x |= f.uses_x;
        uses_t |= f.uses_t;
        // a literal zero constant is treated as "no perturbation"
        bool zero_const = co["b"].contains("family") && co["b"]["family"] == "constant" &&
                          ((co["b"].contains("value") && co["b"]["value"].get<double>() == 0.0) ||
                           (!co["b"].contains("value") && co["b"].contains("offset") &&
                            co["b"]["offset"].get<double>() == 0.0));
        if (!zero_const) c.b = [f](const EvalPoint& p) { return f(p); };
    }
    if (!co.contains("B")) throw ConfigError("coefficients.B", "missing diffusion matrix");
    {
        const json& Bj = co["B"];
        const std::string type = Bj.contains("type") ? Bj["type"].get<std::string>() : "scalar";
        const int dim = sc.dim;
        if (type == "scalar") {
            detail::Factor f = detail::parse_factor(Bj.contains("factor") ? Bj["factor"] : json{{"family", "constant"}},
                                                    "coefficients.B.factor", "y1");
            uses_x |= f.uses_x;
            uses_t |= f.uses_t;
            c.B = [f, dim](const EvalPoint& p, double* out) {
                const double v = f(p);
                for (int i = 0; i < dim * dim; ++i) out[i] = 0.0;
                for (int i = 0; i < dim; ++i) out[i * dim + i] = v;
            };
        } else if (type == "diagonal") {
            if (!Bj.contains("factors") || !Bj["factors"].is_array() ||
                static_cast<int>(Bj["factors"].size()) != dim)
                throw ConfigError("coefficients.B.factors", "diagonal needs one factor per dimension");
            auto fs = std::make_shared<std::vector<detail::Factor>>();
            for (int d = 0; d < dim; ++d) {
                fs->push_back(detail::parse_factor(Bj["factors"][d],
                                                   "coefficients.B.factors[" + std::to_string(d) + "]", "y1"));
                uses_x |= fs->back().uses_x;
                uses_t |= fs->back().uses_t;
            }
            c.B = [fs, dim](const EvalPoint& p, double* out) {
                for (int i = 0; i < dim * dim; ++i) out[i] = 0.0;
                for (int d = 0; d < dim; ++d) out[d * dim + d] = (*fs)[d](p);
            };
        } else if (type == "full") {
            if (dim != 2) throw ConfigError("coefficients.B.type", "full matrices are for dimension 2");
            if (!Bj.contains("factors") || !Bj["factors"].is_array() || Bj["factors"].size() != 3)
                throw ConfigError("coefficients.B.factors", "full symmetric B needs [B11, B12, B22]");
            auto fs = std::make_shared<std::vector<detail::Factor>>();
            for (int k = 0; k < 3; ++k) {
                fs->push_back(detail::parse_factor(Bj["factors"][k],
                                                   "coefficients.B.factors[" + std::to_string(k) + "]", "y1"));
                uses_x |= fs->back().uses_x;
                uses_t |= fs->back().uses_t;
            }
            c.B = [fs](const EvalPoint& p, double* out) {
                out[0] = (*fs)[0](p);
                out[1] = out[2] = (*fs)[1](p);
                out[3] = (*fs)[2](p);
            };
        } else {
            throw ConfigError("coefficients.B.type", "expected scalar, diagonal or full");
        }
    }
    c.x_dependent = uses_x;
    c.t_dependent = uses_t;
    if (cfg.contains("bound")) c.bound = cfg["bound"].get<double>();

    // domain and grids
    const json dj = cfg.contains("domain") ? cfg["domain"] : json::object();
    std::array<double, 2> lo{0.0, 0.0}, hi{1.0, 1.0};
    if (dj.contains("lo"))
        for (size_t d = 0; d < dj["lo"].size() && d < 2; ++d) lo[d] = dj["lo"][d].get<double>();
    if (dj.contains("hi"))
        for (size_t d = 0; d < dj["hi"].size() && d < 2; ++d) hi[d] = dj["hi"][d].get<double>();
    const double T = dj.contains("T") ? dj["T"].get<double>() : 1.0;
    const json mj = cfg.contains("macro_grid") ? cfg["macro_grid"] : json::object();
    const int nx = mj.contains("nx") ? mj["nx"].get<int>() : 65;
    const int nt = mj.contains("nt") ? mj["nt"].get<int>() : 128;
    sc.domain = build_macro_grid(sc.dim, lo, hi, nx, nt, T);
    const json cj = cfg.contains("cell_grid") ? cfg["cell_grid"] : json::object();
    sc.cell = build_cell_grid(sc.dim, cj.contains("ny") ? cj["ny"].get<int>() : 64,
                              cj.contains("ntau") ? cj["ntau"].get<int>() : 32);
    c.deriv.hx = 1e-4 * (hi[0] - lo[0]);
    c.deriv.ht = 1e-4 * T;

    // data
    auto parse_fn = [&](const char* key, const char* dflt) -> ScalarFn {
        std::string text = dflt;
        if (cfg.contains(key)) {
            if (!cfg[key].is_object() || !cfg[key].contains("expr"))
                throw ConfigError(std::string(key) + ".expr", "expected {\"expr\": \"...\"}");
            text = cfg[key]["expr"].get<std::string>();
        }
        auto e = std::make_shared<Expression>(text);
        return [e](const EvalPoint& p) { return (*e)(p); };
    };
    sc.source = parse_fn("source", "0");
    sc.initial = parse_fn("initial", "sin(pi*x1)");

    if (cfg.contains("regime")) sc.regime_choice = cfg["regime"].get<std::string>();
    if (cfg.contains("epsilons")) {
        for (const auto& e : cfg["epsilons"]) sc.epsilons.push_back(e.get<double>());
        for (size_t i = 1; i < sc.epsilons.size(); ++i)
            if (!(sc.epsilons[i] < sc.epsilons[i - 1]))
                throw ConfigError("epsilons", "the eps list must be strictly decreasing");
    }
    if (cfg.contains("resolution")) {
        sc.res_space = cfg["resolution"].contains("space") ? cfg["resolution"]["space"].get<int>() : 16;
        sc.res_time = cfg["resolution"].contains("time") ? cfg["resolution"]["time"].get<int>() : 16;
    }
    sc.theta = detail::get_number_or(cfg, "theta", 0.5);
    if (cfg.contains("tolerances")) {
        const json& tj = cfg["tolerances"];
        sc.cell_options.linear_tol = detail::get_number_or(tj, "linear", sc.cell_options.linear_tol);
        sc.cell_options.fixed_point_tol = detail::get_number_or(tj, "fixed_point", sc.cell_options.fixed_point_tol);
        sc.macro_tol = detail::get_number_or(tj, "macro", sc.macro_tol);
    }
    if (cfg.contains("diagnostics")) {
        const json& gj = cfg["diagnostics"];
        sc.delta_fraction = detail::get_number_or(gj, "delta_fraction", sc.delta_fraction);
        if (gj.contains("shift_multiples")) {
            sc.shift_multiples.clear();
            for (const auto& k : gj["shift_multiples"]) sc.shift_multiples.push_back(k.get<int>());
        }
    }
    if (cfg.contains("stages")) {
        sc.stages.clear();
        for (const auto& s : cfg["stages"]) sc.stages.push_back(s.get<std::string>());
    }

    // guards that must hold before any stage runs
    if (!sc.epsilons.empty()) {
        const double emin = sc.epsilons.back();
        if (sc.dim == 1 && emin < 1.0 / 64 - 1e-12)
            throw ConfigError("epsilons", "min eps below the 1D cost guard 1/64");
        if (sc.dim == 2 && emin < 1.0 / 16 - 1e-12)
            throw ConfigError("epsilons", "min eps below the 2D cost guard 1/16");
    }
    if (sc.res_space < 16 || sc.res_time < 16)
        throw ConfigError("resolution", "fewer than 16 nodes per micro period");

    sc.resolved = cfg;
    sc.resolved["name"] = sc.name;
    sc.resolved["dimension"] = sc.dim;
    sc.resolved["alpha"] = c.alpha;
    sc.resolved["beta"] = c.beta;
    sc.resolved["regime"] = sc.regime_choice;
    sc.resolved["theta"] = sc.theta;
    sc.resolved["resolution"] = {{"space", sc.res_space}, {"time", sc.res_time}};
    sc.resolved["macro_grid"] = {{"nx", nx}, {"nt", nt}};
    sc.resolved["cell_grid"] = {{"ny", sc.cell.ny}, {"ntau", sc.cell.ntau}};
    sc.resolved["domain"] = {{"lo", {lo[0], lo[1]}}, {"hi", {hi[0], hi[1]}}, {"T", T}};
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open configuration file " + path);
    json cfg;
    try {
        is >> cfg;
    } catch (const std::exception& e) {
        throw std::runtime_error("configuration file " + path + " is not valid JSON: " + e.what());
    }
    return parse_scenario(cfg);
}

}  // namespace homogfp

#include <exception>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "homogfp/harness.hpp"

namespace {

int stage_code(const std::string& stage) {
    static const std::map<std::string, int> codes = {{"validate", 2}, {"cell", 3},   {"effective", 4},
                                                     {"macro", 5},    {"micro", 6},  {"unfold", 7},
                                                     {"report", 8}};
    auto it = codes.find(stage);
    return it == codes.end() ? 9 : it->second;
}

int run_stages(const std::string& config, const std::string& out, const std::vector<std::string>& stages) {
    homogfp::Scenario sc;
    try {
        sc = homogfp::load_scenario(config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (!stages.empty()) sc.stages = stages;
    try {
        homogfp::run_scenario(sc, out);
    } catch (const homogfp::StageFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return stage_code(e.stage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 9;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"homogfp: homogenization toolkit for mixed Fick/Fokker-Planck diffusion with "
                 "space-time periodic coefficients"};
    app.require_subcommand(1);

    std::string config, out = "out";
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "scenario configuration file (JSON)")->required();
        cmd->add_option("--out", out, "output directory");
    };

    auto* cmd_cell = app.add_subcommand("solve-cell", "solve the corrector cell problems and write chi/zeta fields");
    auto* cmd_eff = app.add_subcommand("effective", "assemble the effective model over the macro grid");
    auto* cmd_macro = app.add_subcommand("solve-macro", "solve the homogenized equation and recover u");
    auto* cmd_micro = app.add_subcommand("solve-micro", "direct solve of the eps-oscillating problem");
    auto* cmd_unfold = app.add_subcommand("unfold", "unfold the micro solution onto (cell, slab, y, tau)");
    auto* cmd_conv = app.add_subcommand("converge", "eps-convergence study against the homogenized solution");
    auto* cmd_pert = app.add_subcommand("perturb", "non-product perturbation study (b versus b = 0)");
    auto* cmd_run = app.add_subcommand("run", "run the configured pipeline stages");
    for (CLI::App* c : {cmd_cell, cmd_eff, cmd_macro, cmd_micro, cmd_unfold, cmd_conv, cmd_pert, cmd_run})
        add_common(c);

    CLI11_PARSE(app, argc, argv);

    if (cmd_cell->parsed()) return run_stages(config, out, {"validate", "cell"});
    if (cmd_eff->parsed()) return run_stages(config, out, {"validate", "effective"});
    if (cmd_macro->parsed()) return run_stages(config, out, {"validate", "effective", "macro"});
    if (cmd_micro->parsed()) return run_stages(config, out, {"validate", "micro"});
    if (cmd_unfold->parsed()) return run_stages(config, out, {"validate", "unfold"});
    if (cmd_conv->parsed()) return run_stages(config, out, {"validate", "effective", "macro", "report"});
    if (cmd_pert->parsed()) {
        homogfp::Scenario sc;
        try {
            sc = homogfp::load_scenario(config);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        try {
            std::filesystem::create_directories(out);
            homogfp::PerturbationReport rep = homogfp::run_perturbation_study(sc);
            homogfp::write_text(std::filesystem::path(out) / "perturbation.json", rep.to_json(sc).dump(2) + "\n");
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return stage_code("report");
        }
        return 0;
    }
    return run_stages(config, out, {});
}

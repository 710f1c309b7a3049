// Experiment runner: solve, measure, energy-check, recur, sweep, oracle.
// Configuration comes from a JSON file; outputs are CSVs plus a manifest
// carrying the config hash. Exit codes: 0 ok, 2 invalid config, 3 solver
// failure, 4 analysis failure.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stefanlab/runner.hpp"

namespace {

void write_failure(const std::filesystem::path& out_dir, const std::string& kind,
                   const std::string& message) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    nlohmann::json j;
    j["error"] = kind;
    j["message"] = message;
    std::ofstream out(out_dir / "failure.json", std::ios::binary);
    if (out) out << j.dump(2) << '\n';
    std::cerr << j.dump() << std::endl;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stefanlab: a numerical laboratory for regularized two-phase Stefan problems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int stride = -1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed for random test-pair selection in property checks");
        sub->add_option("--stride", stride, "override the storage stride");
    };

    auto* solve_cmd = app.add_subcommand("solve", "run the implicit stepper and store the field");
    add_common(solve_cmd);
    auto* measure_cmd =
        app.add_subcommand("measure", "solve, then measure oscillation series and fit moduli");
    add_common(measure_cmd);
    auto* energy_cmd =
        app.add_subcommand("energy-check", "solve, then evaluate the requested energy inequalities");
    add_common(energy_cmd);
    auto* recur_cmd = app.add_subcommand("recur", "generate iteration-scheme traces and tail fits");
    add_common(recur_cmd);
    auto* sweep_cmd =
        app.add_subcommand("sweep", "regularization-width sweep with shared-anchor fits");
    add_common(sweep_cmd);

    auto* oracle_cmd = app.add_subcommand("oracle", "closed-form references");
    double stefan_number = 1.0, t0 = 0.0, t1 = 0.5;
    int n_rows = 51;
    auto* stefan_cmd = oracle_cmd->add_subcommand("stefan1d", "one-phase similarity front table");
    stefan_cmd->add_option("--stefan", stefan_number, "Stefan number (wall value over latent heat)");
    stefan_cmd->add_option("--t0", t0, "first sample time");
    stefan_cmd->add_option("--t1", t1, "last sample time");
    stefan_cmd->add_option("--rows", n_rows, "number of table rows");
    stefan_cmd->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (stefan_cmd->parsed())
            return stefanlab::run_oracle_stefan1d(stefan_number, t0, t1, n_rows, out_dir);

        auto cfg = stefanlab::load_config(config_path);
        if (stride > 0) cfg.stride = stride;
        if (solve_cmd->parsed()) return stefanlab::run_solve(cfg, out_dir, seed);
        if (measure_cmd->parsed()) return stefanlab::run_measure(cfg, out_dir, seed);
        if (energy_cmd->parsed()) return stefanlab::run_energy_check(cfg, out_dir, seed);
        if (recur_cmd->parsed()) return stefanlab::run_recur(cfg, out_dir);
        if (sweep_cmd->parsed()) return stefanlab::run_sweep(cfg, out_dir, seed);
        std::cerr << "no subcommand" << std::endl;
        return 1;
    } catch (const stefanlab::ConfigError& e) {
        write_failure(out_dir, "config-invalid", e.what());
        return 2;
    } catch (const stefanlab::SolverError& e) {
        write_failure(out_dir, "solver-failure", e.what());
        return 3;
    } catch (const std::exception& e) {
        write_failure(out_dir, "analysis-failure", e.what());
        return 4;
    }
}

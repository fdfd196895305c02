#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

void add_data_options(CLI::App* cmd, dlcox::cli::DataArgs& d) {
    cmd->add_option("data", d.path, "CSV file with a header row")->required();
    cmd->add_option("--time-col", d.time_col, "Time column name")->capture_default_str();
    cmd->add_option("--status-col", d.status_col, "Event indicator column name")->capture_default_str();
    cmd->add_option("--standardize", d.standardize, "Covariate scaling")
        ->check(CLI::IsMember({"none", "center", "zscore"}))
        ->capture_default_str();
}

void add_fit_options(CLI::App* cmd, dlcox::cli::FitArgs& f) {
    add_data_options(cmd, f.data);
    cmd->add_option("--lambda", f.lambda, "Fixed lasso penalty (default: K-fold CV)");
    cmd->add_option("--folds", f.folds, "Folds for lambda CV")->check(CLI::Range(2, 1000))->capture_default_str();
    cmd->add_option("--seed", f.seed, "Fold assignment seed")->capture_default_str();
    cmd->add_option("--threads", f.threads, "Worker threads (0: logical cores)")->capture_default_str();
    cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    using namespace dlcox::cli;
    CLI::App app{"Debiased lasso inference for Cox models"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Lasso fit with CV-chosen or fixed lambda");
    add_fit_options(fit_cmd, fit);

    InferArgs infer;
    auto* infer_cmd = app.add_subcommand("infer", "Debiased estimates, confidence intervals and tests");
    add_fit_options(infer_cmd, infer.fit);
    infer_cmd->add_option("--gamma", infer.gamma, "Fixed Theta row tolerance (default: K-fold CV)");
    infer_cmd->add_option("--gamma-folds", infer.gamma_folds, "Folds for gamma CV")
        ->check(CLI::Range(2, 1000))
        ->capture_default_str();
    infer_cmd->add_option("--alpha", infer.alpha, "Confidence level is 1 - alpha")->capture_default_str();
    infer_cmd->add_option("--threshold-alpha", infer.threshold_alpha, "Hard-threshold level inside gamma CV")
        ->capture_default_str();
    infer_cmd->add_option("--threshold-denominator", infer.threshold_denominator, "Hard-threshold scaling")
        ->check(CLI::IsMember({"sqrt-diag", "diag"}))
        ->capture_default_str();
    infer_cmd->add_option("--contrast", infer.contrasts, "Linear hypothesis, e.g. \"x2-x3=0\" (repeatable)");
    infer_cmd->add_option("--joint", infer.joints, "Joint zero test, e.g. x2,x3 (repeatable)");
    infer_cmd->add_flag("--sort-p", infer.sort_by_p, "Order the coefficient table by p-value");
    infer_cmd->add_flag("--write-theta", infer.write_theta, "Include the Theta matrix in inference.json");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo experiment from a config file");
    sim_cmd->add_option("config", sim.config, "Config file (key = value)")->required();
    sim_cmd->add_option("--replications", sim.replications, "Override the replication count");
    sim_cmd->add_option("--seed", sim.seed, "Override the scenario seed");
    sim_cmd->add_option("--threads", sim.threads, "Worker threads (0: logical cores)");
    sim_cmd->add_option("--out", sim.out, "Output directory")->capture_default_str();

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Timing harnesses");
    bench_cmd->require_subcommand(1);
    auto* qp_cmd = bench_cmd->add_subcommand("qp", "Time Theta construction over p and gamma");
    qp_cmd->add_option("--p-grid", bench.p_grid, "Dimensions")->delimiter(',')->capture_default_str();
    qp_cmd->add_option("--gamma-multipliers", bench.gamma_multipliers, "gamma / sqrt(log p / n)")
        ->delimiter(',')
        ->capture_default_str();
    qp_cmd->add_option("--repetitions", bench.repetitions, "Timed repetitions per cell")->capture_default_str();
    qp_cmd->add_option("--n", bench.n, "Sample size")->capture_default_str();
    qp_cmd->add_option("--rho", bench.rho, "AR(1) correlation")->capture_default_str();
    qp_cmd->add_option("--seed", bench.seed, "Scenario seed")->capture_default_str();
    qp_cmd->add_option("--threads", bench.threads, "Threads used for Theta rows")->capture_default_str();
    qp_cmd->add_option("--out", bench.out, "Output directory")->capture_default_str();
    qp_cmd->add_flag("--row-csv", bench.row_csv, "Also write per-row timings");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kParseError;
    }

    const std::vector<std::string> args(argv, argv + argc);
    if (fit_cmd->parsed()) return cmd_fit(fit, args);
    if (infer_cmd->parsed()) return cmd_infer(infer, args);
    if (sim_cmd->parsed()) return cmd_simulate(sim, args);
    if (qp_cmd->parsed()) return cmd_bench_qp(bench, args);
    return kParseError;
}

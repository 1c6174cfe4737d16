#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "fbsde/acceptance.hpp"
#include "fbsde/errors.hpp"
#include "fbsde/lab.hpp"

namespace {

struct Global {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

fbsde::ExperimentConfig load(const Global& g) {
    if (g.config_path.empty())
        throw fbsde::ValidationError("--config is required for this command");
    fbsde::ExperimentConfig cfg = fbsde::load_config(g.config_path);
    if (g.seed_set) cfg.seed = g.seed;
    if (g.threads > 0) cfg.threads = g.threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"density estimates for BSDEs driven by fractional Brownian "
                 "motion and other Gaussian processes"};
    app.require_subcommand(1);

    Global g;
    app.add_option("--config", g.config_path, "experiment config (JSON)");
    app.add_option("--out", g.out_dir, "output directory")
        ->capture_default_str();
    app.add_option("--seed", g.seed, "override the config seed")
        ->each([&g](const std::string&) { g.seed_set = true; });
    app.add_option("--threads", g.threads, "override the config thread count");

    std::string sim_kind = "fbm";
    int sim_grid = 64;
    CLI::App* simulate =
        app.add_subcommand("simulate", "sample driver ensembles and check the "
                                       "empirical Gram matrix");
    simulate->add_option("--kind", sim_kind, "fbm | weighted")
        ->capture_default_str();
    simulate->add_option("--grid-points", sim_grid, "uniform grid size")
        ->capture_default_str();

    int iota_grid = 257;
    CLI::App* iota_cmd =
        app.add_subcommand("iota", "tabulate the driver variance and its rate");
    iota_cmd->add_option("--grid-points", iota_grid, "table size")
        ->capture_default_str();

    CLI::App* solve =
        app.add_subcommand("solve-pde", "solve the backward equation and "
                                        "persist the surface");
    CLI::App* linear = app.add_subcommand(
        "linear-solve", "closed-form values of the driver-linear problem");
    CLI::App* envelope = app.add_subcommand(
        "envelope", "compute density envelopes and verify them against a KDE");
    CLI::App* tails =
        app.add_subcommand("tails", "tail bounds against empirical frequencies");
    CLI::App* transfer = app.add_subcommand(
        "transfer", "solve a general Gaussian driver on its variance clock");
    CLI::App* represent = app.add_subcommand(
        "represent", "small-interval generator representation sweep");

    std::string verify_filter;
    CLI::App* verify =
        app.add_subcommand("verify-all", "run the full verification suite");
    verify->add_option("--only", verify_filter,
                       "run only criteria whose name contains this");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            fbsde::AcceptanceOptions opts;
            if (g.threads > 0) opts.threads = g.threads;
            opts.filter = verify_filter;
            return fbsde::cmd_verify_all(g.out_dir, opts);
        }
        const fbsde::ExperimentConfig cfg = load(g);
        if (simulate->parsed())
            return fbsde::cmd_simulate(cfg, g.out_dir, sim_kind, sim_grid);
        if (iota_cmd->parsed())
            return fbsde::cmd_iota(cfg, g.out_dir, iota_grid);
        if (solve->parsed()) return fbsde::cmd_solve_pde(cfg, g.out_dir);
        if (linear->parsed()) return fbsde::cmd_linear_solve(cfg, g.out_dir);
        if (envelope->parsed()) return fbsde::cmd_envelope(cfg, g.out_dir);
        if (tails->parsed()) return fbsde::cmd_tails(cfg, g.out_dir);
        if (transfer->parsed()) return fbsde::cmd_transfer(cfg, g.out_dir);
        if (represent->parsed()) return fbsde::cmd_represent(cfg, g.out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}

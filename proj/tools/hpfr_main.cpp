// hpfr: fit, predict and simulate heavy-tailed-process functional regression
// models. Exit codes: 0 ok, 2 fit did not converge, 1 any error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hpfr/commands.hpp"
#include "hpfr/error.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string family;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required) {
    auto* c = cmd->add_option("-c,--config", o.config, "Run configuration file (key = value)");
    if (config_required) c->required();
    c->check(CLI::ExistingFile);
    cmd->add_option("-s,--seed", o.seed, "Root random seed");
    cmd->add_option("-o,--out", o.out, "Output directory");
    cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
}

hpfr::RunConfig load(const Overrides& o) {
    hpfr::RunConfig cfg = o.config.empty() ? hpfr::RunConfig() : hpfr::RunConfig::load(o.config);
    if (o.seed) cfg.set("seed", std::to_string(*o.seed));
    if (!o.out.empty()) cfg.set("out", o.out);
    if (o.threads) cfg.set("threads", std::to_string(*o.threads));
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heavy-tailed-process functional regression"};
    app.require_subcommand(1);

    Overrides fit_o, pred_o, sim_o;
    auto* fit = app.add_subcommand("fit", "Fit one or more families and write estimates, diagnostics and a report");
    add_common(fit, fit_o, true);
    fit->add_option("-f,--family", fit_o.family, "Families to fit, e.g. N,T,SL,CN");

    std::string artifact;
    auto* pred = app.add_subcommand("predict", "Predict targets from a fit artifact");
    add_common(pred, pred_o, true);
    pred->add_option("--fit", artifact, "Fit artifact written by 'hpfr fit'")->required()->check(CLI::ExistingFile);

    std::string scheme, families;
    std::optional<int> n, reps, M;
    auto* sim = app.add_subcommand("simulate", "Run a simulation scheme and tabulate RMSE / coverage / length");
    add_common(sim, sim_o, false);
    sim->add_option("--scheme", scheme, "Scheme I..VI");
    sim->add_option("--n", n, "Observations per subject");
    sim->add_option("--M", M, "Training subjects");
    sim->add_option("--reps", reps, "Replications");
    sim->add_option("-f,--family,--families", families, "Fitted families, e.g. N,T,T1,SL,SL1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? hpfr::kExitOk : hpfr::kExitError;
    }

    try {
        if (fit->parsed()) {
            hpfr::RunConfig cfg = load(fit_o);
            if (!fit_o.family.empty()) cfg.set("family", fit_o.family);
            return hpfr::cmd_fit(cfg, std::cerr);
        }
        if (pred->parsed()) return hpfr::cmd_predict(load(pred_o), artifact, std::cerr);
        hpfr::RunConfig cfg = load(sim_o);
        if (!scheme.empty()) cfg.set("sim.scheme", scheme);
        if (n) cfg.set("sim.n", std::to_string(*n));
        if (M) cfg.set("sim.M", std::to_string(*M));
        if (reps) cfg.set("sim.reps", std::to_string(*reps));
        if (!families.empty()) cfg.set("sim.families", families);
        return hpfr::cmd_simulate(cfg, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hpfr::kExitError;
    }
}

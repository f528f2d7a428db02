#include "cli.hpp"

#include "qrc/errors.hpp"
#include "qrc/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace qrc::cli {

namespace {

constexpr int kUsage = 2;

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::string> h, w, dt, task, preset;
    std::optional<int> n_spins, realizations, pairs, workers, n, tau;
    std::optional<std::size_t> steps;
    std::optional<std::uint64_t> seed;
    bool dry_run = false;
    bool map = false;
};

void add_common(CLI::App* sub, Flags& f) {
    // --h is the field, so help keeps only its long form.
    sub->set_help_flag("--help", "Print this help message and exit");
    sub->add_option("--config", f.config, "INI config file ([section] key = value)");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--h", f.h, "field values: list a,b,c or log:lo:hi:n");
    sub->add_option("--w", f.w, "disorder values: list or log:lo:hi:n");
    sub->add_option("--n-spins", f.n_spins, "number of spins (2..12)");
    sub->add_option("--dt", f.dt, "time between inputs (a list for converge)");
    sub->add_option("--steps", f.steps, "number of input injections");
    sub->add_option("--realizations", f.realizations, "disorder realizations per cell");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--workers", f.workers, "worker threads (default QRC_WORKERS or 1)");
    sub->add_option("--preset", f.preset, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
    sub->add_flag("--dry-run", f.dry_run, "print the resolved config and cost estimate, then exit");
}

ExperimentConfig resolve(ExperimentKind kind, const Flags& f) {
    ExperimentConfig cfg;
    if (!f.config.empty()) cfg = load_config(f.config);
    const bool compatible =
        cfg.experiment == kind || (kind == ExperimentKind::convergence_curve &&
                                   cfg.experiment == ExperimentKind::convergence_map && !f.map);
    if (f.config.empty() || !compatible) cfg.experiment = kind;
    if (f.config.empty()) cfg.output_dir = "runs/" + to_string(kind);
    if (f.preset) apply_preset(cfg, *f.preset);

    if (!f.out.empty()) cfg.output_dir = f.out;
    if (f.h) set_config_value(cfg, "model.h", *f.h);
    if (f.w) set_config_value(cfg, "model.w", *f.w);
    if (f.n_spins) cfg.n_spins = *f.n_spins;
    if (f.dt) {
        if (cfg.experiment == ExperimentKind::convergence_curve) {
            set_config_value(cfg, "reservoir.dt_values", *f.dt);
        } else {
            set_config_value(cfg, "reservoir.dt", *f.dt);
        }
    }
    if (f.steps) cfg.steps = *f.steps;
    if (f.realizations) cfg.realizations = *f.realizations;
    if (f.pairs) cfg.realizations = *f.pairs;
    if (f.seed) cfg.master_seed = *f.seed;
    if (f.workers) cfg.workers = *f.workers;
    if (f.task || f.n || f.tau) {
        const std::string which = f.task.value_or(f.tau && !f.n ? "delay" : "narma");
        std::string tokens;
        for (const std::string name : {"narma", "delay"}) {
            if (which != name && which != "both") continue;
            const int arg = name == "narma" ? f.n.value_or(10) : f.tau.value_or(10);
            tokens += (tokens.empty() ? "" : ",") + name + ":" + std::to_string(arg);
        }
        if (tokens.empty()) throw ConfigError("--task must be narma, delay or both");
        set_config_value(cfg, "task.tasks", tokens);
    }
    cfg.validate();
    return cfg;
}

int execute(const ExperimentConfig& cfg, bool dry_run) {
    if (dry_run) {
        const CostEstimate cost = estimate_cost(cfg);
        std::cout << cfg.to_ini() << "\n# estimated cost\n"
                  << "# diagonalizations = " << cost.diagonalizations << " (dim " << cost.diagonalization_dim << ")\n"
                  << "# reservoir_steps = " << cost.reservoir_steps << "\n"
                  << "# seconds = " << cost.seconds << "\n";
        return 0;
    }
    const nlohmann::json manifest = run_experiment(cfg);
    nlohmann::json out = manifest["summary"];
    out["output_dir"] = cfg.output_dir;
    out["failures"] = manifest["failures"].size();
    out["wall_time_s"] = manifest["wall_time_s"];
    std::cout << out.dump(2) << "\n";
    return manifest["failures"].empty() ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Reservoir computing lab on disordered transverse-field Ising networks"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* help;
        ExperimentKind kind;
    };
    const Sub subs[] = {
        {"phase-diagram", "mean gap ratio over an (h, W) grid", ExperimentKind::phase_diagram},
        {"evolve", "observable trajectories under binary input", ExperimentKind::dynamics_trace},
        {"converge", "distance between two driven copies (curve, or --map over a grid)",
         ExperimentKind::convergence_curve},
        {"task", "NARMA / delay capacity C over cells", ExperimentKind::task_sweep},
        {"ipc", "information processing capacity", ExperimentKind::ipc_sweep},
        {"conserved", "energy and parity under driving from named initial states",
         ExperimentKind::conserved_trace},
    };

    Flags flags;
    std::vector<std::pair<CLI::App*, ExperimentKind>> commands;
    for (const Sub& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, flags);
        if (s.kind == ExperimentKind::convergence_curve) {
            sub->add_option("--pairs", flags.pairs, "pairs of random initial states");
            sub->add_flag("--map", flags.map, "final distance over the (h, W) grid instead of curves");
        }
        if (s.kind == ExperimentKind::task_sweep) {
            sub->add_option("--task", flags.task, "narma, delay or both")
                ->check(CLI::IsMember({"narma", "delay", "both"}));
            sub->add_option("--n", flags.n, "NARMA order");
            sub->add_option("--tau", flags.tau, "delay of the memory task");
        }
        commands.emplace_back(sub, s.kind);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    ExperimentKind kind = ExperimentKind::phase_diagram;
    for (const auto& [sub, k] : commands) {
        if (sub->parsed()) kind = k;
    }
    if (kind == ExperimentKind::convergence_curve && flags.map) kind = ExperimentKind::convergence_map;

    ExperimentConfig cfg;
    try {
        cfg = resolve(kind, flags);
    } catch (const ConfigError& e) {
        std::cerr << "qrc-lab: config error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "qrc-lab: invalid configuration: " << e.what() << "\n";
        return kUsage;
    }

    try {
        return execute(cfg, flags.dry_run);
    } catch (const std::exception& e) {
        std::cerr << "qrc-lab: " << to_string(cfg.experiment) << " failed: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace qrc::cli

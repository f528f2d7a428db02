#pragma once

// Batch experiments over (h, W) cells and disorder realizations. Every work
// item is seeded by derive_seed(master_seed, experiment id, cell, realization)
// and results are written by index, so output bytes do not depend on the
// number of workers.

#include "qrc/learn.hpp"
#include "qrc/spin_model.hpp"
#include "qrc/tasks.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qrc {

enum class ExperimentKind {
    phase_diagram,
    dynamics_trace,
    convergence_map,
    convergence_curve,
    task_sweep,
    ipc_sweep,
    conserved_trace,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::phase_diagram;

    int n_spins = 10;
    double j_s = 1.0;
    std::vector<double> h_values{1.0};
    std::vector<double> w_values{0.0};

    double dt = 10.0;
    std::vector<double> dt_values{0.1, 1.0, 10.0};  // convergence_curve only
    std::size_t steps = 200;
    std::string initial_state = "maximal_coherent";
    std::vector<std::string> initial_states{"all_up_z", "all_down_z", "half_half_z", "half_half_x"};

    Parity sector = Parity::even;

    std::vector<TaskSpec> tasks{TaskSpec::narma(10), TaskSpec::delay(10)};
    SplitSpec split;
    double ridge = 0.0;
    double input_lo = 0.0;
    double input_hi = 0.2;

    IpcConfig ipc;
    Index ipc_length = 20000;  // rows kept after the IPC washout

    int realizations = 1;
    std::uint64_t master_seed = 1;
    std::string output_dir = "runs/out";
    int workers = 0;  // 0: QRC_WORKERS or 1

    void validate() const;
    /// Cells in h-major order.
    std::size_t n_cells() const { return h_values.size() * w_values.size(); }
    ModelParams cell_params(std::size_t cell) const;

    /// Resolved config in the same INI layout that parse_config reads.
    std::string to_ini() const;
    nlohmann::json to_json() const;
};

/// [section] key = value text. Lists are comma separated; a grid may also be
/// written log:lo:hi:n. Unknown sections or keys raise ConfigError.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

/// Applies one key of the INI layout ("section.key") to `config`.
void set_config_value(ExperimentConfig& config, const std::string& dotted_key, const std::string& value);

/// "paper": 1200 / 600 / 100 / 10 realizations for the phase diagram,
/// convergence map, task sweep and IPC sweep. "desk": 200 / 20 / 20 / 5.
/// Both set 20 x 20 log grids over [0.01, 100] where the experiment scans a grid.
void apply_preset(ExperimentConfig& config, const std::string& preset);

struct CostEstimate {
    long long diagonalizations = 0;
    Index diagonalization_dim = 0;
    long long reservoir_steps = 0;
    double seconds = 0.0;  // rough single-core figure divided by workers
};

CostEstimate estimate_cost(const ExperimentConfig& config);

/// Runs the experiment, writes its CSVs, summary.json and manifest.json into
/// config.output_dir and returns the manifest. A failing work item is logged
/// in the manifest and excluded from its cell's aggregate.
nlohmann::json run_experiment(const ExperimentConfig& config);

/// CRC-32 of a file's bytes.
std::uint32_t file_crc32(const std::string& path);

/// Version string baked in at build time.
std::string code_version();

}  // namespace qrc

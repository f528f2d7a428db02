#pragma once

// Benchmark inputs and targets: NARMA-n, delayed recall, and the information
// processing capacity (IPC) built from products of Legendre polynomials of
// delayed inputs.

#include "qrc/design_matrix.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace qrc {

struct InputSpec {
    enum class Kind { uniform, binary };

    Kind kind = Kind::uniform;
    double lo = 0.0;
    double hi = 1.0;

    static InputSpec uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
    static InputSpec binary() { return {Kind::binary, 0.0, 1.0}; }
};

/// i.i.d. sequence, deterministic per seed.
std::vector<double> gen_input(const InputSpec& spec, std::size_t length, std::uint64_t seed);

/// y_k = 0.3 y_{k-1} + 0.05 y_{k-1} sum_{j=1..n} y_{k-j} + 1.5 s_{k-n} s_{k-1} + 0.1,
/// with zero pre-history. Throws NumericError once |y| exceeds 1e3.
std::vector<double> narma_target(std::span<const double> inputs, int n);

/// y_k = s_{k-tau}, zero before the sequence starts.
std::vector<double> delay_target(std::span<const double> inputs, int tau);

/// Legendre polynomial P_degree(x) by the Bonnet recurrence.
double legendre_eval(int degree, double x);

struct IpcTerm {
    int delay = 0;
    int degree = 1;

    friend bool operator==(const IpcTerm&, const IpcTerm&) = default;
};

/// prod_i P_{d_i}(s~_{k - delay_i}); terms sorted by ascending delay.
struct IpcTarget {
    std::vector<IpcTerm> terms;

    int total_degree() const;
    int max_delay() const;
    void validate() const;
    /// e.g. "d2@0", "d1@0*d1@1".
    std::string notation() const;
    static IpcTarget parse(const std::string& notation);

    friend bool operator==(const IpcTarget&, const IpcTarget&) = default;
};

/// Canonical order: ascending total degree, then delays, then degrees.
bool canonical_less(const IpcTarget& a, const IpcTarget& b);

struct TaskSpec {
    enum class Kind { narma, delay, ipc_target };

    Kind kind = Kind::narma;
    int n = 10;
    int tau = 10;
    IpcTarget ipc;

    static TaskSpec narma(int n) { return {Kind::narma, n, 0, {}}; }
    static TaskSpec delay(int tau) { return {Kind::delay, 0, tau, {}}; }
    static TaskSpec ipc_target(IpcTarget t) { return {Kind::ipc_target, 0, 0, std::move(t)}; }

    void validate() const;
    std::string name() const;
};

/// Target sequence for a task. IPC targets expect inputs in [-1, 1].
RealVector build_task_target(const TaskSpec& task, std::span<const double> inputs);

/// Degree -> number of admissible delays (delays 0 .. window-1).
using DelayWindows = std::map<int, int>;

/// 100 delays for degree 1, 30 for degree 2, 15 for higher degrees.
DelayWindows default_delay_windows(int d_max);

/// Targets of one degree whose largest delay equals `max_delay`, canonical order.
std::vector<IpcTarget> enumerate_ipc_block(int degree, int max_delay);

/// Every target with total degree <= d_max and delays inside the window of its
/// degree, canonical order. Throws SizeError above 10^6 targets.
std::vector<IpcTarget> enumerate_ipc_targets(int d_max, const DelayWindows& windows);

/// Evaluates a target on s~ in [-1, 1]; positions before the start use s~ = 0.
RealVector evaluate_ipc_target(const IpcTarget& target, std::span<const double> s_tilde);

struct IpcConfig {
    enum class ThresholdMode { surrogate, analytic };

    int d_max = 6;
    DelayWindows windows = default_delay_windows(6);
    Index washout = 1000;
    ThresholdMode threshold_mode = ThresholdMode::surrogate;
    std::uint64_t surrogate_seed = 0x5eed;
    double surrogate_quantile = 0.999;
    int surrogate_samples = 2000;
    /// A degree family stops growing after this many consecutive delay blocks
    /// whose counted capacity does not exceed the degree threshold.
    int stop_after_empty_blocks = 2;
    /// Also require the held-out score (fit on the first half of the window,
    /// scored on the second) to reach its own null threshold. In-sample
    /// estimates of weak targets are inflated beyond the surrogate null, and
    /// summed over thousands of targets they break the bound of O.
    bool held_out_selection = true;
};

struct TargetCapacity {
    IpcTarget target;
    double raw = 0.0;       // in-sample capacity on the full window
    double held_out = 0.0;  // 1 - MSE/<y^2> on the second half, fit on the first
    bool passed = false;
};

struct CapacityReport {
    std::vector<TargetCapacity> per_target;
    std::map<int, double> per_degree;
    std::map<int, int> counted_per_degree;
    std::map<int, double> threshold_table;
    std::map<int, double> held_out_threshold_table;  // empty without held-out selection
    double total = 0.0;
    double normalized_total = 0.0;
    Index n_variables = 0;
};

/// Analytic fallback threshold 2 (O + 1) / L.
double analytic_ipc_threshold(Index n_columns, Index length);

/// Capacity of each Legendre-product target, thresholded and summed per
/// degree. `raw_inputs` are the s~ in [-1, 1] whose images (1 + s~)/2 drove
/// the reservoir; rows before `washout` are discarded. A target counts when
/// its in-sample capacity reaches the degree threshold and, with held-out
/// selection, its held-out score reaches the held-out threshold. Surrogate
/// thresholds are quantiles of the same scores for targets built from
/// independent input streams.
CapacityReport ipc_capacity(const DesignMatrix& x, std::span<const double> raw_inputs, const IpcConfig& config);

void to_json(nlohmann::json& j, const CapacityReport& r);
/// degree,capacity,threshold,n_targets_counted
void write_capacity_csv(std::ostream& os, const CapacityReport& r);

}  // namespace qrc

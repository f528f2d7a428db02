#pragma once

// Input-driven spin reservoir. Each step resets qubit 1 to the encoded input
// and lets the network evolve unitarily for dt:
//
//   rho_k = U (|psi_s><psi_s| (x) Tr_1 rho_{k-1}) U^dag,   U = exp(-i H dt)
//   |psi_s> = sqrt(1 - s)|0> + sqrt(s)|1>

#include "qrc/design_matrix.hpp"
#include "qrc/spin_model.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qrc {

struct ReservoirConfig {
    double dt = 10.0;
    std::vector<ObservableDescriptor> observables;
    DisorderRealization realization;

    void validate() const;
    /// Config with the default 3N + N(N-1)/2 observable set.
    static ReservoirConfig with_defaults(DisorderRealization real, double dt = 10.0);
};

struct NamedInitialState {
    enum class Kind { all_up_z, all_down_z, half_half_z, half_half_x, maximal_coherent, random };

    Kind kind = Kind::maximal_coherent;
    std::uint64_t seed = 0;  // only used by Kind::random

    static NamedInitialState random(std::uint64_t seed) { return {Kind::random, seed}; }
    /// "all_up_z", ..., "random" or "random:<seed>".
    static NamedInitialState parse(const std::string& name);
    std::string name() const;
};

DensityMatrix make_initial_state(const NamedInitialState& init, int n_spins);

/// |psi_s><psi_s| with real amplitudes; s must lie in [0, 1].
DensityMatrix encode_input(double s);

/// Immutable per-realization data shared by every trajectory on it: the
/// Hamiltonian, its eigensystem and the phase factors for one dt.
class ReservoirDynamics {
public:
    /// `project_coherences` caches V^T X_i V and V^T Y_i V per site so x and y
    /// readouts cost O(dim^2); it is skipped above 10 spins regardless.
    ReservoirDynamics(const DisorderRealization& real, double dt, bool project_coherences = true);

    int n_spins() const { return n_spins_; }
    Index dim() const { return energies_.size(); }
    double dt() const { return dt_; }
    const RealMatrix& hamiltonian() const { return h_; }
    const RealVector& energies() const { return energies_; }
    const RealMatrix& eigenvectors() const { return vectors_; }
    EigenSystem eigensystem() const;
    /// exp(-i H dt), materialized on request.
    ComplexMatrix propagator() const;

    /// Same Hamiltonian and eigensystem, phase factors recomputed for `dt`.
    std::shared_ptr<const ReservoirDynamics> with_dt(double dt) const;

private:
    friend class ReservoirState;
    ReservoirDynamics() = default;
    void set_dt(double dt);

    void project_coherence_ops();

    int n_spins_ = 0;
    double dt_ = 0.0;
    RealMatrix h_;
    RealVector energies_;
    RealMatrix vectors_;
    // exp(-i (E_j - E_k) dt) = cos_(j,k) - i sin_(j,k)
    RealMatrix cos_;
    RealMatrix sin_;
    // Per site, V^T X_i V and V^T A_i V with Y_i = -i A_i (A_i real
    // antisymmetric). Empty above kMaxProjectedSpins to bound memory.
    static constexpr int kMaxProjectedSpins = 10;
    std::shared_ptr<const std::vector<RealMatrix>> x_proj_;
    std::shared_ptr<const std::vector<RealMatrix>> a_proj_;
};

/// Conserved-quantity diagnostics of a single step.
struct StepTrace {
    double energy_post_inject = 0.0;
    double energy_post_evolve = 0.0;
    double parity = 0.0;
    double trace_error = 0.0;  // |Tr rho - 1| before renormalization
};

/// Reservoir density matrix, held in the energy eigenbasis of its dynamics
/// as B = V^T rho V (V real orthogonal) together with P = V B. The reduced
/// state of spins 2..N and every readout observable are O(dim^2) functions
/// of P and V, so one step costs four real products of dimension dim.
class ReservoirState {
public:
    ReservoirState(std::shared_ptr<const ReservoirDynamics> dynamics, const DensityMatrix& rho);
    ReservoirState(const DisorderRealization& real, double dt, const DensityMatrix& rho);

    /// Computational-basis density matrix (assembled on request, O(dim^3)).
    DensityMatrix rho() const;
    const ReservoirDynamics& dynamics() const { return *dyn_; }
    std::shared_ptr<const ReservoirDynamics> dynamics_ptr() const { return dyn_; }

    /// One application of the input map. Fills `trace` when given.
    void inject_and_evolve(double s, StepTrace* trace = nullptr);

    /// Replaces the cached dt (phase factors recomputed, eigensystem reused).
    void set_dt(double dt);

    /// Frobenius distance to a state on the same eigenbasis.
    double distance(const ReservoirState& other) const;

    /// Tr(O rho) for every descriptor, in order.
    RealVector measure(std::span<const ObservableDescriptor> observables) const;

private:
    void refresh_projection();
    RealVector diagonal() const;

    std::shared_ptr<const ReservoirDynamics> dyn_;
    RealMatrix br_, bi_;  // real and imaginary parts of B
    RealMatrix pr_, pi_;  // real and imaginary parts of V B
};

/// Functional form of ReservoirState::inject_and_evolve.
ReservoirState inject_and_evolve(const ReservoirState& state, double s);

/// Tr(O rho) for every descriptor, in order. The energy kind needs `hamiltonian`.
RealVector measure(const DensityMatrix& rho, int n_spins, std::span<const ObservableDescriptor> observables,
                   const RealMatrix* hamiltonian = nullptr);
RealVector measure(const ReservoirState& state, std::span<const ObservableDescriptor> observables);

struct Trajectory {
    DesignMatrix design;
    /// L x 3: energy post-inject, energy post-evolve, parity. Empty unless requested.
    RealMatrix conserved;
    std::vector<double> inputs;
    /// Largest per-step |Tr rho - 1| seen.
    double max_trace_error = 0.0;
};

/// Drives `state` with `inputs`, recording one design row per step.
Trajectory run_trajectory(ReservoirState& state, std::span<const ObservableDescriptor> observables,
                          std::span<const double> inputs, bool record_conserved);
Trajectory run_trajectory(const ReservoirConfig& config, std::span<const double> inputs,
                          const NamedInitialState& init, bool record_conserved);

struct ConvergenceSeries {
    static constexpr double kFloor = 1e-8;

    std::vector<double> raw;      // d_0 .. d_L
    std::vector<double> clamped;  // max(raw, kFloor)
};

/// Frobenius distance between two copies started from independent random
/// states and driven by the same inputs.
ConvergenceSeries convergence_run(const ReservoirConfig& config, std::span<const double> inputs,
                                  std::uint64_t seed_a, std::uint64_t seed_b);
ConvergenceSeries convergence_run(std::shared_ptr<const ReservoirDynamics> dynamics,
                                  std::span<const double> inputs, const DensityMatrix& rho_a,
                                  const DensityMatrix& rho_b);

/// step,input,<labels...>,bias[,e_post_inject,e_post_evolve,parity]
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
/// step,distance_raw,distance_clamped
void write_convergence_csv(std::ostream& os, const ConvergenceSeries& series);

}  // namespace qrc

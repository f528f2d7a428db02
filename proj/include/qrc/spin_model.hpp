#pragma once

// Disordered transverse-field Ising network with all-to-all random couplings:
//
//   H = sum_{i>j} J_ij X_i X_j + 1/2 sum_i (h + D_i) Z_i
//
// with J_ij ~ U[-J_s/2, J_s/2] and D_i ~ U[-W, W]. Energies are in units of J_s.

#include "qrc/linalg.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qrc {

struct ModelParams {
    int n_spins = 10;
    double h = 1.0;
    double w = 0.0;
    double j_s = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    Index dim() const { return Index{1} << n_spins; }
};

struct DisorderRealization {
    ModelParams params;
    RealMatrix couplings;  // symmetric, zero diagonal
    RealVector fields;

    void validate() const;
};

/// Draws couplings (i > j, row-major over the lower triangle) and then the
/// onsite fields from a stream seeded by params.seed.
DisorderRealization sample_realization(const ModelParams& params);

/// Full 2^N x 2^N Hamiltonian. Real symmetric in the computational basis.
ComplexMatrix build_hamiltonian(const DisorderRealization& real);
RealMatrix build_real_hamiltonian(const DisorderRealization& real);

enum class Parity { even, odd };

/// Hamiltonian restricted to basis states whose popcount parity matches
/// `sector`, in ascending order of the original index.
ComplexMatrix build_sector_hamiltonian(const DisorderRealization& real, Parity sector);
RealMatrix build_real_sector_hamiltonian(const DisorderRealization& real, Parity sector);

enum class Axis { x, y, z };

/// Observable measured by the readout. Sites are 1-based.
struct ObservableDescriptor {
    enum class Kind { single, pair_zz, energy, parity };

    Kind kind = Kind::single;
    int site_i = 1;
    int site_j = 0;
    Axis axis = Axis::z;

    static ObservableDescriptor single(int site, Axis axis);
    static ObservableDescriptor pair_zz(int i, int j);
    static ObservableDescriptor energy();
    static ObservableDescriptor parity();

    void validate(int n_spins) const;
    /// Short label such as "x3", "zz1_4", "energy", "parity".
    std::string label() const;
    static ObservableDescriptor parse(const std::string& label);

    friend bool operator==(const ObservableDescriptor&, const ObservableDescriptor&) = default;
};

/// All <X_j>, <Y_j>, <Z_j> followed by every <Z_i Z_j> with i < j:
/// 3N + N(N-1)/2 observables (75 for N = 10).
std::vector<ObservableDescriptor> default_observables(int n_spins);

/// Dense operator for a descriptor. The energy kind returns `h_matrix`.
ComplexMatrix observable_operator(const ObservableDescriptor& desc, int n_spins,
                                  const std::optional<ComplexMatrix>& h_matrix = std::nullopt);

/// Basis-index bit of a 1-based site (site 1 is the most significant bit).
inline Index site_bit(int site, int n_spins) { return Index{1} << (n_spins - site); }

void to_json(nlohmann::json& j, const DisorderRealization& real);
void from_json(const nlohmann::json& j, DisorderRealization& real);

}  // namespace qrc

#pragma once

// Dense complex linear algebra for spin registers of up to ~10 qubits.
//
// Index convention: qubit 1 occupies the most significant bit of a basis
// index, and |0> is the +1 eigenstate of sigma^z.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>

namespace qrc {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Largest row or column count any kernel will allocate.
inline constexpr Index kMaxDimension = Index{1} << 20;

ComplexMatrix pauli_x();
ComplexMatrix pauli_y();
ComplexMatrix pauli_z();

/// Throws ValidationError if any entry is NaN or infinite.
void require_finite(const ComplexMatrix& m, const char* what);

/// Kronecker product; the left factor indexes the most significant bits.
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

double frobenius_norm(const ComplexMatrix& m);
double frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b);

/// Hermitian, unit-trace state of a finite-dimensional register.
///
/// Hermiticity and trace are checked on construction. Positivity costs a
/// diagonalization and is therefore only checked on request.
class DensityMatrix {
public:
    static constexpr double kHermitianTol = 1e-12;
    static constexpr double kTraceTol = 1e-12;
    static constexpr double kPsdTol = 1e-10;

    explicit DensityMatrix(ComplexMatrix m);

    /// |psi><psi| for a normalized state vector.
    static DensityMatrix pure(const Eigen::VectorXcd& psi);
    static DensityMatrix maximally_mixed(Index dim);

    Index dim() const { return m_.rows(); }
    const ComplexMatrix& matrix() const { return m_; }

    Complex trace() const { return m_.trace(); }
    double purity() const;
    double min_eigenvalue() const;
    bool is_psd(double tol = kPsdTol) const { return min_eigenvalue() >= -tol; }

private:
    ComplexMatrix m_;
};

/// Traces out the leading subsystem of dimension `sub_dim`.
DensityMatrix partial_trace_first(const DensityMatrix& rho, Index sub_dim);

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues and
/// orthonormal eigenvector columns.
struct EigenSystem {
    RealVector values;
    ComplexMatrix vectors;

    Index dim() const { return values.size(); }
    /// True when every eigenvector entry has zero imaginary part.
    bool has_real_vectors() const;
};

/// Full eigendecomposition. Input must be Hermitian to 1e-10 relative; it is
/// symmetrized before solving. Real symmetric input takes a real solver path.
EigenSystem hermitian_eig(const ComplexMatrix& h);

/// Real symmetric counterpart of EigenSystem.
struct RealEigenSystem {
    RealVector values;
    RealMatrix vectors;
};

RealEigenSystem symmetric_eig(const RealMatrix& h);

/// Eigenvalues only, ascending.
RealVector hermitian_eigenvalues(const ComplexMatrix& h);
RealVector symmetric_eigenvalues(const RealMatrix& h);

/// exp(-i H dt) assembled from an eigendecomposition of H.
ComplexMatrix propagator(const EigenSystem& eig, double dt);

/// Full-rank Ginibre state G G^dagger / Tr(G G^dagger), G with i.i.d.
/// standard complex Gaussian entries.
DensityMatrix random_density_matrix(Index dim, std::mt19937_64& rng);

}  // namespace qrc

#include "qrc/linalg.hpp"

#include "qrc/errors.hpp"

#include <cmath>
#include <string>

namespace qrc {

namespace {

constexpr double kHermitianInputTol = 1e-10;

void require_square(const ComplexMatrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        throw ShapeError(std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected square");
    }
}

bool is_real(const ComplexMatrix& m) {
    return m.size() == 0 || m.imag().cwiseAbs().maxCoeff() == 0.0;
}

ComplexMatrix symmetrized(const ComplexMatrix& h, const char* what) {
    require_square(h, what);
    require_finite(h, what);
    const double norm = h.norm();
    const double asym = (h - h.adjoint()).norm();
    if (asym > kHermitianInputTol * std::max(norm, 1e-300)) {
        throw ValidationError(std::string(what) + ": input is not Hermitian (||H - H^dag||_F = " +
                              std::to_string(asym) + ")");
    }
    return (h + h.adjoint()) * 0.5;
}

template <typename Solver>
void require_converged(const Solver& solver, Index n) {
    if (solver.info() != Eigen::Success) {
        throw NumericError("hermitian_eig: tridiagonal QR did not converge for dimension " +
                           std::to_string(n) + " within " +
                           std::to_string(Solver::m_maxIterations * n) + " iterations");
    }
}

}  // namespace

ComplexMatrix pauli_x() {
    ComplexMatrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

ComplexMatrix pauli_y() {
    ComplexMatrix m(2, 2);
    m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
    return m;
}

ComplexMatrix pauli_z() {
    ComplexMatrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}

void require_finite(const ComplexMatrix& m, const char* what) {
    if (!m.allFinite()) {
        throw ValidationError(std::string(what) + ": matrix has non-finite entries");
    }
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    require_finite(a, "kron");
    require_finite(b, "kron");
    const Index rows = a.rows() * b.rows();
    const Index cols = a.cols() * b.cols();
    if (rows > kMaxDimension || cols > kMaxDimension) {
        throw SizeError("kron: result " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " exceeds the dimension cap");
    }
    ComplexMatrix out(rows, cols);
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

double frobenius_norm(const ComplexMatrix& m) { return m.norm(); }

double frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("frobenius_distance: shapes differ");
    }
    return (a - b).norm();
}

DensityMatrix::DensityMatrix(ComplexMatrix m) : m_(std::move(m)) {
    require_square(m_, "DensityMatrix");
    if (m_.rows() == 0) throw ValidationError("DensityMatrix: empty matrix");
    require_finite(m_, "DensityMatrix");
    const double norm = m_.norm();
    const double asym = (m_ - m_.adjoint()).norm();
    if (asym > kHermitianTol * norm) {
        throw ValidationError("DensityMatrix: not Hermitian (||rho - rho^dag||_F = " +
                              std::to_string(asym) + ")");
    }
    const Complex tr = m_.trace();
    if (std::abs(tr - 1.0) > kTraceTol) {
        throw ValidationError("DensityMatrix: trace " + std::to_string(tr.real()) + "+" +
                              std::to_string(tr.imag()) + "i differs from 1");
    }
}

DensityMatrix DensityMatrix::pure(const Eigen::VectorXcd& psi) {
    return DensityMatrix(psi * psi.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed(Index dim) {
    return DensityMatrix(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

double DensityMatrix::purity() const {
    // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
    return m_.squaredNorm();
}

double DensityMatrix::min_eigenvalue() const { return hermitian_eigenvalues(m_)(0); }

DensityMatrix partial_trace_first(const DensityMatrix& rho, Index sub_dim) {
    const Index dim = rho.dim();
    if (sub_dim < 1 || dim % sub_dim != 0) {
        throw ShapeError("partial_trace_first: dimension " + std::to_string(dim) +
                         " is not divisible by " + std::to_string(sub_dim));
    }
    const Index rest = dim / sub_dim;
    const ComplexMatrix& m = rho.matrix();
    ComplexMatrix out = ComplexMatrix::Zero(rest, rest);
    for (Index a = 0; a < sub_dim; ++a) out += m.block(a * rest, a * rest, rest, rest);
    return DensityMatrix(std::move(out));
}

bool EigenSystem::has_real_vectors() const { return is_real(vectors); }

EigenSystem hermitian_eig(const ComplexMatrix& h) {
    const ComplexMatrix hs = symmetrized(h, "hermitian_eig");
    const Index n = hs.rows();
    EigenSystem out;
    if (is_real(hs)) {
        Eigen::SelfAdjointEigenSolver<RealMatrix> solver(hs.real());
        require_converged(solver, n);
        out.values = solver.eigenvalues();
        out.vectors = solver.eigenvectors().cast<Complex>();
    } else {
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hs);
        require_converged(solver, n);
        out.values = solver.eigenvalues();
        out.vectors = solver.eigenvectors();
    }
    return out;
}

RealVector hermitian_eigenvalues(const ComplexMatrix& h) {
    const ComplexMatrix hs = symmetrized(h, "hermitian_eigenvalues");
    if (is_real(hs)) return symmetric_eigenvalues(hs.real());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hs, Eigen::EigenvaluesOnly);
    require_converged(solver, hs.rows());
    return solver.eigenvalues();
}

RealEigenSystem symmetric_eig(const RealMatrix& h) {
    if (h.rows() != h.cols()) throw ShapeError("symmetric_eig: matrix is not square");
    if (!h.allFinite()) throw ValidationError("symmetric_eig: matrix has non-finite entries");
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h);
    require_converged(solver, h.rows());
    return {solver.eigenvalues(), solver.eigenvectors()};
}

RealVector symmetric_eigenvalues(const RealMatrix& h) {
    if (h.rows() != h.cols()) throw ShapeError("symmetric_eigenvalues: matrix is not square");
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h, Eigen::EigenvaluesOnly);
    require_converged(solver, h.rows());
    return solver.eigenvalues();
}

ComplexMatrix propagator(const EigenSystem& eig, double dt) {
    if (eig.vectors.rows() != eig.dim() || eig.vectors.cols() != eig.dim()) {
        throw ShapeError("propagator: eigenvector matrix does not match eigenvalue count");
    }
    Eigen::VectorXcd phases(eig.dim());
    for (Index j = 0; j < eig.dim(); ++j) phases(j) = std::polar(1.0, -eig.values(j) * dt);
    return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

DensityMatrix random_density_matrix(Index dim, std::mt19937_64& rng) {
    if (dim < 1) throw ValidationError("random_density_matrix: dim must be >= 1");
    std::normal_distribution<double> gauss(0.0, 1.0);
    ComplexMatrix g(dim, dim);
    // Fill column by column so the draw order is fixed by the storage order.
    for (Index j = 0; j < dim; ++j) {
        for (Index i = 0; i < dim; ++i) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            g(i, j) = Complex(re, im);
        }
    }
    ComplexMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    // Remove rounding asymmetry from the product.
    rho = (rho + rho.adjoint()).eval() * 0.5;
    return DensityMatrix(std::move(rho));
}

}  // namespace qrc

#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library's eigen or propagator code.

#include "qrc/linalg.hpp"

#include <cmath>

namespace oracle {

using qrc::Complex;
using qrc::ComplexMatrix;
using qrc::Index;

/// exp(A) by scaling and squaring around a long Taylor series.
inline ComplexMatrix expm_taylor(const ComplexMatrix& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
    const ComplexMatrix scaled = a / std::pow(2.0, squarings);
    ComplexMatrix term = ComplexMatrix::Identity(a.rows(), a.cols());
    ComplexMatrix sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = term * scaled / static_cast<double>(k);
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    return sum;
}

/// Tr over the leading factor of dimension d1 by explicit index contraction.
inline ComplexMatrix trace_first(const ComplexMatrix& rho, Index d1) {
    const Index d2 = rho.rows() / d1;
    ComplexMatrix out = ComplexMatrix::Zero(d2, d2);
    for (Index a = 0; a < d2; ++a) {
        for (Index b = 0; b < d2; ++b) {
            for (Index i = 0; i < d1; ++i) out(a, b) += rho(i * d2 + a, i * d2 + b);
        }
    }
    return out;
}

/// Kronecker product by explicit indices.
inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            for (Index k = 0; k < b.rows(); ++k)
                for (Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
    return out;
}

inline double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace oracle

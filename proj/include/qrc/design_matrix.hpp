#pragma once

#include "qrc/linalg.hpp"

#include <string>
#include <vector>

namespace qrc {

/// L x (O+1) record of readout variables; the last column is a constant bias.
struct DesignMatrix {
    RealMatrix values;
    std::vector<std::string> labels;  // O observable labels followed by "bias"

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
    /// Number of readout variables excluding the bias.
    Index n_variables() const { return values.cols() - 1; }

    /// Checks shape, finiteness and the bias column.
    void validate() const;

    /// Contiguous row window [begin, begin + count).
    DesignMatrix rows_slice(Index begin, Index count) const;

    /// Appends a bias column of ones to raw features.
    static DesignMatrix with_bias(const RealMatrix& features, std::vector<std::string> labels);
};

}  // namespace qrc

#pragma once

// Linear readout training and the squared-correlation performance metric.

#include "qrc/design_matrix.hpp"

#include <json.hpp>

#include <span>
#include <vector>

namespace qrc {

struct SplitSpec {
    Index washout = 1000;
    Index train = 2000;
    Index test = 2000;

    Index total() const { return washout + train + test; }
    void validate(Index rows) const;
};

struct RegressionSolution {
    RealVector weights;
    double train_mse = 0.0;
    Index effective_rank = 0;
    bool degenerate = false;  // all-zero design; weights are zero
};

/// Thin SVD of a design matrix with singular values below
/// kRelativeCutoff * sigma_max discarded. Reused for many targets.
class LeastSquaresSolver {
public:
    static constexpr double kRelativeCutoff = 1e-10;

    explicit LeastSquaresSolver(const RealMatrix& x);

    Index rank() const { return rank_; }
    Index rows() const { return rows_; }
    Index cols() const { return cols_; }

    /// argmin ||X w - y||^2 + ridge ||w||^2 (minimum-norm when ridge = 0).
    RealVector solve(const RealVector& y, double ridge = 0.0) const;

    /// Minimum-norm least-squares weights for every column of `targets`.
    RealMatrix solve_many(const RealMatrix& targets) const;

    /// Squared norm of the projection of each column of `targets` onto the
    /// retained column space of X: ||X w* - y||^2 = ||y||^2 - ||U^T y||^2.
    RealVector explained_energy(const RealMatrix& targets) const;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    Index rank_ = 0;
    RealMatrix u_;      // rows x rank
    RealVector sigma_;  // rank
    RealMatrix v_;      // cols x rank
};

RegressionSolution fit_readout(const RealMatrix& x, const RealVector& target, double ridge = 0.0);
RegressionSolution fit_readout(const DesignMatrix& x, const RealVector& target, double ridge = 0.0);

/// Squared Pearson correlation; 0 when either series is constant.
double capacity_c(std::span<const double> y, std::span<const double> target);
double capacity_c(const RealVector& y, const RealVector& target);

struct TrainEvalResult {
    double c_train = 0.0;
    double c_test = 0.0;
    RegressionSolution solution;
    SplitSpec split;
    double ridge = 0.0;
};

/// Fits on rows [washout, washout + train) and scores on the following
/// `test` rows. Washout rows are never used.
TrainEvalResult train_eval(const DesignMatrix& x, const RealVector& target, const SplitSpec& split,
                           double ridge = 0.0);

void to_json(nlohmann::json& j, const TrainEvalResult& r);

}  // namespace qrc

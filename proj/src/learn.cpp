#include "qrc/learn.hpp"

#include "qrc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace qrc {

void DesignMatrix::validate() const {
    if (values.cols() < 1) throw ShapeError("DesignMatrix: no columns");
    if (static_cast<Index>(labels.size()) != values.cols()) {
        throw ShapeError("DesignMatrix: label count does not match column count");
    }
    if (!values.allFinite()) throw ValidationError("DesignMatrix: non-finite entries");
    if (values.rows() > 0 && (values.col(values.cols() - 1).array() != 1.0).any()) {
        throw ValidationError("DesignMatrix: last column must be the constant bias 1");
    }
}

DesignMatrix DesignMatrix::rows_slice(Index begin, Index count) const {
    if (begin < 0 || count < 0 || begin + count > rows()) {
        throw ShapeError("DesignMatrix: row window out of range");
    }
    return DesignMatrix{values.middleRows(begin, count), labels};
}

DesignMatrix DesignMatrix::with_bias(const RealMatrix& features, std::vector<std::string> labels) {
    if (static_cast<Index>(labels.size()) != features.cols()) {
        throw ShapeError("DesignMatrix::with_bias: label count does not match feature columns");
    }
    DesignMatrix d;
    d.values.resize(features.rows(), features.cols() + 1);
    d.values.leftCols(features.cols()) = features;
    d.values.col(features.cols()).setOnes();
    labels.emplace_back("bias");
    d.labels = std::move(labels);
    return d;
}

void SplitSpec::validate(Index rows) const {
    if (washout < 0 || train < 1 || test < 2) {
        throw ValidationError("SplitSpec: need washout >= 0, train >= 1, test >= 2");
    }
    if (total() != rows) {
        throw ValidationError("SplitSpec: washout + train + test = " + std::to_string(total()) +
                              " does not match sequence length " + std::to_string(rows));
    }
}

LeastSquaresSolver::LeastSquaresSolver(const RealMatrix& x) : rows_(x.rows()), cols_(x.cols()) {
    if (!x.allFinite()) throw ValidationError("LeastSquaresSolver: non-finite design entries");
    if (rows_ == 0 || cols_ == 0) return;
    Eigen::BDCSVD<RealMatrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RealVector& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    while (rank_ < s.size() && smax > 0.0 && s(rank_) > kRelativeCutoff * smax) ++rank_;
    u_ = svd.matrixU().leftCols(rank_);
    sigma_ = s.head(rank_);
    v_ = svd.matrixV().leftCols(rank_);
}

RealVector LeastSquaresSolver::solve(const RealVector& y, double ridge) const {
    if (y.size() != rows_) throw ShapeError("LeastSquaresSolver::solve: target length mismatch");
    if (ridge < 0.0) throw ValidationError("LeastSquaresSolver::solve: ridge must be >= 0");
    if (rank_ == 0) return RealVector::Zero(cols_);
    RealVector coeff = u_.transpose() * y;
    for (Index i = 0; i < rank_; ++i) coeff(i) *= sigma_(i) / (sigma_(i) * sigma_(i) + ridge);
    return v_ * coeff;
}

RealMatrix LeastSquaresSolver::solve_many(const RealMatrix& targets) const {
    if (targets.rows() != rows_) throw ShapeError("LeastSquaresSolver::solve_many: target length mismatch");
    if (rank_ == 0) return RealMatrix::Zero(cols_, targets.cols());
    return v_ * (sigma_.cwiseInverse().asDiagonal() * (u_.transpose() * targets));
}

RealVector LeastSquaresSolver::explained_energy(const RealMatrix& targets) const {
    if (targets.rows() != rows_) throw ShapeError("LeastSquaresSolver: target length mismatch");
    if (rank_ == 0) return RealVector::Zero(targets.cols());
    const RealMatrix proj = u_.transpose() * targets;
    return proj.colwise().squaredNorm().transpose();
}

RegressionSolution fit_readout(const RealMatrix& x, const RealVector& target, double ridge) {
    if (target.size() != x.rows()) {
        throw ValidationError("fit_readout: target length " + std::to_string(target.size()) +
                              " does not match " + std::to_string(x.rows()) + " design rows");
    }
    if (!target.allFinite()) throw ValidationError("fit_readout: non-finite target");
    const LeastSquaresSolver solver(x);
    RegressionSolution sol;
    sol.effective_rank = solver.rank();
    sol.degenerate = solver.rank() == 0;
    sol.weights = solver.solve(target, ridge);
    if (x.rows() > 0) sol.train_mse = (x * sol.weights - target).squaredNorm() / static_cast<double>(x.rows());
    return sol;
}

RegressionSolution fit_readout(const DesignMatrix& x, const RealVector& target, double ridge) {
    return fit_readout(x.values, target, ridge);
}

double capacity_c(std::span<const double> y, std::span<const double> target) {
    if (y.size() != target.size()) throw ValidationError("capacity_c: length mismatch");
    if (y.size() < 2) throw ValidationError("capacity_c: need at least 2 samples");
    const auto n = static_cast<double>(y.size());
    double my = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        my += y[i];
        mt += target[i];
    }
    my /= n;
    mt /= n;
    double cov = 0.0, vy = 0.0, vt = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double dy = y[i] - my;
        const double dt = target[i] - mt;
        cov += dy * dt;
        vy += dy * dy;
        vt += dt * dt;
    }
    cov /= n;
    vy /= n;
    vt /= n;
    constexpr double kConstantVariance = 1e-24;
    if (vy < kConstantVariance || vt < kConstantVariance) return 0.0;
    return std::clamp(cov * cov / (vy * vt), 0.0, 1.0);
}

double capacity_c(const RealVector& y, const RealVector& target) {
    return capacity_c(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                      std::span<const double>(target.data(), static_cast<std::size_t>(target.size())));
}

TrainEvalResult train_eval(const DesignMatrix& x, const RealVector& target, const SplitSpec& split,
                           double ridge) {
    x.validate();
    split.validate(x.rows());
    if (target.size() != x.rows()) throw ValidationError("train_eval: target length mismatch");

    const RealMatrix xtr = x.values.middleRows(split.washout, split.train);
    const RealVector ytr = target.segment(split.washout, split.train);
    const RealMatrix xte = x.values.middleRows(split.washout + split.train, split.test);
    const RealVector yte = target.segment(split.washout + split.train, split.test);

    TrainEvalResult r;
    r.split = split;
    r.ridge = ridge;
    r.solution = fit_readout(xtr, ytr, ridge);
    r.c_train = split.train >= 2 ? capacity_c(RealVector(xtr * r.solution.weights), ytr) : 0.0;
    r.c_test = capacity_c(RealVector(xte * r.solution.weights), yte);
    return r;
}

void to_json(nlohmann::json& j, const TrainEvalResult& r) {
    const auto& w = r.solution.weights;
    j = nlohmann::json{{"weights", std::vector<double>(w.begin(), w.end())},
                       {"train_mse", r.solution.train_mse},
                       {"effective_rank", r.solution.effective_rank},
                       {"c_train", r.c_train},
                       {"c_test", r.c_test},
                       {"split", {{"washout", r.split.washout}, {"train", r.split.train}, {"test", r.split.test}}},
                       {"ridge", r.ridge}};
}

}  // namespace qrc

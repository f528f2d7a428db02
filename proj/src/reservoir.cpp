#include "qrc/reservoir.hpp"

#include "qrc/csv.hpp"
#include "qrc/errors.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

namespace qrc {

namespace {

constexpr double kImagResidueTol = 1e-10;

void require_input(double s) {
    if (!(s >= 0.0 && s <= 1.0)) {
        throw ValidationError("input s = " + format_double(s) + " outside [0, 1]");
    }
}

double parity_sign(Index k) { return std::popcount(static_cast<std::uint64_t>(k)) % 2 ? -1.0 : 1.0; }

Eigen::VectorXcd product_state(int n_spins, const std::function<Eigen::Vector2cd(int)>& site_state) {
    Eigen::VectorXcd psi = site_state(1);
    for (int site = 2; site <= n_spins; ++site) {
        const Eigen::Vector2cd f = site_state(site);
        Eigen::VectorXcd next(psi.size() * 2);
        for (Index i = 0; i < psi.size(); ++i) {
            next(2 * i) = psi(i) * f(0);
            next(2 * i + 1) = psi(i) * f(1);
        }
        psi = std::move(next);
    }
    return psi;
}

}  // namespace

void ReservoirConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("ReservoirConfig: dt must be > 0");
    if (observables.empty()) throw ValidationError("ReservoirConfig: observable list is empty");
    realization.validate();
    std::set<std::string> seen;
    for (const auto& o : observables) {
        o.validate(realization.params.n_spins);
        if (!seen.insert(o.label()).second) {
            throw ValidationError("ReservoirConfig: duplicate observable " + o.label());
        }
    }
}

ReservoirConfig ReservoirConfig::with_defaults(DisorderRealization real, double dt) {
    ReservoirConfig c;
    c.dt = dt;
    c.observables = default_observables(real.params.n_spins);
    c.realization = std::move(real);
    return c;
}

NamedInitialState NamedInitialState::parse(const std::string& name) {
    using K = Kind;
    if (name == "all_up_z") return {K::all_up_z, 0};
    if (name == "all_down_z") return {K::all_down_z, 0};
    if (name == "half_half_z") return {K::half_half_z, 0};
    if (name == "half_half_x") return {K::half_half_x, 0};
    if (name == "maximal_coherent") return {K::maximal_coherent, 0};
    if (name == "random") return {K::random, 0};
    if (name.rfind("random:", 0) == 0) {
        try {
            return {K::random, std::stoull(name.substr(7))};
        } catch (const std::exception&) {
        }
    }
    throw ValidationError("unknown initial state '" + name + "'");
}

std::string NamedInitialState::name() const {
    switch (kind) {
        case Kind::all_up_z: return "all_up_z";
        case Kind::all_down_z: return "all_down_z";
        case Kind::half_half_z: return "half_half_z";
        case Kind::half_half_x: return "half_half_x";
        case Kind::maximal_coherent: return "maximal_coherent";
        case Kind::random: return "random:" + std::to_string(seed);
    }
    return {};
}

DensityMatrix make_initial_state(const NamedInitialState& init, int n_spins) {
    if (n_spins < 1 || n_spins > 12) throw ValidationError("make_initial_state: bad n_spins");
    const double r = 1.0 / std::sqrt(2.0);
    const Eigen::Vector2cd up(1.0, 0.0), down(0.0, 1.0), plus(r, r), minus(r, -r);
    const int half = n_spins / 2;
    using K = NamedInitialState::Kind;
    switch (init.kind) {
        case K::all_up_z:
            return DensityMatrix::pure(product_state(n_spins, [&](int) { return up; }));
        case K::all_down_z:
            return DensityMatrix::pure(product_state(n_spins, [&](int) { return down; }));
        case K::half_half_z:
            return DensityMatrix::pure(
                product_state(n_spins, [&](int site) { return site <= half ? up : down; }));
        case K::half_half_x:
            return DensityMatrix::pure(
                product_state(n_spins, [&](int site) { return site <= half ? plus : minus; }));
        case K::maximal_coherent: {
            const Index dim = Index{1} << n_spins;
            return DensityMatrix(ComplexMatrix::Constant(dim, dim, 1.0 / static_cast<double>(dim)));
        }
        case K::random: {
            std::mt19937_64 rng(init.seed);
            return random_density_matrix(Index{1} << n_spins, rng);
        }
    }
    throw ValidationError("make_initial_state: unknown kind");
}

DensityMatrix encode_input(double s) {
    require_input(s);
    Eigen::VectorXcd psi(2);
    psi << std::sqrt(1.0 - s), std::sqrt(s);
    return DensityMatrix::pure(psi);
}

// ---------------------------------------------------------------------------

ReservoirDynamics::ReservoirDynamics(const DisorderRealization& real, double dt, bool project_coherences)
    : n_spins_(real.params.n_spins), h_(build_real_hamiltonian(real)) {
    RealEigenSystem eig = symmetric_eig(h_);
    energies_ = std::move(eig.values);
    vectors_ = std::move(eig.vectors);
    set_dt(dt);
    if (project_coherences) project_coherence_ops();
}

void ReservoirDynamics::project_coherence_ops() {
    if (n_spins_ > kMaxProjectedSpins) return;
    const Index m = dim();
    auto xs = std::make_shared<std::vector<RealMatrix>>();
    auto as = std::make_shared<std::vector<RealMatrix>>();
    RealMatrix flipped(m, m);
    for (int site = 1; site <= n_spins_; ++site) {
        const Index bit = site_bit(site, n_spins_);
        for (Index k = 0; k < m; ++k) flipped.row(k) = vectors_.row(k ^ bit);
        xs->push_back(vectors_.transpose() * flipped);
        // A(k, k^bit) = +1 when bit is clear in k, -1 otherwise.
        for (Index k = 0; k < m; ++k) {
            if (k & bit) flipped.row(k) *= -1.0;
        }
        as->push_back(vectors_.transpose() * flipped);
    }
    x_proj_ = std::move(xs);
    a_proj_ = std::move(as);
}

void ReservoirDynamics::set_dt(double dt) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw ValidationError("ReservoirDynamics: dt must be >= 0");
    dt_ = dt;
    const Index m = dim();
    cos_.resize(m, m);
    sin_.resize(m, m);
    for (Index k = 0; k < m; ++k) {
        for (Index j = 0; j < m; ++j) {
            const double phase = (energies_(j) - energies_(k)) * dt;
            cos_(j, k) = std::cos(phase);
            sin_(j, k) = std::sin(phase);
        }
    }
}

std::shared_ptr<const ReservoirDynamics> ReservoirDynamics::with_dt(double dt) const {
    auto copy = std::shared_ptr<ReservoirDynamics>(new ReservoirDynamics());
    copy->n_spins_ = n_spins_;
    copy->h_ = h_;
    copy->energies_ = energies_;
    copy->vectors_ = vectors_;
    copy->x_proj_ = x_proj_;
    copy->a_proj_ = a_proj_;
    copy->set_dt(dt);
    return copy;
}

EigenSystem ReservoirDynamics::eigensystem() const {
    return EigenSystem{energies_, vectors_.cast<Complex>()};
}

ComplexMatrix ReservoirDynamics::propagator() const { return qrc::propagator(eigensystem(), dt_); }

// ---------------------------------------------------------------------------

ReservoirState::ReservoirState(std::shared_ptr<const ReservoirDynamics> dynamics, const DensityMatrix& rho)
    : dyn_(std::move(dynamics)) {
    if (!dyn_) throw ValidationError("ReservoirState: null dynamics");
    if (rho.dim() != dyn_->dim()) throw ShapeError("ReservoirState: state dimension mismatch");
    const RealMatrix& v = dyn_->vectors_;
    br_.noalias() = v.transpose() * (rho.matrix().real() * v);
    bi_.noalias() = v.transpose() * (rho.matrix().imag() * v);
    refresh_projection();
}

ReservoirState::ReservoirState(const DisorderRealization& real, double dt, const DensityMatrix& rho)
    : ReservoirState(std::make_shared<const ReservoirDynamics>(real, dt), rho) {}

void ReservoirState::set_dt(double dt) {
    if (dt != dyn_->dt()) dyn_ = dyn_->with_dt(dt);
}

void ReservoirState::refresh_projection() {
    const RealMatrix& v = dyn_->vectors_;
    pr_.noalias() = v * br_;
    pi_.noalias() = v * bi_;
}

RealVector ReservoirState::diagonal() const {
    return pr_.cwiseProduct(dyn_->vectors_).rowwise().sum();
}

DensityMatrix ReservoirState::rho() const {
    const RealMatrix& v = dyn_->vectors_;
    RealMatrix rr = pr_ * v.transpose();
    RealMatrix ri = pi_ * v.transpose();
    ComplexMatrix out(rr.rows(), rr.cols());
    out.real() = 0.5 * (rr + rr.transpose());
    out.imag() = 0.5 * (ri - ri.transpose());
    return DensityMatrix(std::move(out));
}

double ReservoirState::distance(const ReservoirState& other) const {
    if (dyn_ != other.dyn_ && dyn_->vectors_ != other.dyn_->vectors_) {
        throw ValidationError("ReservoirState::distance: states live on different eigenbases");
    }
    return std::sqrt((br_ - other.br_).squaredNorm() + (bi_ - other.bi_).squaredNorm());
}

void ReservoirState::inject_and_evolve(double s, StepTrace* trace) {
    require_input(s);
    const ReservoirDynamics& d = *dyn_;
    const Index m = d.dim();
    const Index half = m / 2;
    const RealMatrix& v = d.vectors_;

    // Reduced state of spins 2..N: sum of the two diagonal blocks of P V^T.
    RealMatrix sr(half, half);
    RealMatrix si(half, half);
    sr.noalias() = pr_.topRows(half) * v.topRows(half).transpose();
    sr.noalias() += pr_.bottomRows(half) * v.bottomRows(half).transpose();
    si.noalias() = pi_.topRows(half) * v.topRows(half).transpose();
    si.noalias() += pi_.bottomRows(half) * v.bottomRows(half).transpose();
    sr = 0.5 * (sr + sr.transpose()).eval();
    si = 0.5 * (si - si.transpose()).eval();

    const double a = std::sqrt(1.0 - s);
    const double b = std::sqrt(s);

    if (trace) {
        // Tr(H (psi psi^T (x) sigma)) evaluated blockwise in the computational basis.
        const RealMatrix& hm = d.h_;
        const double e00 = hm.topLeftCorner(half, half).cwiseProduct(sr).sum();
        const double e11 = hm.bottomRightCorner(half, half).cwiseProduct(sr).sum();
        const double e01 = hm.topRightCorner(half, half).cwiseProduct(sr).sum();
        const double e10 = hm.bottomLeftCorner(half, half).cwiseProduct(sr).sum();
        trace->energy_post_inject = a * a * e00 + b * b * e11 + a * b * (e01 + e10);
    }

    // V^T (psi psi^T (x) sigma) V = W^T sigma W with W = a V_top + b V_bottom.
    const RealMatrix w = a * v.topRows(half) + b * v.bottomRows(half);
    RealMatrix tmp(half, m);
    RealMatrix ar(m, m);
    RealMatrix ai(m, m);
    tmp.noalias() = sr * w;
    ar.noalias() = w.transpose() * tmp;
    tmp.noalias() = si * w;
    ai.noalias() = w.transpose() * tmp;

    // Evolution is a phase on each eigenbasis coherence.
    br_ = ar.cwiseProduct(d.cos_) + ai.cwiseProduct(d.sin_);
    bi_ = ai.cwiseProduct(d.cos_) - ar.cwiseProduct(d.sin_);

    const double tr = br_.trace();
    if (!(tr > 0.0) || !std::isfinite(tr)) throw NumericError("inject_and_evolve: trace collapsed");
    br_ /= tr;
    bi_ /= tr;
    refresh_projection();

    if (trace) {
        trace->trace_error = std::abs(tr - 1.0);
        trace->energy_post_evolve = d.energies_.dot(br_.diagonal());
        const RealVector diag = diagonal();
        double p = 0.0;
        for (Index k = 0; k < m; ++k) p += parity_sign(k) * diag(k);
        trace->parity = p;
    }
}

RealVector ReservoirState::measure(std::span<const ObservableDescriptor> observables) const {
    const ReservoirDynamics& d = *dyn_;
    const int n = d.n_spins();
    const Index m = d.dim();
    const RealMatrix& v = d.vectors_;
    const RealVector diag = diagonal();
    RealVector out(static_cast<Index>(observables.size()));
    using Kind = ObservableDescriptor::Kind;
    for (std::size_t o = 0; o < observables.size(); ++o) {
        const ObservableDescriptor& desc = observables[o];
        desc.validate(n);
        double acc = 0.0;
        switch (desc.kind) {
            case Kind::single: {
                const Index bit = site_bit(desc.site_i, n);
                if (desc.axis == Axis::z) {
                    for (Index k = 0; k < m; ++k) acc += (k & bit ? -1.0 : 1.0) * diag(k);
                    break;
                }
                const bool is_x = desc.axis == Axis::x;
                if (d.x_proj_) {
                    // Tr(X rho) = sum X~ o B_r; Tr(Y rho) = sum A~^T o B_i.
                    const auto site = static_cast<std::size_t>(desc.site_i - 1);
                    acc = is_x ? (*d.x_proj_)[site].cwiseProduct(br_).sum()
                               : -(*d.a_proj_)[site].cwiseProduct(bi_).sum();
                    break;
                }
                // rho(k^bit, k) = sum_j P(k^bit, j) V(k, j). With m a power of two the
                // flip acts on the flat column-major index, pairing blocks of length bit.
                const RealMatrix& p = is_x ? pr_ : pi_;
                using Stride = Eigen::OuterStride<>;
                using Blocks = Eigen::Map<const RealMatrix, 0, Stride>;
                const Index nb = m * m / (2 * bit);
                const Blocks p_lo(p.data(), bit, nb, Stride(2 * bit));
                const Blocks p_hi(p.data() + bit, bit, nb, Stride(2 * bit));
                const Blocks v_lo(v.data(), bit, nb, Stride(2 * bit));
                const Blocks v_hi(v.data() + bit, bit, nb, Stride(2 * bit));
                const double lo = p_hi.cwiseProduct(v_lo).sum();  // k with the bit clear
                const double hi = p_lo.cwiseProduct(v_hi).sum();
                acc = is_x ? lo + hi : lo - hi;
                break;
            }
            case Kind::pair_zz: {
                const Index mask = site_bit(desc.site_i, n) | site_bit(desc.site_j, n);
                for (Index k = 0; k < m; ++k) acc += parity_sign(k & mask) * diag(k);
                break;
            }
            case Kind::parity:
                for (Index k = 0; k < m; ++k) acc += parity_sign(k) * diag(k);
                break;
            case Kind::energy:
                acc = d.energies_.dot(br_.diagonal());
                break;
        }
        out(static_cast<Index>(o)) = acc;
    }
    return out;
}

ReservoirState inject_and_evolve(const ReservoirState& state, double s) {
    ReservoirState next = state;
    next.inject_and_evolve(s);
    return next;
}

// ---------------------------------------------------------------------------

RealVector measure(const DensityMatrix& rho, int n_spins, std::span<const ObservableDescriptor> observables,
                   const RealMatrix* hamiltonian) {
    const Index dim = rho.dim();
    if (dim != (Index{1} << n_spins)) throw ShapeError("measure: state dimension does not match n_spins");
    const ComplexMatrix& m = rho.matrix();
    RealVector out(static_cast<Index>(observables.size()));
    using Kind = ObservableDescriptor::Kind;
    for (std::size_t o = 0; o < observables.size(); ++o) {
        const ObservableDescriptor& desc = observables[o];
        desc.validate(n_spins);
        Complex acc = 0.0;
        switch (desc.kind) {
            case Kind::single: {
                const Index bit = site_bit(desc.site_i, n_spins);
                for (Index k = 0; k < dim; ++k) {
                    const bool one = (k & bit) != 0;
                    switch (desc.axis) {
                        case Axis::z: acc += (one ? -1.0 : 1.0) * m(k, k); break;
                        case Axis::x: acc += m(k ^ bit, k); break;
                        // <k|Y|k^bit> is -i when bit k is 0, +i when it is 1.
                        case Axis::y: acc += Complex(0.0, one ? 1.0 : -1.0) * m(k ^ bit, k); break;
                    }
                }
                break;
            }
            case Kind::pair_zz: {
                const Index mask = site_bit(desc.site_i, n_spins) | site_bit(desc.site_j, n_spins);
                for (Index k = 0; k < dim; ++k) acc += parity_sign(k & mask) * m(k, k);
                break;
            }
            case Kind::parity:
                for (Index k = 0; k < dim; ++k) acc += parity_sign(k) * m(k, k);
                break;
            case Kind::energy:
                if (!hamiltonian) throw ValidationError("measure: energy observable needs a Hamiltonian");
                if (hamiltonian->rows() != dim) throw ShapeError("measure: Hamiltonian dimension mismatch");
                acc = Complex(hamiltonian->cwiseProduct(m.real().transpose()).sum(),
                              hamiltonian->cwiseProduct(m.imag().transpose()).sum());
                break;
        }
        if (std::abs(acc.imag()) > kImagResidueTol) {
            throw NumericError("measure: expectation of " + desc.label() + " has imaginary part " +
                               format_double(acc.imag()));
        }
        out(static_cast<Index>(o)) = acc.real();
    }
    return out;
}

RealVector measure(const ReservoirState& state, std::span<const ObservableDescriptor> observables) {
    return state.measure(observables);
}

Trajectory run_trajectory(ReservoirState& state, std::span<const ObservableDescriptor> observables,
                          std::span<const double> inputs, bool record_conserved) {
    if (observables.empty()) throw ValidationError("run_trajectory: no observables");
    const auto rows = static_cast<Index>(inputs.size());
    const auto o = static_cast<Index>(observables.size());
    Trajectory traj;
    traj.inputs.assign(inputs.begin(), inputs.end());
    traj.design.values.resize(rows, o + 1);
    for (const auto& desc : observables) traj.design.labels.push_back(desc.label());
    traj.design.labels.push_back("bias");
    if (record_conserved) traj.conserved.resize(rows, 3);

    StepTrace step;
    for (Index k = 0; k < rows; ++k) {
        state.inject_and_evolve(inputs[static_cast<std::size_t>(k)], &step);
        traj.max_trace_error = std::max(traj.max_trace_error, step.trace_error);
        traj.design.values.row(k).head(o) = state.measure(observables).transpose();
        traj.design.values(k, o) = 1.0;
        if (record_conserved) {
            traj.conserved(k, 0) = step.energy_post_inject;
            traj.conserved(k, 1) = step.energy_post_evolve;
            traj.conserved(k, 2) = step.parity;
        }
    }
    return traj;
}

Trajectory run_trajectory(const ReservoirConfig& config, std::span<const double> inputs,
                          const NamedInitialState& init, bool record_conserved) {
    config.validate();
    ReservoirState state(config.realization, config.dt,
                         make_initial_state(init, config.realization.params.n_spins));
    return run_trajectory(state, config.observables, inputs, record_conserved);
}

ConvergenceSeries convergence_run(std::shared_ptr<const ReservoirDynamics> dynamics,
                                  std::span<const double> inputs, const DensityMatrix& rho_a,
                                  const DensityMatrix& rho_b) {
    ReservoirState a(dynamics, rho_a);
    ReservoirState b(dynamics, rho_b);
    ConvergenceSeries out;
    out.raw.reserve(inputs.size() + 1);
    // Frobenius distance is basis independent, so it is taken in the eigenbasis.
    out.raw.push_back(a.distance(b));
    for (double s : inputs) {
        a.inject_and_evolve(s);
        b.inject_and_evolve(s);
        out.raw.push_back(a.distance(b));
    }
    out.clamped.reserve(out.raw.size());
    for (double d : out.raw) out.clamped.push_back(std::max(d, ConvergenceSeries::kFloor));
    return out;
}

ConvergenceSeries convergence_run(const ReservoirConfig& config, std::span<const double> inputs,
                                  std::uint64_t seed_a, std::uint64_t seed_b) {
    config.validate();
    const int n = config.realization.params.n_spins;
    auto dyn = std::make_shared<const ReservoirDynamics>(config.realization, config.dt);
    return convergence_run(dyn, inputs, make_initial_state(NamedInitialState::random(seed_a), n),
                           make_initial_state(NamedInitialState::random(seed_b), n));
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    std::vector<std::string> header{"step", "input"};
    header.insert(header.end(), traj.design.labels.begin(), traj.design.labels.end());
    const bool conserved = traj.conserved.rows() > 0;
    if (conserved) {
        header.insert(header.end(), {"e_post_inject", "e_post_evolve", "parity"});
    }
    CsvWriter csv(os, header);
    for (Index k = 0; k < traj.design.rows(); ++k) {
        csv.cell(static_cast<long long>(k)).cell(traj.inputs[static_cast<std::size_t>(k)]);
        for (Index c = 0; c < traj.design.cols(); ++c) csv.cell(traj.design.values(k, c));
        if (conserved) {
            for (Index c = 0; c < 3; ++c) csv.cell(traj.conserved(k, c));
        }
        csv.end_row();
    }
}

void write_convergence_csv(std::ostream& os, const ConvergenceSeries& series) {
    CsvWriter csv(os, {"step", "distance_raw", "distance_clamped"});
    for (std::size_t k = 0; k < series.raw.size(); ++k) {
        csv.cell(k).cell(series.raw[k]).cell(series.clamped[k]);
        csv.end_row();
    }
}

}  // namespace qrc

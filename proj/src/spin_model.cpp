#include "qrc/spin_model.hpp"

#include "qrc/errors.hpp"

#include <bit>
#include <cmath>
#include <random>

namespace qrc {

namespace {

constexpr int kMinSpins = 2;
constexpr int kMaxSpins = 12;

int popcount(Index k) { return std::popcount(static_cast<std::uint64_t>(k)); }

double diagonal_energy(const DisorderRealization& real, Index k) {
    const int n = real.params.n_spins;
    double e = 0.0;
    for (int site = 1; site <= n; ++site) {
        const double z = (k & site_bit(site, n)) ? -1.0 : 1.0;
        e += 0.5 * (real.params.h + real.fields(site - 1)) * z;
    }
    return e;
}

// Calls emit(row, col, value) for every nonzero of H, including the diagonal.
template <typename Emit>
void for_each_entry(const DisorderRealization& real, Emit&& emit) {
    const int n = real.params.n_spins;
    const Index dim = real.params.dim();
    for (Index k = 0; k < dim; ++k) {
        emit(k, k, diagonal_energy(real, k));
        for (int i = 2; i <= n; ++i) {
            for (int j = 1; j < i; ++j) {
                const double jij = real.couplings(i - 1, j - 1);
                if (jij == 0.0) continue;
                emit(k, k ^ (site_bit(i, n) | site_bit(j, n)), jij);
            }
        }
    }
}

}  // namespace

void ModelParams::validate() const {
    if (n_spins < kMinSpins || n_spins > kMaxSpins) {
        throw ValidationError("ModelParams: n_spins must lie in [2, 12], got " +
                              std::to_string(n_spins));
    }
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("ModelParams: w must be >= 0");
    if (!(j_s > 0.0) || !std::isfinite(j_s)) throw ValidationError("ModelParams: j_s must be > 0");
    if (!std::isfinite(h)) throw ValidationError("ModelParams: h must be finite");
}

void DisorderRealization::validate() const {
    params.validate();
    const int n = params.n_spins;
    if (couplings.rows() != n || couplings.cols() != n || fields.size() != n) {
        throw ShapeError("DisorderRealization: coupling/field sizes do not match n_spins");
    }
    for (int i = 0; i < n; ++i) {
        if (couplings(i, i) != 0.0) throw ValidationError("DisorderRealization: nonzero J_ii");
        if (std::abs(fields(i)) > params.w) {
            throw ValidationError("DisorderRealization: field outside [-w, w]");
        }
        for (int j = 0; j < i; ++j) {
            if (couplings(i, j) != couplings(j, i)) {
                throw ValidationError("DisorderRealization: couplings not symmetric");
            }
            if (std::abs(couplings(i, j)) > 0.5 * params.j_s) {
                throw ValidationError("DisorderRealization: coupling outside [-j_s/2, j_s/2]");
            }
        }
    }
}

DisorderRealization sample_realization(const ModelParams& params) {
    params.validate();
    const int n = params.n_spins;
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> coupling(-0.5 * params.j_s, 0.5 * params.j_s);

    DisorderRealization real;
    real.params = params;
    real.couplings = RealMatrix::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            real.couplings(i, j) = coupling(rng);
            real.couplings(j, i) = real.couplings(i, j);
        }
    }
    real.fields = RealVector::Zero(n);
    if (params.w > 0.0) {
        std::uniform_real_distribution<double> field(-params.w, params.w);
        for (int i = 0; i < n; ++i) real.fields(i) = field(rng);
    }
    return real;
}

RealMatrix build_real_hamiltonian(const DisorderRealization& real) {
    real.validate();
    const Index dim = real.params.dim();
    RealMatrix h = RealMatrix::Zero(dim, dim);
    for_each_entry(real, [&](Index r, Index c, double v) { h(r, c) += v; });
    return h;
}

ComplexMatrix build_hamiltonian(const DisorderRealization& real) {
    return build_real_hamiltonian(real).cast<Complex>();
}

RealMatrix build_real_sector_hamiltonian(const DisorderRealization& real, Parity sector) {
    real.validate();
    const Index dim = real.params.dim();
    const int want = sector == Parity::even ? 0 : 1;
    std::vector<Index> position(static_cast<std::size_t>(dim), -1);
    Index count = 0;
    for (Index k = 0; k < dim; ++k) {
        if (popcount(k) % 2 == want) position[static_cast<std::size_t>(k)] = count++;
    }
    RealMatrix h = RealMatrix::Zero(count, count);
    for_each_entry(real, [&](Index r, Index c, double v) {
        const Index pr = position[static_cast<std::size_t>(r)];
        if (pr < 0) return;
        // XX terms flip two bits, so c lies in the same sector as r.
        h(pr, position[static_cast<std::size_t>(c)]) += v;
    });
    return h;
}

ComplexMatrix build_sector_hamiltonian(const DisorderRealization& real, Parity sector) {
    return build_real_sector_hamiltonian(real, sector).cast<Complex>();
}

ObservableDescriptor ObservableDescriptor::single(int site, Axis axis) {
    ObservableDescriptor d;
    d.kind = Kind::single;
    d.site_i = site;
    d.axis = axis;
    return d;
}

ObservableDescriptor ObservableDescriptor::pair_zz(int i, int j) {
    ObservableDescriptor d;
    d.kind = Kind::pair_zz;
    d.site_i = std::min(i, j);
    d.site_j = std::max(i, j);
    d.axis = Axis::z;
    return d;
}

ObservableDescriptor ObservableDescriptor::energy() {
    ObservableDescriptor d;
    d.kind = Kind::energy;
    d.site_i = 0;
    return d;
}

ObservableDescriptor ObservableDescriptor::parity() {
    ObservableDescriptor d;
    d.kind = Kind::parity;
    d.site_i = 0;
    return d;
}

void ObservableDescriptor::validate(int n_spins) const {
    auto in_range = [&](int s) { return s >= 1 && s <= n_spins; };
    switch (kind) {
        case Kind::single:
            if (!in_range(site_i)) {
                throw ValidationError("observable " + label() + ": site out of range");
            }
            break;
        case Kind::pair_zz:
            if (!in_range(site_i) || !in_range(site_j) || site_i >= site_j) {
                throw ValidationError("observable " + label() +
                                      ": pair sites must be distinct, in range, and ordered");
            }
            break;
        case Kind::energy:
        case Kind::parity:
            break;
    }
}

std::string ObservableDescriptor::label() const {
    switch (kind) {
        case Kind::single: {
            const char a = axis == Axis::x ? 'x' : axis == Axis::y ? 'y' : 'z';
            return std::string(1, a) + std::to_string(site_i);
        }
        case Kind::pair_zz:
            return "zz" + std::to_string(site_i) + "_" + std::to_string(site_j);
        case Kind::energy:
            return "energy";
        case Kind::parity:
            return "parity";
    }
    return {};
}

ObservableDescriptor ObservableDescriptor::parse(const std::string& label) {
    auto to_int = [&](const std::string& s) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) {
            throw ValidationError("cannot parse observable label '" + label + "'");
        }
        return v;
    };
    if (label == "energy") return energy();
    if (label == "parity") return parity();
    if (label.rfind("zz", 0) == 0) {
        const auto us = label.find('_');
        if (us == std::string::npos) throw ValidationError("cannot parse observable label '" + label + "'");
        const int i = to_int(label.substr(2, us - 2));
        const int j = to_int(label.substr(us + 1));
        ObservableDescriptor d;
        d.kind = Kind::pair_zz;
        d.site_i = i;
        d.site_j = j;
        return d;
    }
    if (!label.empty() && (label[0] == 'x' || label[0] == 'y' || label[0] == 'z')) {
        const Axis a = label[0] == 'x' ? Axis::x : label[0] == 'y' ? Axis::y : Axis::z;
        return single(to_int(label.substr(1)), a);
    }
    throw ValidationError("cannot parse observable label '" + label + "'");
}

std::vector<ObservableDescriptor> default_observables(int n_spins) {
    std::vector<ObservableDescriptor> out;
    for (Axis a : {Axis::x, Axis::y, Axis::z}) {
        for (int s = 1; s <= n_spins; ++s) out.push_back(ObservableDescriptor::single(s, a));
    }
    for (int i = 1; i <= n_spins; ++i) {
        for (int j = i + 1; j <= n_spins; ++j) out.push_back(ObservableDescriptor::pair_zz(i, j));
    }
    return out;
}

ComplexMatrix observable_operator(const ObservableDescriptor& desc, int n_spins,
                                  const std::optional<ComplexMatrix>& h_matrix) {
    desc.validate(n_spins);
    const Index dim = Index{1} << n_spins;
    using Kind = ObservableDescriptor::Kind;
    if (desc.kind == Kind::energy) {
        if (!h_matrix) throw ValidationError("observable_operator: energy requires a Hamiltonian");
        if (h_matrix->rows() != dim || h_matrix->cols() != dim) {
            throw ShapeError("observable_operator: Hamiltonian dimension mismatch");
        }
        return *h_matrix;
    }
    if (desc.kind == Kind::parity) {
        ComplexMatrix p = ComplexMatrix::Zero(dim, dim);
        for (Index k = 0; k < dim; ++k) p(k, k) = popcount(k) % 2 ? -1.0 : 1.0;
        return p;
    }
    // Kronecker placement: identity on every site except the chosen ones.
    auto factor = [&](int site) -> ComplexMatrix {
        if (desc.kind == Kind::single && site == desc.site_i) {
            return desc.axis == Axis::x ? pauli_x() : desc.axis == Axis::y ? pauli_y() : pauli_z();
        }
        if (desc.kind == Kind::pair_zz && (site == desc.site_i || site == desc.site_j)) {
            return pauli_z();
        }
        return ComplexMatrix::Identity(2, 2);
    };
    ComplexMatrix op = factor(1);
    for (int site = 2; site <= n_spins; ++site) op = kron(op, factor(site));
    return op;
}

void to_json(nlohmann::json& j, const DisorderRealization& real) {
    const int n = real.params.n_spins;
    std::vector<double> lower;
    for (int i = 1; i < n; ++i) {
        for (int k = 0; k < i; ++k) lower.push_back(real.couplings(i, k));
    }
    j = nlohmann::json{{"n_spins", n},
                       {"h", real.params.h},
                       {"w", real.params.w},
                       {"j_s", real.params.j_s},
                       {"seed", real.params.seed},
                       {"couplings", lower},
                       {"fields", std::vector<double>(real.fields.begin(), real.fields.end())}};
}

void from_json(const nlohmann::json& j, DisorderRealization& real) {
    real.params.n_spins = j.at("n_spins").get<int>();
    real.params.h = j.at("h").get<double>();
    real.params.w = j.at("w").get<double>();
    real.params.j_s = j.value("j_s", 1.0);
    real.params.seed = j.at("seed").get<std::uint64_t>();
    real.params.validate();
    const int n = real.params.n_spins;
    const auto lower = j.at("couplings").get<std::vector<double>>();
    const auto fields = j.at("fields").get<std::vector<double>>();
    if (lower.size() != static_cast<std::size_t>(n * (n - 1) / 2) ||
        fields.size() != static_cast<std::size_t>(n)) {
        throw ShapeError("realization JSON: coupling/field counts do not match n_spins");
    }
    real.couplings = RealMatrix::Zero(n, n);
    std::size_t idx = 0;
    for (int i = 1; i < n; ++i) {
        for (int k = 0; k < i; ++k) {
            real.couplings(i, k) = real.couplings(k, i) = lower[idx++];
        }
    }
    real.fields = Eigen::Map<const RealVector>(fields.data(), n);
    real.validate();
}

}  // namespace qrc

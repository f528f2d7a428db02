#include "qrc/tasks.hpp"

#include "qrc/csv.hpp"
#include "qrc/errors.hpp"
#include "qrc/learn.hpp"
#include "qrc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

namespace qrc {

namespace {

constexpr std::size_t kMaxIpcTargets = 1'000'000;
constexpr double kNarmaDivergence = 1e3;
constexpr Index kBatchColumns = 256;

void extend_terms(int remaining, int below, std::vector<IpcTerm>& acc, std::vector<IpcTarget>& out) {
    if (remaining == 0) {
        IpcTarget t;
        t.terms.assign(acc.rbegin(), acc.rend());
        out.push_back(std::move(t));
        if (out.size() > kMaxIpcTargets) {
            throw SizeError("IPC enumeration exceeds 10^6 targets; reduce the delay windows");
        }
        return;
    }
    for (int delay = below - 1; delay >= 0; --delay) {
        for (int deg = 1; deg <= remaining; ++deg) {
            acc.push_back({delay, deg});
            extend_terms(remaining - deg, delay, acc, out);
            acc.pop_back();
        }
    }
}

// P_d(s~_k) for d = 0..d_max and every k, stored one column per degree.
class LegendreTable {
public:
    LegendreTable(std::span<const double> s, int d_max)
        : d_max_(d_max), zero_(static_cast<std::size_t>(d_max) + 1), values_(static_cast<Index>(s.size()), d_max + 1) {
        for (int d = 0; d <= d_max; ++d) zero_[static_cast<std::size_t>(d)] = legendre_eval(d, 0.0);
        for (Index k = 0; k < values_.rows(); ++k) {
            const double x = s[static_cast<std::size_t>(k)];
            double p0 = 1.0, p1 = x;
            values_(k, 0) = p0;
            if (d_max >= 1) values_(k, 1) = p1;
            for (int n = 1; n < d_max; ++n) {
                const double p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
                values_(k, n + 1) = p2;
                p0 = p1;
                p1 = p2;
            }
        }
    }

    double at(int degree, Index k) const {
        return k < 0 ? zero_[static_cast<std::size_t>(degree)] : values_(k, degree);
    }
    int d_max() const { return d_max_; }

private:
    int d_max_;
    std::vector<double> zero_;
    RealMatrix values_;
};

struct Scores {
    std::vector<double> in_sample;
    std::vector<double> held_out;
};

// Solvers for the full post-washout window and for its first half.
struct WindowSolvers {
    WindowSolvers(const RealMatrix& x, Index offset, bool with_held_out)
        : offset(offset), full(x.bottomRows(x.rows() - offset)) {
        const Index rows = x.rows() - offset;
        train_rows = rows / 2;
        if (with_held_out && train_rows >= 1 && rows - train_rows >= 1) {
            train.emplace(x.middleRows(offset, train_rows));
            test = x.bottomRows(rows - train_rows);
        }
    }

    Index offset;
    LeastSquaresSolver full;
    Index train_rows = 0;
    std::optional<LeastSquaresSolver> train;
    RealMatrix test;
};

// In-sample capacity ||U^T y||^2 / ||y||^2 over the full window and, when
// requested, the held-out score 1 - ||X_b w_a - y_b||^2 / ||y_b||^2.
Scores batch_capacities(const std::vector<IpcTarget>& targets, const LegendreTable& table, const WindowSolvers& s) {
    const Index rows = s.full.rows();
    Scores out;
    out.in_sample.assign(targets.size(), 0.0);
    if (s.train) out.held_out.assign(targets.size(), 0.0);
    for (std::size_t begin = 0; begin < targets.size(); begin += kBatchColumns) {
        const std::size_t end = std::min(targets.size(), begin + static_cast<std::size_t>(kBatchColumns));
        RealMatrix y(rows, static_cast<Index>(end - begin));
        for (std::size_t t = begin; t < end; ++t) {
            auto col = y.col(static_cast<Index>(t - begin));
            col.setOnes();
            for (const IpcTerm& term : targets[t].terms) {
                for (Index r = 0; r < rows; ++r) col(r) *= table.at(term.degree, s.offset + r - term.delay);
            }
        }
        const RealVector explained = s.full.explained_energy(y);
        const RealVector norms = y.colwise().squaredNorm().transpose();
        for (std::size_t t = begin; t < end; ++t) {
            const Index c = static_cast<Index>(t - begin);
            out.in_sample[t] = norms(c) > 0.0 ? std::clamp(explained(c) / norms(c), 0.0, 1.0) : 0.0;
        }
        if (!s.train) continue;
        const RealMatrix w = s.train->solve_many(y.topRows(s.train_rows));
        const Index test_rows = rows - s.train_rows;
        const RealVector resid = (s.test * w - y.bottomRows(test_rows)).colwise().squaredNorm().transpose();
        const RealVector test_norms = y.bottomRows(test_rows).colwise().squaredNorm().transpose();
        for (std::size_t t = begin; t < end; ++t) {
            const Index c = static_cast<Index>(t - begin);
            out.held_out[t] = test_norms(c) > 0.0 ? 1.0 - resid(c) / test_norms(c) : 0.0;
        }
    }
    return out;
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
    return v[idx];
}

int window_for(const DelayWindows& windows, int degree) {
    const auto it = windows.find(degree);
    if (it == windows.end() || it->second < 1) {
        throw ValidationError("IPC: no delay window for degree " + std::to_string(degree));
    }
    return it->second;
}

}  // namespace

std::vector<double> gen_input(const InputSpec& spec, std::size_t length, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> out(length);
    if (spec.kind == InputSpec::Kind::binary) {
        std::bernoulli_distribution coin(0.5);
        for (auto& v : out) v = coin(rng) ? 1.0 : 0.0;
        return out;
    }
    if (!(spec.lo < spec.hi) || !std::isfinite(spec.lo) || !std::isfinite(spec.hi)) {
        throw ValidationError("gen_input: need finite lo < hi");
    }
    std::uniform_real_distribution<double> dist(spec.lo, spec.hi);
    for (auto& v : out) v = dist(rng);
    return out;
}

std::vector<double> narma_target(std::span<const double> inputs, int n) {
    if (n < 1) throw ValidationError("narma_target: n must be >= 1");
    const auto len = static_cast<long>(inputs.size());
    if (std::any_of(inputs.begin(), inputs.end(), [](double s) { return s < 0.0 || s > 0.2; })) {
        std::clog << "narma_target: inputs outside [0, 0.2] may diverge\n";
    }
    auto s_at = [&](long k) { return k < 0 ? 0.0 : inputs[static_cast<std::size_t>(k)]; };
    std::vector<double> y(inputs.size(), 0.0);
    auto y_at = [&](long k) { return k < 0 ? 0.0 : y[static_cast<std::size_t>(k)]; };
    for (long k = 0; k < len; ++k) {
        double window = 0.0;
        for (long j = 1; j <= n; ++j) window += y_at(k - j);
        const double prev = y_at(k - 1);
        const double v = 0.3 * prev + 0.05 * prev * window + 1.5 * s_at(k - n) * s_at(k - 1) + 0.1;
        if (!(std::abs(v) <= kNarmaDivergence)) {
            throw NumericError("narma_target: sequence diverged at step " + std::to_string(k));
        }
        y[static_cast<std::size_t>(k)] = v;
    }
    return y;
}

std::vector<double> delay_target(std::span<const double> inputs, int tau) {
    if (tau < 0) throw ValidationError("delay_target: tau must be >= 0");
    std::vector<double> y(inputs.size(), 0.0);
    for (std::size_t k = static_cast<std::size_t>(tau); k < inputs.size(); ++k) {
        y[k] = inputs[k - static_cast<std::size_t>(tau)];
    }
    return y;
}

double legendre_eval(int degree, double x) {
    if (degree < 0) throw ValidationError("legendre_eval: degree must be >= 0");
    if (degree == 0) return 1.0;
    double p0 = 1.0, p1 = x;
    for (int n = 1; n < degree; ++n) {
        const double p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

int IpcTarget::total_degree() const {
    int d = 0;
    for (const auto& t : terms) d += t.degree;
    return d;
}

int IpcTarget::max_delay() const { return terms.empty() ? -1 : terms.back().delay; }

void IpcTarget::validate() const {
    if (terms.empty()) throw ValidationError("IpcTarget: no terms");
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].degree < 1 || terms[i].delay < 0) {
            throw ValidationError("IpcTarget: degrees must be >= 1 and delays >= 0");
        }
        if (i > 0 && terms[i].delay <= terms[i - 1].delay) {
            throw ValidationError("IpcTarget: delays must be distinct and ascending");
        }
    }
}

std::string IpcTarget::notation() const {
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i > 0) out += '*';
        out += 'd' + std::to_string(terms[i].degree) + '@' + std::to_string(terms[i].delay);
    }
    return out;
}

IpcTarget IpcTarget::parse(const std::string& notation) {
    IpcTarget t;
    std::stringstream ss(notation);
    std::string part;
    while (std::getline(ss, part, '*')) {
        const auto at = part.find('@');
        if (part.size() < 4 || part[0] != 'd' || at == std::string::npos) {
            throw ValidationError("cannot parse IPC target '" + notation + "'");
        }
        try {
            t.terms.push_back({std::stoi(part.substr(at + 1)), std::stoi(part.substr(1, at - 1))});
        } catch (const std::exception&) {
            throw ValidationError("cannot parse IPC target '" + notation + "'");
        }
    }
    std::sort(t.terms.begin(), t.terms.end(), [](const IpcTerm& a, const IpcTerm& b) { return a.delay < b.delay; });
    t.validate();
    return t;
}

bool canonical_less(const IpcTarget& a, const IpcTarget& b) {
    const int da = a.total_degree(), db = b.total_degree();
    if (da != db) return da < db;
    const std::size_t n = std::min(a.terms.size(), b.terms.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a.terms[i].delay != b.terms[i].delay) return a.terms[i].delay < b.terms[i].delay;
    }
    if (a.terms.size() != b.terms.size()) return a.terms.size() < b.terms.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (a.terms[i].degree != b.terms[i].degree) return a.terms[i].degree < b.terms[i].degree;
    }
    return false;
}

void TaskSpec::validate() const {
    switch (kind) {
        case Kind::narma:
            if (n < 1) throw ValidationError("TaskSpec: narma n must be >= 1");
            break;
        case Kind::delay:
            if (tau < 0) throw ValidationError("TaskSpec: delay tau must be >= 0");
            break;
        case Kind::ipc_target:
            ipc.validate();
            break;
    }
}

std::string TaskSpec::name() const {
    switch (kind) {
        case Kind::narma: return "narma" + std::to_string(n);
        case Kind::delay: return "delay" + std::to_string(tau);
        case Kind::ipc_target: return ipc.notation();
    }
    return {};
}

RealVector build_task_target(const TaskSpec& task, std::span<const double> inputs) {
    task.validate();
    std::vector<double> y;
    switch (task.kind) {
        case TaskSpec::Kind::narma: y = narma_target(inputs, task.n); break;
        case TaskSpec::Kind::delay: y = delay_target(inputs, task.tau); break;
        case TaskSpec::Kind::ipc_target: return evaluate_ipc_target(task.ipc, inputs);
    }
    return Eigen::Map<const RealVector>(y.data(), static_cast<Index>(y.size()));
}

DelayWindows default_delay_windows(int d_max) {
    DelayWindows w;
    for (int d = 1; d <= d_max; ++d) w[d] = d == 1 ? 100 : d == 2 ? 30 : 15;
    return w;
}

std::vector<IpcTarget> enumerate_ipc_block(int degree, int max_delay) {
    if (degree < 1 || max_delay < 0) throw ValidationError("enumerate_ipc_block: bad degree or delay");
    std::vector<IpcTarget> out;
    std::vector<IpcTerm> acc;
    for (int e = 1; e <= degree; ++e) {
        acc.assign(1, IpcTerm{max_delay, e});
        extend_terms(degree - e, max_delay, acc, out);
    }
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
}

std::vector<IpcTarget> enumerate_ipc_targets(int d_max, const DelayWindows& windows) {
    if (d_max < 1) throw ValidationError("enumerate_ipc_targets: d_max must be >= 1");
    std::vector<IpcTarget> out;
    for (int d = 1; d <= d_max; ++d) {
        const int window = window_for(windows, d);
        for (int delay = 0; delay < window; ++delay) {
            auto block = enumerate_ipc_block(d, delay);
            if (out.size() + block.size() > kMaxIpcTargets) {
                throw SizeError("IPC enumeration exceeds 10^6 targets; reduce the delay windows");
            }
            out.insert(out.end(), std::make_move_iterator(block.begin()), std::make_move_iterator(block.end()));
        }
    }
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
}

RealVector evaluate_ipc_target(const IpcTarget& target, std::span<const double> s_tilde) {
    target.validate();
    const auto len = static_cast<Index>(s_tilde.size());
    RealVector y = RealVector::Ones(len);
    for (const IpcTerm& term : target.terms) {
        for (Index k = 0; k < len; ++k) {
            const Index src = k - term.delay;
            y(k) *= legendre_eval(term.degree, src < 0 ? 0.0 : s_tilde[static_cast<std::size_t>(src)]);
        }
    }
    return y;
}

double analytic_ipc_threshold(Index n_columns, Index length) {
    if (length < 1) throw ValidationError("analytic_ipc_threshold: length must be >= 1");
    return 2.0 * static_cast<double>(n_columns) / static_cast<double>(length);
}

CapacityReport ipc_capacity(const DesignMatrix& x, std::span<const double> raw_inputs, const IpcConfig& config) {
    x.validate();
    if (config.d_max < 1) throw ValidationError("ipc_capacity: d_max must be >= 1");
    if (static_cast<Index>(raw_inputs.size()) != x.rows()) {
        throw ValidationError("ipc_capacity: input length does not match design rows");
    }
    if (std::any_of(raw_inputs.begin(), raw_inputs.end(), [](double s) { return !(std::abs(s) <= 1.0); })) {
        throw ValidationError("ipc_capacity: raw inputs must lie in [-1, 1]");
    }
    const Index len = x.rows();
    const Index rows = len - config.washout;
    if (config.washout < 0 || rows < 1) throw ValidationError("ipc_capacity: empty post-washout window");
    int widest = 0;
    for (int d = 1; d <= config.d_max; ++d) widest = std::max(widest, window_for(config.windows, d));
    if (config.washout < widest - 1) {
        throw ValidationError("ipc_capacity: washout shorter than the widest delay window");
    }

    const WindowSolvers solvers(x.values, config.washout, config.held_out_selection);
    const bool held_out = solvers.train.has_value();
    const LegendreTable table(raw_inputs, config.d_max);

    CapacityReport report;
    report.n_variables = x.n_variables();

    // Thresholds.
    for (int d = 1; d <= config.d_max; ++d) {
        if (config.threshold_mode == IpcConfig::ThresholdMode::analytic) {
            report.threshold_table[d] = analytic_ipc_threshold(x.cols(), rows);
            if (held_out) report.held_out_threshold_table[d] = 0.0;
            continue;
        }
        const int window = window_for(config.windows, d);
        const auto wanted = static_cast<std::size_t>(std::max(1, config.surrogate_samples));
        std::vector<IpcTarget> sample;
        for (int delay = 0; delay < window && sample.size() < wanted; ++delay) {
            auto block = enumerate_ipc_block(d, delay);
            sample.insert(sample.end(), block.begin(), block.end());
        }
        if (sample.size() > wanted) sample.resize(wanted);
        std::vector<double> null_in, null_held;
        for (std::uint64_t stream = 0; null_in.size() < wanted; ++stream) {
            const auto surrogate = gen_input(InputSpec::uniform(-1.0, 1.0), static_cast<std::size_t>(len),
                                             derive_seed({config.surrogate_seed, static_cast<std::uint64_t>(d), stream}));
            const LegendreTable null_table(surrogate, config.d_max);
            const Scores scores = batch_capacities(sample, null_table, solvers);
            null_in.insert(null_in.end(), scores.in_sample.begin(), scores.in_sample.end());
            null_held.insert(null_held.end(), scores.held_out.begin(), scores.held_out.end());
        }
        report.threshold_table[d] = quantile(std::move(null_in), config.surrogate_quantile);
        if (held_out) report.held_out_threshold_table[d] = quantile(std::move(null_held), config.surrogate_quantile);
    }

    // Capacities, grown block by block in the largest delay.
    for (int d = 1; d <= config.d_max; ++d) {
        const int window = window_for(config.windows, d);
        const double threshold = report.threshold_table[d];
        const double held_threshold = held_out ? report.held_out_threshold_table[d] : 0.0;
        double degree_sum = 0.0;
        int counted = 0;
        int empty_run = 0;
        for (int delay = 0; delay < window; ++delay) {
            const auto block = enumerate_ipc_block(d, delay);
            const Scores scores = batch_capacities(block, table, solvers);
            double block_sum = 0.0;
            for (std::size_t i = 0; i < block.size(); ++i) {
                const double raw = scores.in_sample[i];
                const double held = held_out ? scores.held_out[i] : 0.0;
                const bool passed = raw >= threshold && (!held_out || held >= held_threshold);
                report.per_target.push_back({block[i], raw, held, passed});
                if (passed) {
                    block_sum += raw;
                    ++counted;
                }
            }
            degree_sum += block_sum;
            empty_run = block_sum > threshold ? 0 : empty_run + 1;
            if (empty_run >= config.stop_after_empty_blocks) break;
        }
        report.per_degree[d] = degree_sum;
        report.counted_per_degree[d] = counted;
        report.total += degree_sum;
    }
    report.normalized_total =
        report.n_variables > 0 ? report.total / static_cast<double>(report.n_variables) : 0.0;
    return report;
}

void to_json(nlohmann::json& j, const CapacityReport& r) {
    nlohmann::json per_degree = nlohmann::json::object();
    nlohmann::json thresholds = nlohmann::json::object();
    nlohmann::json counted = nlohmann::json::object();
    for (const auto& [d, c] : r.per_degree) per_degree[std::to_string(d)] = c;
    for (const auto& [d, t] : r.threshold_table) thresholds[std::to_string(d)] = t;
    for (const auto& [d, n] : r.counted_per_degree) counted[std::to_string(d)] = n;
    nlohmann::json held = nlohmann::json::object();
    for (const auto& [d, t] : r.held_out_threshold_table) held[std::to_string(d)] = t;
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : r.per_target) {
        if (t.passed) {
            targets.push_back({{"target", t.target.notation()}, {"capacity", t.raw}, {"held_out", t.held_out}});
        }
    }
    j = nlohmann::json{{"total", r.total},
                       {"normalized_total", r.normalized_total},
                       {"n_variables", r.n_variables},
                       {"per_degree", per_degree},
                       {"threshold_table", thresholds},
                       {"held_out_threshold_table", held},
                       {"counted_per_degree", counted},
                       {"n_targets_evaluated", r.per_target.size()},
                       {"counted_targets", targets}};
}

void write_capacity_csv(std::ostream& os, const CapacityReport& r) {
    CsvWriter csv(os, {"degree", "capacity", "threshold", "n_targets_counted"});
    for (const auto& [d, c] : r.per_degree) {
        const auto th = r.threshold_table.find(d);
        const auto n = r.counted_per_degree.find(d);
        csv.cell(d).cell(c).cell(th == r.threshold_table.end() ? 0.0 : th->second).cell(
            n == r.counted_per_degree.end() ? 0 : n->second);
        csv.end_row();
    }
}

}  // namespace qrc

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include "oracles.hpp"
#include "qrc/experiments.hpp"
#include "qrc/parallel.hpp"
#include "qrc/reservoir.hpp"
#include "qrc/spectral.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace qrc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "qrc_acceptance" / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

const nlohmann::json& cell_at(const nlohmann::json& cells, double h, double w) {
    for (const auto& c : cells) {
        if (c["h"].get<double>() == h && c["w"].get<double>() == w) return c;
    }
    throw std::runtime_error(fmt("missing cell h=%g w=%g", h, w));
}

// 1. Gap ratio at N = 10 in the even sector.
Outcome spectral_statistics() {
    ExperimentConfig c;
    c.experiment = ExperimentKind::phase_diagram;
    c.n_spins = 10;
    c.h_values = {10, 1};
    c.w_values = {0, 100};
    c.realizations = 200;
    c.master_seed = 1001;
    c.output_dir = scratch("c1").string();
    const nlohmann::json m = run_experiment(c);
    const auto& cells = m["summary"]["cells"];
    const double ergodic = cell_at(cells, 10, 0)["mean_r"].get<double>();
    const double localized = cell_at(cells, 1, 100)["mean_r"].get<double>();
    const bool ok = m["failures"].empty() && ergodic >= 0.51 && ergodic <= 0.55 && localized >= 0.37 &&
                    localized <= 0.41;
    return {ok, fmt("<r>(h=10,W=0) = %.4f in [0.51,0.55]; <r>(h=1,W=100) = %.4f in [0.37,0.41]", ergodic,
                    localized)};
}

// 2. Synthetic Poisson and GOE spectra.
Outcome synthetic_spectra() {
    std::mt19937_64 rng(2002);
    std::exponential_distribution<double> gap(1.0);
    std::vector<double> levels(100000);
    double acc = 0.0;
    for (auto& x : levels) x = acc += gap(rng);
    const double poisson = gap_ratio_stats(levels).mean_r;

    std::normal_distribution<double> g;
    double goe = 0.0;
    const int samples = 50;
    for (int s = 0; s < samples; ++s) {
        RealMatrix a(512, 512);
        for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
        goe += gap_ratio_stats(symmetric_eigenvalues((a + a.transpose()) / 2)).mean_r;
    }
    goe /= samples;
    const bool ok = std::abs(poisson - 0.386) <= 0.005 && std::abs(goe - 0.531) <= 0.01;
    return {ok, fmt("Poisson <r> = %.4f (0.386 +- 0.005); GOE <r> = %.4f (0.531 +- 0.01)", poisson, goe)};
}

// 3. Distance between independent random states of dimension 1024.
Outcome random_state_distance() {
    std::mt19937_64 rng(3003);
    double sum = 0.0;
    const int pairs = 50;
    for (int k = 0; k < pairs; ++k) {
        const DensityMatrix a = random_density_matrix(1024, rng);
        const DensityMatrix b = random_density_matrix(1024, rng);
        sum += frobenius_distance(a.matrix(), b.matrix());
    }
    const double mean = sum / pairs;
    return {std::abs(mean - 0.044) <= 0.005, fmt("mean distance = %.5f (0.044 +- 0.005)", mean)};
}

// 4. Convergence contrast, N = 8 variant.
Outcome convergence_contrast() {
    ExperimentConfig c;
    c.experiment = ExperimentKind::convergence_curve;
    c.n_spins = 8;
    c.dt_values = {10};
    c.steps = 200;
    c.realizations = 20;
    c.master_seed = 4004;
    c.h_values = {10};
    c.w_values = {0};
    c.output_dir = scratch("c4a").string();
    const nlohmann::json ergodic = run_experiment(c);
    c.h_values = {1};
    c.w_values = {100};
    c.output_dir = scratch("c4b").string();
    const nlohmann::json localized = run_experiment(c);
    const double de = ergodic["summary"]["curves"][0]["median_final_raw"].get<double>();
    const double dl = localized["summary"]["curves"][0]["median_final_raw"].get<double>();
    const bool ok = ergodic["failures"].empty() && localized["failures"].empty() && de < 1e-8 && dl > 1e-3;
    return {ok, fmt("N=8 median final distance: %.3e at (h=10,W=0) < 1e-8; %.3e at (h=1,W=100) > 1e-3", de, dl)};
}

// 5. Dependence on the evolution time between injections.
Outcome dt_dependence() {
    ExperimentConfig c;
    c.experiment = ExperimentKind::convergence_curve;
    c.n_spins = 8;
    c.h_values = {10};
    c.w_values = {0};
    c.dt_values = {0.1, 10};
    c.steps = 200;
    c.realizations = 20;
    c.master_seed = 5005;
    c.output_dir = scratch("c5").string();
    const nlohmann::json m = run_experiment(c);
    const auto& curves = m["summary"]["curves"];
    const double slow = curves[0]["median_final_raw"].get<double>();
    const double fast = curves[1]["median_final_raw"].get<double>();
    const bool ok = m["failures"].empty() && fast * 1e3 <= slow;
    return {ok, fmt("N=8 median final distance: %.3e at dt=0.1, %.3e at dt=10 (ratio %.2e >= 1e3)", slow, fast,
                    slow / fast)};
}

// 6. Task performance ordering, N = 8 variant.
Outcome task_ordering() {
    ExperimentConfig c;
    c.experiment = ExperimentKind::task_sweep;
    c.n_spins = 8;
    c.realizations = 20;
    c.master_seed = 6006;
    c.split = {1000, 2000, 2000};
    c.tasks = {TaskSpec::narma(10), TaskSpec::delay(10)};
    c.h_values = {0.01, 0.1, 10};
    c.w_values = {0};
    c.output_dir = scratch("c6h").string();
    const nlohmann::json hs = run_experiment(c);
    c.h_values = {10};
    c.w_values = {10, 100};
    c.output_dir = scratch("c6w").string();
    const nlohmann::json ws = run_experiment(c);

    auto stat = [](const nlohmann::json& cells, const std::string& task, double h, double w) {
        for (const auto& x : cells) {
            if (x["task"] == task && x["h"].get<double>() == h && x["w"].get<double>() == w) {
                return std::pair{x["c"]["mean"].get<double>(), x["c"]["stderr"].get<double>()};
            }
        }
        throw std::runtime_error("missing task cell");
    };
    auto above = [](std::pair<double, double> a, std::pair<double, double> b) {
        return a.first - b.first > std::hypot(a.second, b.second);
    };
    bool ok = hs["failures"].empty() && ws["failures"].empty();
    std::string detail;
    for (const std::string task : {"narma10", "delay10"}) {
        const auto c001 = stat(hs["summary"]["cells"], task, 0.01, 0);
        const auto c01 = stat(hs["summary"]["cells"], task, 0.1, 0);
        const auto c10 = stat(hs["summary"]["cells"], task, 10, 0);
        const auto w10 = stat(ws["summary"]["cells"], task, 10, 10);
        const auto w100 = stat(ws["summary"]["cells"], task, 10, 100);
        ok = ok && above(c01, c10) && above(c10, c001) && above(w10, w100);
        detail += fmt("%s C(h=0.01)=%.3f+-%.3f C(h=0.1)=%.3f+-%.3f C(h=10)=%.3f+-%.3f C(W=10)=%.3f+-%.3f "
                      "C(W=100)=%.3f+-%.3f; ",
                      task.c_str(), c001.first, c001.second, c01.first, c01.second, c10.first, c10.second,
                      w10.first, w10.second, w100.first, w100.second);
    }
    return {ok, detail};
}

// 7. Information processing capacity.
Outcome ipc_properties() {
    // (a) Ten-tap delay line.
    const Index length = 20000;
    IpcConfig cfg;
    const auto s = gen_input(InputSpec::uniform(-1.0, 1.0), static_cast<std::size_t>(cfg.washout + length), 7007);
    RealMatrix taps = RealMatrix::Zero(static_cast<Index>(s.size()), 10);
    std::vector<std::string> labels;
    for (Index j = 0; j < 10; ++j) {
        labels.push_back("tap" + std::to_string(j));
        for (Index k = j; k < taps.rows(); ++k) taps(k, j) = s[static_cast<std::size_t>(k - j)];
    }
    const CapacityReport line = ipc_capacity(DesignMatrix::with_bias(taps, labels), s, cfg);
    const double d1 = line.per_degree.at(1);
    const bool ok_a = std::abs(line.total - 10.0) <= 0.05 && std::abs(d1 - line.total) <= 1e-12;

    // (b), (c) Reservoir at N = 8.
    ExperimentConfig c;
    c.experiment = ExperimentKind::ipc_sweep;
    c.n_spins = 8;
    c.realizations = 2;
    c.master_seed = 7007;
    c.ipc_length = length;
    auto run = [&](double h, double w, const std::string& tag) {
        c.h_values = {h};
        c.w_values = {w};
        c.output_dir = scratch("c7" + tag).string();
        const nlohmann::json m = run_experiment(c);
        if (!m["failures"].empty()) throw std::runtime_error("IPC run failed: " + m["failures"].dump());
        return m["summary"]["cells"][0];
    };
    const nlohmann::json ergodic = run(10, 0, "e");
    const nlohmann::json localized = run(1, 100, "l");
    const nlohmann::json edge = run(0.1, 0, "t");
    const double o = 3 * 8 + 8 * 7 / 2;
    const double ne = ergodic["normalized_total"]["mean"].get<double>();
    const double nl = localized["normalized_total"]["mean"].get<double>();
    const double te = ergodic["total"]["mean"].get<double>();
    const double share_e = ergodic["per_degree"]["1"]["share"].get<double>();
    const double share_t = edge["per_degree"]["1"]["share"].get<double>();
    const bool ok_b = ne >= 0.85 && te <= 1.01 * o && nl <= 0.5 * ne;
    const bool ok_c = share_t > share_e;
    return {ok_a && ok_b && ok_c,
            fmt("(a) delay line total %.4f, degree 1 %.4f; (b) O=%.0f normalized %.3f at (h=10,W=0) [>= 0.85, "
                "total %.2f <= 1.01 O], %.3f at (h=1,W=100) [<= %.3f]; (c) degree-1 share %.3f at h=0.1 vs %.3f "
                "at h=10",
                line.total, d1, o, ne, te, nl, 0.5 * ne, share_t, share_e)};
}

// 8. Numerical invariants.
Outcome numerical_invariants() {
    double worst_trace = 0.0, worst_unitary = 0.0, worst_z = 0.0, worst_energy = 0.0, worst_parity = 0.0,
           worst_oracle = 0.0;
    std::mt19937_64 rng(8008);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::uint64_t seed : {1, 2, 3}) {
        ModelParams p;
        p.n_spins = 6;
        p.h = seed == 1 ? 10.0 : seed == 2 ? 0.1 : 1.0;
        p.w = seed == 3 ? 100.0 : 0.0;
        p.seed = seed;
        const DisorderRealization real = sample_realization(p);
        const ReservoirDynamics dyn(real, 10.0);
        const ComplexMatrix prop = dyn.propagator();
        worst_unitary = std::max(
            worst_unitary, oracle::max_abs(prop.adjoint() * prop - ComplexMatrix::Identity(prop.rows(), prop.cols())));

        ReservoirState state(real, 10.0, random_density_matrix(64, rng));
        ReservoirState reset(real, 0.0, random_density_matrix(64, rng));
        const double scale = std::max(1.0, build_real_hamiltonian(real).norm());
        const std::vector<ObservableDescriptor> z1{ObservableDescriptor::single(1, Axis::z)};
        for (int k = 0; k < 100; ++k) {
            const double s = u(rng);
            // Parity right after injection is (1 - 2s) times the parity of the traced-out rest.
            const ComplexMatrix rest = oracle::trace_first(state.rho().matrix(), 2);
            double rest_parity = 0.0;
            for (Index j = 0; j < rest.rows(); ++j) {
                rest_parity += (std::popcount(static_cast<unsigned>(j)) % 2 ? -1.0 : 1.0) * rest(j, j).real();
            }
            StepTrace tr;
            state.inject_and_evolve(s, &tr);
            worst_trace = std::max(worst_trace, tr.trace_error);
            worst_energy = std::max(worst_energy, std::abs(tr.energy_post_evolve - tr.energy_post_inject) / scale);
            worst_parity = std::max(worst_parity, std::abs(tr.parity - (1.0 - 2.0 * s) * rest_parity));
            reset.inject_and_evolve(s);
            worst_z = std::max(worst_z, std::abs(reset.measure(z1)(0) - (1.0 - 2.0 * s)));
        }
    }
    // Three qubits against dense exponentiation.
    for (std::uint64_t seed : {11, 12, 13}) {
        ModelParams p;
        p.n_spins = 3;
        p.h = 0.5 * static_cast<double>(seed);
        p.w = 1.0;
        p.seed = seed;
        const DisorderRealization real = sample_realization(p);
        const DensityMatrix rho = random_density_matrix(8, rng);
        const double s = u(rng), dt = 0.7;
        ReservoirState state(real, dt, rho);
        state.inject_and_evolve(s);
        ComplexMatrix in(2, 2);
        in << 1.0 - s, std::sqrt(s * (1.0 - s)), std::sqrt(s * (1.0 - s)), s;
        const ComplexMatrix uop = oracle::expm_taylor(Complex(0.0, -dt) * build_hamiltonian(real));
        const ComplexMatrix expected = uop * oracle::tensor(in, oracle::trace_first(rho.matrix(), 2)) * uop.adjoint();
        worst_oracle = std::max(worst_oracle, oracle::max_abs(state.rho().matrix() - expected));
    }
    const bool ok = worst_trace <= 1e-12 && worst_unitary <= 1e-10 && worst_z <= 1e-12 && worst_energy <= 1e-10 &&
                    worst_parity <= 1e-10 && worst_oracle <= 1e-10;
    return {ok, fmt("trace %.1e; unitarity %.1e; <z1>-(1-2s) %.1e; energy %.1e rel; parity %.1e; 3-qubit oracle "
                    "%.1e",
                    worst_trace, worst_unitary, worst_z, worst_energy, worst_parity, worst_oracle)};
}

// 9. Byte-identical output across worker counts.
Outcome determinism() {
    bool ok = true;
    std::string detail;
    auto compare = [&](ExperimentConfig c, const std::string& file) {
        c.workers = 1;
        c.output_dir = scratch("c9_1").string();
        run_experiment(c);
        const std::string a = slurp(fs::path(c.output_dir) / file);
        c.workers = 8;
        c.output_dir = scratch("c9_8").string();
        run_experiment(c);
        const std::string b = slurp(fs::path(c.output_dir) / file);
        const bool same = !a.empty() && a == b;
        ok = ok && same;
        detail += file + (same ? " identical; " : " DIFFERS; ");
    };
    ExperimentConfig c;
    c.experiment = ExperimentKind::phase_diagram;
    c.n_spins = 8;
    c.h_values = {0.1, 10};
    c.w_values = {0, 100};
    c.realizations = 4;
    c.master_seed = 9009;
    compare(c, "phase_diagram.csv");

    c.experiment = ExperimentKind::task_sweep;
    c.n_spins = 5;
    c.h_values = {0.1, 10};
    c.w_values = {0};
    c.split = {100, 200, 200};
    compare(c, "task_results.csv");

    c.experiment = ExperimentKind::convergence_curve;
    c.dt_values = {1, 10};
    c.steps = 30;
    compare(c, "convergence_curve.csv");
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"spectral statistics at N=10", spectral_statistics},
        {"synthetic spectra oracle", synthetic_spectra},
        {"random-state distance", random_state_distance},
        {"convergence contrast", convergence_contrast},
        {"dt dependence", dt_dependence},
        {"task performance ordering", task_ordering},
        {"information processing capacity", ipc_properties},
        {"numerical invariants", numerical_invariants},
        {"determinism across workers", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %d (%s): %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", id,
                    criteria[k].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

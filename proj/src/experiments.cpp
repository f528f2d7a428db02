#include "qrc/experiments.hpp"

#include "qrc/csv.hpp"
#include "qrc/errors.hpp"
#include "qrc/parallel.hpp"
#include "qrc/reservoir.hpp"
#include "qrc/spectral.hpp"

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#ifndef QRC_VERSION
#define QRC_VERSION "unknown"
#endif

namespace qrc {

namespace fs = std::filesystem;

namespace {

// Seed streams inside one work item.
enum Stream : std::uint64_t { kRealization = 0, kInput = 1, kStateA = 2, kStateB = 3, kSurrogate = 4 };

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
    static const std::vector<std::pair<ExperimentKind, std::string>> names{
        {ExperimentKind::phase_diagram, "phase_diagram"},
        {ExperimentKind::dynamics_trace, "dynamics_trace"},
        {ExperimentKind::convergence_map, "convergence_map"},
        {ExperimentKind::convergence_curve, "convergence_curve"},
        {ExperimentKind::task_sweep, "task_sweep"},
        {ExperimentKind::ipc_sweep, "ipc_sweep"},
        {ExperimentKind::conserved_trace, "conserved_trace"},
    };
    return names;
}

std::uint64_t experiment_id(ExperimentKind kind) { return static_cast<std::uint64_t>(kind) + 1; }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + text + "'");
}

long long parse_int(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(text, &used, 0);
        if (used == text.size() && text.front() != '-') return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected an unsigned 64-bit integer, got '" + text + "'");
}

std::vector<double> parse_grid(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t.rfind("log:", 0) == 0) {
        const auto parts = split_list(t.substr(4), ':');
        if (parts.size() != 3) throw ConfigError(key + ": grid form is log:lo:hi:n");
        const long long n = parse_int(key, parts[2]);
        if (n < 1) throw ConfigError(key + ": grid needs n >= 1");
        try {
            return log_grid(parse_double(key, parts[0]), parse_double(key, parts[1]), static_cast<int>(n));
        } catch (const ValidationError& e) {
            throw ConfigError(key + ": " + e.what());
        }
    }
    std::vector<double> out;
    for (const auto& item : split_list(t)) out.push_back(parse_double(key, item));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

TaskSpec parse_task(const std::string& key, const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = trim(text.substr(0, colon));
    const std::string arg = colon == std::string::npos ? "" : trim(text.substr(colon + 1));
    if (kind == "narma") return TaskSpec::narma(arg.empty() ? 10 : static_cast<int>(parse_int(key, arg)));
    if (kind == "delay") return TaskSpec::delay(arg.empty() ? 10 : static_cast<int>(parse_int(key, arg)));
    if (kind == "ipc") {
        try {
            return TaskSpec::ipc_target(IpcTarget::parse(arg));
        } catch (const ValidationError& e) {
            throw ConfigError(key + ": " + e.what());
        }
    }
    throw ConfigError(key + ": unknown task '" + text + "' (narma:<n>, delay:<tau>, ipc:<target>)");
}

std::string task_token(const TaskSpec& t) {
    switch (t.kind) {
        case TaskSpec::Kind::narma: return "narma:" + std::to_string(t.n);
        case TaskSpec::Kind::delay: return "delay:" + std::to_string(t.tau);
        case TaskSpec::Kind::ipc_target: return "ipc:" + t.ipc.notation();
    }
    return {};
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
    return out;
}

std::string windows_text(const DelayWindows& w) {
    std::string out;
    for (const auto& [deg, n] : w) out += (out.empty() ? "" : ", ") + std::to_string(deg) + ":" + std::to_string(n);
    return out;
}

// ---------------------------------------------------------------------------
// statistics

struct Moments {
    int n = 0;
    double mean = 0.0;
    double std = 0.0;     // sample standard deviation
    double sem = 0.0;  // std / sqrt(n)
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    m.n = static_cast<int>(v.size());
    if (v.empty()) return m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / m.n;
    if (m.n > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / (m.n - 1));
        m.sem = m.std / std::sqrt(static_cast<double>(m.n));
    }
    return m;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

nlohmann::json moments_json(const Moments& m) {
    return {{"n", m.n}, {"mean", m.mean}, {"std", m.std}, {"stderr", m.sem}};
}

// ---------------------------------------------------------------------------
// run plumbing

struct Failure {
    std::size_t item = 0;
    std::size_t cell = 0;
    long realization = -1;
    std::string message;
};

class Run {
public:
    explicit Run(const ExperimentConfig& cfg) : cfg_(cfg), dir_(cfg.output_dir) {
        workers_ = cfg.workers > 0 ? cfg.workers : default_workers();
        fs::create_directories(dir_);
    }

    int workers() const { return workers_; }

    std::uint64_t seed(std::size_t cell, std::size_t realization, Stream stream) const {
        return derive_seed({cfg_.master_seed, experiment_id(cfg_.experiment), cell, realization, stream});
    }

    /// Calls body(i) for every item; a throwing item is recorded, not fatal.
    template <class Body, class Locate>
    std::vector<bool> for_items(std::size_t count, Body body, Locate locate) {
        std::vector<std::optional<std::string>> errors(count);
        parallel_for(count, workers_, [&](std::size_t i) {
            try {
                body(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        });
        std::vector<bool> ok(count, true);
        for (std::size_t i = 0; i < count; ++i) {
            if (!errors[i]) continue;
            ok[i] = false;
            auto [cell, realization] = locate(i);
            failures_.push_back({i, cell, realization, *errors[i]});
        }
        return ok;
    }

    void write_file(const std::string& name, const std::string& bytes) {
        const fs::path path = dir_ / name;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + path.string());
        os << bytes;
        os.close();
        if (!os) throw std::runtime_error("write failed for " + path.string());
        boost::crc_32_type crc;
        crc.process_bytes(bytes.data(), bytes.size());
        files_.emplace_back(name, bytes.size(), crc.checksum());
    }

    nlohmann::json manifest(double wall_time) const {
        nlohmann::json files = nlohmann::json::array();
        nlohmann::json checksums = nlohmann::json::object();
        for (const auto& [name, size, crc] : files_) {
            std::ostringstream hex;
            hex << std::hex << std::setw(8) << std::setfill('0') << crc;
            files.push_back({{"name", name}, {"bytes", size}, {"crc32", hex.str()}});
            checksums[name] = hex.str();
        }
        nlohmann::json fails = nlohmann::json::array();
        for (const auto& f : failures_) {
            nlohmann::json j{{"item", f.item}, {"cell", f.cell}, {"message", f.message}};
            if (f.cell < cfg_.n_cells()) {
                const ModelParams p = cfg_.cell_params(f.cell);
                j["h"] = p.h;
                j["w"] = p.w;
            }
            if (f.realization >= 0) j["realization"] = f.realization;
            fails.push_back(std::move(j));
        }
        return {{"experiment", to_string(cfg_.experiment)},
                {"code_version", code_version()},
                {"config", cfg_.to_json()},
                {"seeds",
                 {{"master_seed", cfg_.master_seed},
                  {"experiment_id", experiment_id(cfg_.experiment)},
                  {"rule", "derive_seed(master_seed, experiment_id, cell, realization, stream)"},
                  {"streams", {{"realization", 0}, {"input", 1}, {"state_a", 2}, {"state_b", 3}, {"surrogate", 4}}}}},
                {"files", files},
                {"checksums", checksums},
                {"failures", fails},
                {"workers", workers_},
                {"wall_time_s", wall_time}};
    }

private:
    const ExperimentConfig& cfg_;
    fs::path dir_;
    int workers_ = 1;
    std::vector<std::tuple<std::string, std::size_t, std::uint32_t>> files_;
    std::vector<Failure> failures_;
};

std::string csv_text(const std::function<void(std::ostream&)>& fill) {
    std::ostringstream os;
    fill(os);
    return os.str();
}

DisorderRealization cell_realization(const ExperimentConfig& cfg, const Run& run, std::size_t cell,
                                     std::size_t r) {
    ModelParams p = cfg.cell_params(cell);
    p.seed = run.seed(cell, r, kRealization);
    return sample_realization(p);
}

DensityMatrix initial_state(const std::string& name, int n, std::uint64_t random_seed) {
    NamedInitialState init = NamedInitialState::parse(name);
    // Bare "random" draws a fresh state per item.
    if (init.kind == NamedInitialState::Kind::random && name == "random") init.seed = random_seed;
    return make_initial_state(init, n);
}

// ---------------------------------------------------------------------------
// experiments

nlohmann::json run_phase_diagram(const ExperimentConfig& cfg, Run& run) {
    const std::size_t nc = cfg.n_cells();
    const auto nr = static_cast<std::size_t>(cfg.realizations);
    std::vector<double> mean_r(nc * nr, 0.0);
    std::vector<int> dropped(nc * nr, 0);
    const auto ok = run.for_items(
        nc * nr,
        [&](std::size_t i) {
            const GapRatioStats s = realization_gap_ratio(cell_realization(cfg, run, i / nr, i % nr), cfg.sector);
            mean_r[i] = s.mean_r;
            dropped[i] = s.n_dropped;
        },
        [&](std::size_t i) { return std::pair{i / nr, static_cast<long>(i % nr)}; });

    std::vector<PhaseCell> cells;
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t c = 0; c < nc; ++c) {
        std::vector<double> rs;
        PhaseCell pc;
        const ModelParams p = cfg.cell_params(c);
        pc.h = p.h;
        pc.w = p.w;
        for (std::size_t r = 0; r < nr; ++r) {
            if (!ok[c * nr + r]) continue;
            rs.push_back(mean_r[c * nr + r]);
            pc.n_dropped_total += dropped[c * nr + r];
        }
        const Moments m = moments(rs);
        pc.mean_r = m.n ? m.mean : std::nan("");
        pc.stderr_r = m.sem;
        pc.n_realizations = m.n;
        cells.push_back(pc);
        summary.push_back({{"h", pc.h}, {"w", pc.w}, {"mean_r", pc.mean_r}, {"stderr_r", pc.stderr_r},
                           {"n_realizations", pc.n_realizations}});
    }
    run.write_file("phase_diagram.csv", csv_text([&](std::ostream& os) { write_phase_csv(os, cells); }));
    return {{"cells", summary}};
}

nlohmann::json run_dynamics_trace(const ExperimentConfig& cfg, Run& run) {
    const std::size_t nc = cfg.n_cells();
    const auto nr = static_cast<std::size_t>(cfg.realizations);
    std::vector<std::string> bytes(nc * nr);
    std::vector<double> trace_err(nc * nr, 0.0);
    const auto ok = run.for_items(
        nc * nr,
        [&](std::size_t i) {
            const std::size_t c = i / nr, r = i % nr;
            const ReservoirConfig rc = ReservoirConfig::with_defaults(cell_realization(cfg, run, c, r), cfg.dt);
            const auto inputs = gen_input(InputSpec::binary(), cfg.steps, run.seed(c, r, kInput));
            ReservoirState state(rc.realization, rc.dt,
                                 initial_state(cfg.initial_state, cfg.n_spins, run.seed(c, r, kStateA)));
            const Trajectory traj = run_trajectory(state, rc.observables, inputs, true);
            trace_err[i] = traj.max_trace_error;
            bytes[i] = csv_text([&](std::ostream& os) { write_trajectory_csv(os, traj); });
        },
        [&](std::size_t i) { return std::pair{i / nr, static_cast<long>(i % nr)}; });

    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t i = 0; i < nc * nr; ++i) {
        if (!ok[i]) continue;
        const std::string name = "trajectory_c" + std::to_string(i / nr) + "_r" + std::to_string(i % nr) + ".csv";
        run.write_file(name, bytes[i]);
        const ModelParams p = cfg.cell_params(i / nr);
        summary.push_back({{"file", name}, {"h", p.h}, {"w", p.w}, {"realization", i % nr},
                           {"max_trace_error", trace_err[i]}});
    }
    return {{"trajectories", summary}};
}

nlohmann::json run_convergence_map(const ExperimentConfig& cfg, Run& run) {
    const std::size_t nc = cfg.n_cells();
    const auto nr = static_cast<std::size_t>(cfg.realizations);
    std::vector<double> finals(nc * nr, 0.0);
    const auto ok = run.for_items(
        nc * nr,
        [&](std::size_t i) {
            const std::size_t c = i / nr, r = i % nr;
            const ReservoirConfig rc = ReservoirConfig::with_defaults(cell_realization(cfg, run, c, r), cfg.dt);
            const auto inputs = gen_input(InputSpec::uniform(0.0, 1.0), cfg.steps, run.seed(c, r, kInput));
            const ConvergenceSeries s = convergence_run(rc, inputs, run.seed(c, r, kStateA), run.seed(c, r, kStateB));
            finals[i] = s.raw.back();
        },
        [&](std::size_t i) { return std::pair{i / nr, static_cast<long>(i % nr)}; });

    std::ostringstream map_csv, finals_csv;
    CsvWriter map(map_csv, {"h", "w", "n_pairs", "mean_final", "median_final", "mean_log10_final"});
    CsvWriter fin(finals_csv, {"h", "w", "pair", "final_distance"});
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t c = 0; c < nc; ++c) {
        const ModelParams p = cfg.cell_params(c);
        std::vector<double> d, logd;
        for (std::size_t r = 0; r < nr; ++r) {
            if (!ok[c * nr + r]) continue;
            const double v = finals[c * nr + r];
            d.push_back(v);
            logd.push_back(std::log10(std::max(v, ConvergenceSeries::kFloor)));
            fin.cell(p.h).cell(p.w).cell(r).cell(v);
            fin.end_row();
        }
        const Moments m = moments(d);
        const double med = median(d);
        const double ml = moments(logd).mean;
        map.cell(p.h).cell(p.w).cell(m.n).cell(m.mean).cell(med).cell(ml);
        map.end_row();
        summary.push_back({{"h", p.h}, {"w", p.w}, {"n_pairs", m.n}, {"mean_final", m.mean},
                           {"median_final", med}, {"mean_log10_final", ml}});
    }
    run.write_file("convergence_map.csv", map_csv.str());
    run.write_file("convergence_finals.csv", finals_csv.str());
    return {{"cells", summary}};
}

nlohmann::json run_convergence_curve(const ExperimentConfig& cfg, Run& run) {
    const std::size_t nc = cfg.n_cells();
    const std::size_t nd = cfg.dt_values.size();
    const auto nr = static_cast<std::size_t>(cfg.realizations);
    const std::size_t count = nc * nd * nr;
    std::vector<std::vector<double>> curves(count);
    std::vector<double> raw_final(count, 0.0);
    const auto ok = run.for_items(
        count,
        [&](std::size_t i) {
            const std::size_t c = i / (nd * nr), di = (i / nr) % nd, r = i % nr;
            // Same realization, states and inputs for every dt of a pair.
            const auto dyn = std::make_shared<const ReservoirDynamics>(cell_realization(cfg, run, c, r),
                                                                       cfg.dt_values[di]);
            const auto inputs = gen_input(InputSpec::uniform(0.0, 1.0), cfg.steps, run.seed(c, r, kInput));
            const ConvergenceSeries s = convergence_run(
                dyn, inputs, make_initial_state(NamedInitialState::random(run.seed(c, r, kStateA)), cfg.n_spins),
                make_initial_state(NamedInitialState::random(run.seed(c, r, kStateB)), cfg.n_spins));
            curves[i] = s.clamped;
            raw_final[i] = s.raw.back();
        },
        [&](std::size_t i) { return std::pair{i / (nd * nr), static_cast<long>(i % nr)}; });

    std::ostringstream out;
    CsvWriter csv(out, {"h", "w", "dt", "step", "n_pairs", "mean_distance", "median_distance", "mean_log10_distance"});
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t c = 0; c < nc; ++c) {
        const ModelParams p = cfg.cell_params(c);
        for (std::size_t di = 0; di < nd; ++di) {
            std::vector<std::size_t> good;
            for (std::size_t r = 0; r < nr; ++r) {
                if (ok[(c * nd + di) * nr + r]) good.push_back((c * nd + di) * nr + r);
            }
            double final_median = std::nan("");
            for (std::size_t k = 0; k <= cfg.steps && !good.empty(); ++k) {
                std::vector<double> d, logd;
                for (std::size_t i : good) {
                    d.push_back(curves[i][k]);
                    logd.push_back(std::log10(curves[i][k]));
                }
                const double med = median(d);
                if (k == cfg.steps) final_median = med;
                csv.cell(p.h).cell(p.w).cell(cfg.dt_values[di]).cell(k).cell(d.size());
                csv.cell(moments(d).mean).cell(med).cell(moments(logd).mean);
                csv.end_row();
            }
            std::vector<double> finals;
            for (std::size_t i : good) finals.push_back(raw_final[i]);
            summary.push_back({{"h", p.h}, {"w", p.w}, {"dt", cfg.dt_values[di]}, {"n_pairs", good.size()},
                               {"median_final", final_median}, {"median_final_raw", median(finals)}});
        }
    }
    run.write_file("convergence_curve.csv", out.str());
    return {{"curves", summary}};
}

nlohmann::json run_task_sweep(const ExperimentConfig& cfg, Run& run) {
    const std::size_t nc = cfg.n_cells();
    const auto nr = static_cast<std::size_t>(cfg.realizations);
    const std::size_t nt = cfg.tasks.size();
    // One trajectory per item serves every task.
    std::vector<std::vector<TrainEvalResult>> results(nc * nr);
    const auto ok = run.for_items(
        nc * nr,
        [&](std::size_t i) {
            const std::size_t c = i / nr, r = i % nr;
            const ReservoirConfig rc = ReservoirConfig::with_defaults(cell_realization(cfg, run, c, r), cfg.dt);
            const auto inputs = gen_input(InputSpec::uniform(cfg.input_lo, cfg.input_hi),
                                          static_cast<std::size_t>(cfg.split.total()), run.seed(c, r, kInput));
            ReservoirState state(rc.realization, rc.dt,
                                 initial_state(cfg.initial_state, cfg.n_spins, run.seed(c, r, kStateA)));
            const Trajectory traj = run_trajectory(state, rc.observables, inputs, false);
            for (const TaskSpec& task : cfg.tasks) {
                results[i].push_back(train_eval(traj.design, build_task_target(task, inputs), cfg.split, cfg.ridge));
            }
        },
        [&](std::size_t i) { return std::pair{i / nr, static_cast<long>(i % nr)}; });

    std::ostringstream res_csv, sum_csv;
    CsvWriter res(res_csv, {"task", "h", "w", "realization", "c_train", "c_test", "effective_rank"});
    CsvWriter sum(sum_csv, {"task", "h", "w", "n", "mean_c", "std_c", "stderr_c"});
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t t = 0; t < nt; ++t) {
        const std::string name = cfg.tasks[t].name();
        for (std::size_t c = 0; c < nc; ++c) {
            const ModelParams p = cfg.cell_params(c);
            std::vector<double> cs;
            for (std::size_t r = 0; r < nr; ++r) {
                const std::size_t i = c * nr + r;
                if (!ok[i]) continue;
                const TrainEvalResult& e = results[i][t];
                cs.push_back(e.c_test);
                res.cell(name).cell(p.h).cell(p.w).cell(r).cell(e.c_train).cell(e.c_test).cell(
                    e.solution.effective_rank);
                res.end_row();
            }
            const Moments m = moments(cs);
            sum.cell(name).cell(p.h).cell(p.w).cell(m.n).cell(m.mean).cell(m.std).cell(m.sem);
            sum.end_row();
            nlohmann::json j{{"task", name}, {"h", p.h}, {"w", p.w}};
            j["c"] = moments_json(m);
            summary.push_back(std::move(j));
        }
    }
    run.write_file("task_results.csv", res_csv.str());
    run.write_file("task_summary.csv", sum_csv.str());
    return {{"cells", summary}};
}

nlohmann::json run_ipc_sweep(const ExperimentConfig& cfg, Run& run) {
    const std::size_t nc = cfg.n_cells();
    const auto nr = static_cast<std::size_t>(cfg.realizations);
    std::vector<CapacityReport> reports(nc * nr);
    const auto ok = run.for_items(
        nc * nr,
        [&](std::size_t i) {
            const std::size_t c = i / nr, r = i % nr;
            const ReservoirConfig rc = ReservoirConfig::with_defaults(cell_realization(cfg, run, c, r), cfg.dt);
            const auto length = static_cast<std::size_t>(cfg.ipc.washout + cfg.ipc_length);
            const auto s_tilde = gen_input(InputSpec::uniform(-1.0, 1.0), length, run.seed(c, r, kInput));
            std::vector<double> inputs(length);
            std::transform(s_tilde.begin(), s_tilde.end(), inputs.begin(),
                           [](double x) { return std::clamp(0.5 * (1.0 + x), 0.0, 1.0); });
            ReservoirState state(rc.realization, rc.dt,
                                 initial_state(cfg.initial_state, cfg.n_spins, run.seed(c, r, kStateA)));
            const Trajectory traj = run_trajectory(state, rc.observables, inputs, false);
            IpcConfig ic = cfg.ipc;
            ic.surrogate_seed = derive_seed({cfg.ipc.surrogate_seed, run.seed(c, r, kSurrogate)});
            reports[i] = ipc_capacity(traj.design, s_tilde, ic);
        },
        [&](std::size_t i) { return std::pair{i / nr, static_cast<long>(i % nr)}; });

    std::ostringstream deg_csv, tot_csv;
    CsvWriter deg(deg_csv, {"h", "w", "realization", "degree", "capacity", "threshold", "n_targets_counted"});
    CsvWriter tot(tot_csv, {"h", "w", "realization", "total", "normalized_total", "n_variables"});
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t c = 0; c < nc; ++c) {
        const ModelParams p = cfg.cell_params(c);
        std::vector<double> totals, normalized;
        std::map<int, std::vector<double>> per_degree, share;
        for (std::size_t r = 0; r < nr; ++r) {
            const std::size_t i = c * nr + r;
            if (!ok[i]) continue;
            const CapacityReport& rep = reports[i];
            for (const auto& [d, cap] : rep.per_degree) {
                deg.cell(p.h).cell(p.w).cell(r).cell(d).cell(cap).cell(rep.threshold_table.at(d)).cell(
                    rep.counted_per_degree.at(d));
                deg.end_row();
                per_degree[d].push_back(cap);
                share[d].push_back(rep.total > 0.0 ? cap / rep.total : 0.0);
            }
            tot.cell(p.h).cell(p.w).cell(r).cell(rep.total).cell(rep.normalized_total).cell(rep.n_variables);
            tot.end_row();
            totals.push_back(rep.total);
            normalized.push_back(rep.normalized_total);
        }
        nlohmann::json j{{"h", p.h}, {"w", p.w}};
        j["total"] = moments_json(moments(totals));
        j["normalized_total"] = moments_json(moments(normalized));
        nlohmann::json degrees = nlohmann::json::object();
        for (const auto& [d, caps] : per_degree) {
            degrees[std::to_string(d)] = {{"capacity", moments_json(moments(caps))},
                                          {"share", moments(share[d]).mean}};
        }
        j["per_degree"] = degrees;
        summary.push_back(std::move(j));
    }
    run.write_file("ipc_degrees.csv", deg_csv.str());
    run.write_file("ipc_totals.csv", tot_csv.str());
    return {{"cells", summary}};
}

nlohmann::json run_conserved_trace(const ExperimentConfig& cfg, Run& run) {
    const std::size_t nc = cfg.n_cells();
    const auto nr = static_cast<std::size_t>(cfg.realizations);
    const std::size_t ns = cfg.initial_states.size();
    const std::size_t count = nc * nr * ns;
    std::vector<Trajectory> trajs(count);
    const auto ok = run.for_items(
        count,
        [&](std::size_t i) {
            const std::size_t c = i / (nr * ns), r = (i / ns) % nr, si = i % ns;
            // Realization and inputs are shared by all initial states of (c, r).
            const DisorderRealization real = cell_realization(cfg, run, c, r);
            const auto inputs = gen_input(InputSpec::uniform(0.0, 1.0), cfg.steps, run.seed(c, r, kInput));
            ReservoirState state(real, cfg.dt, initial_state(cfg.initial_states[si], cfg.n_spins,
                                                              derive_seed({run.seed(c, r, kStateA), si})));
            const std::vector<ObservableDescriptor> obs{ObservableDescriptor::energy(),
                                                        ObservableDescriptor::parity()};
            trajs[i] = run_trajectory(state, obs, inputs, true);
        },
        [&](std::size_t i) { return std::pair{i / (nr * ns), static_cast<long>((i / ns) % nr)}; });

    std::ostringstream out;
    CsvWriter csv(out, {"h", "w", "realization", "state", "step", "input", "e_post_inject", "e_post_evolve",
                        "parity"});
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t c = 0; c < nc; ++c) {
        const ModelParams p = cfg.cell_params(c);
        for (std::size_t r = 0; r < nr; ++r) {
            double first_lo = INFINITY, first_hi = -INFINITY, last_lo = INFINITY, last_hi = -INFINITY;
            double max_step_drift = 0.0;
            int n_states = 0;
            for (std::size_t si = 0; si < ns; ++si) {
                const std::size_t i = (c * nr + r) * ns + si;
                if (!ok[i]) continue;
                const Trajectory& t = trajs[i];
                for (Index k = 0; k < t.conserved.rows(); ++k) {
                    csv.cell(p.h).cell(p.w).cell(r).cell(cfg.initial_states[si]).cell(static_cast<long long>(k));
                    csv.cell(t.inputs[static_cast<std::size_t>(k)]);
                    csv.cell(t.conserved(k, 0)).cell(t.conserved(k, 1)).cell(t.conserved(k, 2));
                    csv.end_row();
                    const double e = t.conserved(k, 0);
                    max_step_drift = std::max(max_step_drift, std::abs(t.conserved(k, 1) - e) /
                                                                  std::max(1.0, std::abs(e)));
                }
                if (t.conserved.rows() == 0) continue;
                ++n_states;
                first_lo = std::min(first_lo, t.conserved(0, 1));
                first_hi = std::max(first_hi, t.conserved(0, 1));
                last_lo = std::min(last_lo, t.conserved(t.conserved.rows() - 1, 1));
                last_hi = std::max(last_hi, t.conserved(t.conserved.rows() - 1, 1));
            }
            summary.push_back({{"h", p.h}, {"w", p.w}, {"realization", r}, {"n_states", n_states},
                               {"energy_spread_first", n_states ? first_hi - first_lo : 0.0},
                               {"energy_spread_last", n_states ? last_hi - last_lo : 0.0},
                               {"max_relative_energy_change_per_evolution", max_step_drift}});
        }
    }
    run.write_file("conserved_trace.csv", out.str());
    return {{"cells", summary}};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
    for (const auto& [k, name] : kind_names()) {
        if (k == kind) return name;
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    for (const auto& [k, n] : kind_names()) {
        if (n == name) return k;
    }
    throw ConfigError("unknown experiment '" + name + "'");
}

void ExperimentConfig::validate() const {
    ModelParams p;
    p.n_spins = n_spins;
    p.j_s = j_s;
    p.validate();
    if (h_values.empty() || w_values.empty()) throw ConfigError("model.h and model.w need at least one value");
    for (double h : h_values) {
        if (!std::isfinite(h)) throw ConfigError("model.h must be finite");
    }
    for (double w : w_values) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("model.w must be finite and >= 0");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("reservoir.dt must be > 0");
    for (double d : dt_values) {
        if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("reservoir.dt_values must be > 0");
    }
    if (realizations < 1) throw ConfigError("experiment.realizations must be >= 1");
    if (workers < 0) throw ConfigError("experiment.workers must be >= 0");
    if (output_dir.empty()) throw ConfigError("experiment.output_dir is empty");
    NamedInitialState::parse(initial_state);
    for (const auto& s : initial_states) NamedInitialState::parse(s);
    switch (experiment) {
        case ExperimentKind::dynamics_trace:
        case ExperimentKind::convergence_map:
        case ExperimentKind::convergence_curve:
        case ExperimentKind::conserved_trace:
            if (steps < 1) throw ConfigError("reservoir.steps must be >= 1");
            break;
        case ExperimentKind::task_sweep:
            if (tasks.empty()) throw ConfigError("task.tasks is empty");
            for (const auto& t : tasks) t.validate();
            split.validate(split.total());
            if (!(input_lo < input_hi)) throw ConfigError("task.input_lo must be < task.input_hi");
            break;
        case ExperimentKind::ipc_sweep:
            if (ipc_length < 2) throw ConfigError("ipc.length must be >= 2");
            if (ipc.d_max < 1) throw ConfigError("ipc.d_max must be >= 1");
            break;
        case ExperimentKind::phase_diagram: break;
    }
    if (experiment == ExperimentKind::convergence_curve && dt_values.empty()) {
        throw ConfigError("reservoir.dt_values is empty");
    }
    if (experiment == ExperimentKind::conserved_trace && initial_states.empty()) {
        throw ConfigError("reservoir.initial_states is empty");
    }
}

ModelParams ExperimentConfig::cell_params(std::size_t cell) const {
    ModelParams p;
    p.n_spins = n_spins;
    p.j_s = j_s;
    p.h = h_values.at(cell / w_values.size());
    p.w = w_values.at(cell % w_values.size());
    return p;
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    auto to_int = [&] { return static_cast<int>(parse_int(key, v)); };
    auto to_count = [&] {
        const long long n = parse_int(key, v);
        if (n < 0) throw ConfigError(key + " must be >= 0");
        return n;
    };

    if (key == "experiment.kind") c.experiment = parse_experiment_kind(v);
    else if (key == "experiment.realizations") c.realizations = to_int();
    else if (key == "experiment.master_seed") c.master_seed = parse_u64(key, v);
    else if (key == "experiment.output_dir") c.output_dir = v;
    else if (key == "experiment.workers") c.workers = to_int();
    else if (key == "model.n_spins") c.n_spins = to_int();
    else if (key == "model.j_s") c.j_s = parse_double(key, v);
    else if (key == "model.h") c.h_values = parse_grid(key, v);
    else if (key == "model.w") c.w_values = parse_grid(key, v);
    else if (key == "reservoir.dt") c.dt = parse_double(key, v);
    else if (key == "reservoir.dt_values") c.dt_values = parse_grid(key, v);
    else if (key == "reservoir.steps") c.steps = static_cast<std::size_t>(to_count());
    else if (key == "reservoir.initial_state") c.initial_state = v;
    else if (key == "reservoir.initial_states") c.initial_states = split_list(v);
    else if (key == "spectral.sector") {
        if (v == "even") c.sector = Parity::even;
        else if (v == "odd") c.sector = Parity::odd;
        else throw ConfigError(key + ": expected even or odd");
    }
    else if (key == "task.tasks") {
        c.tasks.clear();
        for (const auto& t : split_list(v)) c.tasks.push_back(parse_task(key, t));
    }
    else if (key == "task.washout") c.split.washout = to_count();
    else if (key == "task.train") c.split.train = to_count();
    else if (key == "task.test") c.split.test = to_count();
    else if (key == "task.ridge") c.ridge = parse_double(key, v);
    else if (key == "task.input_lo") c.input_lo = parse_double(key, v);
    else if (key == "task.input_hi") c.input_hi = parse_double(key, v);
    else if (key == "ipc.d_max") {
        c.ipc.d_max = to_int();
        if (c.ipc.d_max < 1) throw ConfigError(key + " must be >= 1");
        const DelayWindows defaults = default_delay_windows(c.ipc.d_max);
        std::erase_if(c.ipc.windows, [&](const auto& e) { return e.first > c.ipc.d_max; });
        for (const auto& [d, n] : defaults) c.ipc.windows.try_emplace(d, n);
    }
    else if (key == "ipc.windows") {
        DelayWindows w;
        for (const auto& item : split_list(v)) {
            const auto parts = split_list(item, ':');
            if (parts.size() != 2) throw ConfigError(key + ": entries are degree:window");
            w[static_cast<int>(parse_int(key, parts[0]))] = static_cast<int>(parse_int(key, parts[1]));
        }
        c.ipc.windows = std::move(w);
    }
    else if (key == "ipc.length") c.ipc_length = to_count();
    else if (key == "ipc.washout") c.ipc.washout = to_count();
    else if (key == "ipc.threshold") {
        if (v == "surrogate") c.ipc.threshold_mode = IpcConfig::ThresholdMode::surrogate;
        else if (v == "analytic") c.ipc.threshold_mode = IpcConfig::ThresholdMode::analytic;
        else throw ConfigError(key + ": expected surrogate or analytic");
    }
    else if (key == "ipc.surrogate_seed") c.ipc.surrogate_seed = parse_u64(key, v);
    else if (key == "ipc.surrogate_quantile") c.ipc.surrogate_quantile = parse_double(key, v);
    else if (key == "ipc.surrogate_samples") c.ipc.surrogate_samples = to_int();
    else if (key == "ipc.stop_after_empty_blocks") c.ipc.stop_after_empty_blocks = to_int();
    else if (key == "ipc.held_out_selection") {
        if (v == "true") c.ipc.held_out_selection = true;
        else if (v == "false") c.ipc.held_out_selection = false;
        else throw ConfigError(key + ": expected true or false");
    }
    else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    ExperimentConfig cfg;
    // Apply d_max before windows so an explicit window table wins.
    std::vector<std::pair<std::string, std::string>> deferred;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            throw ConfigError("config key '" + section + "' must sit inside a [section]");
        }
        for (const auto& [key, value] : body) {
            const std::string dotted = section + "." + key;
            if (dotted == "ipc.windows") deferred.emplace_back(dotted, value.data());
            else set_config_value(cfg, dotted, value.data());
        }
    }
    for (const auto& [k, v] : deferred) set_config_value(cfg, k, v);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(is);
}

void apply_preset(ExperimentConfig& c, const std::string& preset) {
    if (preset != "paper" && preset != "desk") throw ConfigError("unknown preset '" + preset + "' (paper, desk)");
    const bool paper = preset == "paper";
    switch (c.experiment) {
        case ExperimentKind::phase_diagram: c.realizations = paper ? 1200 : 200; break;
        case ExperimentKind::convergence_map: c.realizations = paper ? 600 : 20; break;
        case ExperimentKind::convergence_curve: c.realizations = paper ? 100 : 20; break;
        case ExperimentKind::task_sweep: c.realizations = paper ? 100 : 20; break;
        case ExperimentKind::ipc_sweep: c.realizations = paper ? 10 : 5; break;
        case ExperimentKind::dynamics_trace:
        case ExperimentKind::conserved_trace: c.realizations = 1; break;
    }
    if (c.experiment == ExperimentKind::phase_diagram || c.experiment == ExperimentKind::convergence_map) {
        c.h_values = log_grid(0.01, 100.0, 20);
        c.w_values = log_grid(0.01, 100.0, 20);
    }
    if (c.experiment == ExperimentKind::convergence_map || c.experiment == ExperimentKind::convergence_curve) {
        c.steps = 200;
    }
    if (c.experiment == ExperimentKind::ipc_sweep) c.ipc_length = paper ? 100000 : 20000;
    if (paper) c.n_spins = 10;
}

std::string ExperimentConfig::to_ini() const {
    std::ostringstream os;
    auto d = [](double v) { return format_double(v); };
    os << "[experiment]\n"
       << "kind = " << to_string(experiment) << "\n"
       << "realizations = " << realizations << "\n"
       << "master_seed = " << master_seed << "\n"
       << "output_dir = " << output_dir << "\n"
       << "workers = " << workers << "\n\n"
       << "[model]\n"
       << "n_spins = " << n_spins << "\n"
       << "j_s = " << d(j_s) << "\n"
       << "h = " << join_doubles(h_values) << "\n"
       << "w = " << join_doubles(w_values) << "\n\n"
       << "[reservoir]\n"
       << "dt = " << d(dt) << "\n"
       << "dt_values = " << join_doubles(dt_values) << "\n"
       << "steps = " << steps << "\n"
       << "initial_state = " << initial_state << "\n"
       << "initial_states = " << join_strings(initial_states) << "\n\n"
       << "[spectral]\n"
       << "sector = " << (sector == Parity::even ? "even" : "odd") << "\n\n";
    std::vector<std::string> task_tokens;
    for (const auto& t : tasks) task_tokens.push_back(task_token(t));
    os << "[task]\n"
       << "tasks = " << join_strings(task_tokens) << "\n"
       << "washout = " << split.washout << "\n"
       << "train = " << split.train << "\n"
       << "test = " << split.test << "\n"
       << "ridge = " << d(ridge) << "\n"
       << "input_lo = " << d(input_lo) << "\n"
       << "input_hi = " << d(input_hi) << "\n\n"
       << "[ipc]\n"
       << "d_max = " << ipc.d_max << "\n"
       << "windows = " << windows_text(ipc.windows) << "\n"
       << "length = " << ipc_length << "\n"
       << "washout = " << ipc.washout << "\n"
       << "threshold = "
       << (ipc.threshold_mode == IpcConfig::ThresholdMode::surrogate ? "surrogate" : "analytic") << "\n"
       << "surrogate_seed = " << ipc.surrogate_seed << "\n"
       << "surrogate_quantile = " << d(ipc.surrogate_quantile) << "\n"
       << "surrogate_samples = " << ipc.surrogate_samples << "\n"
       << "stop_after_empty_blocks = " << ipc.stop_after_empty_blocks << "\n"
       << "held_out_selection = " << (ipc.held_out_selection ? "true" : "false") << "\n";
    return os.str();
}

nlohmann::json ExperimentConfig::to_json() const {
    std::vector<std::string> task_tokens;
    for (const auto& t : tasks) task_tokens.push_back(task_token(t));
    nlohmann::json windows = nlohmann::json::object();
    for (const auto& [deg, n] : ipc.windows) windows[std::to_string(deg)] = n;
    return {
        {"experiment",
         {{"kind", to_string(experiment)},
          {"realizations", realizations},
          {"master_seed", master_seed},
          {"output_dir", output_dir},
          {"workers", workers}}},
        {"model", {{"n_spins", n_spins}, {"j_s", j_s}, {"h", h_values}, {"w", w_values}}},
        {"reservoir",
         {{"dt", dt},
          {"dt_values", dt_values},
          {"steps", steps},
          {"initial_state", initial_state},
          {"initial_states", initial_states}}},
        {"spectral", {{"sector", sector == Parity::even ? "even" : "odd"}}},
        {"task",
         {{"tasks", task_tokens},
          {"washout", split.washout},
          {"train", split.train},
          {"test", split.test},
          {"ridge", ridge},
          {"input_lo", input_lo},
          {"input_hi", input_hi}}},
        {"ipc",
         {{"d_max", ipc.d_max},
          {"windows", windows},
          {"length", ipc_length},
          {"washout", ipc.washout},
          {"threshold", ipc.threshold_mode == IpcConfig::ThresholdMode::surrogate ? "surrogate" : "analytic"},
          {"surrogate_seed", ipc.surrogate_seed},
          {"surrogate_quantile", ipc.surrogate_quantile},
          {"surrogate_samples", ipc.surrogate_samples},
          {"stop_after_empty_blocks", ipc.stop_after_empty_blocks},
          {"held_out_selection", ipc.held_out_selection}}},
    };
}

CostEstimate estimate_cost(const ExperimentConfig& c) {
    c.validate();
    // Single-core timings measured on the reference machine, scaled as dim^3.
    constexpr double kSectorEig512 = 0.03;
    constexpr double kSetup1024 = 3.0;  // full eigensystem plus projected operators
    constexpr double kStep256 = 6.5e-3;
    CostEstimate e;
    const auto cells = static_cast<long long>(c.n_cells());
    const long long items = cells * c.realizations;
    const auto dim = Index{1} << c.n_spins;
    const double scale = std::pow(static_cast<double>(dim) / 256.0, 3);
    const auto steps = static_cast<long long>(c.steps);
    switch (c.experiment) {
        case ExperimentKind::phase_diagram:
            e.diagonalizations = items;
            e.diagonalization_dim = dim / 2;
            e.seconds = items * kSectorEig512 * std::pow(static_cast<double>(dim / 2) / 512.0, 3);
            break;
        case ExperimentKind::dynamics_trace: e.reservoir_steps = items * steps; break;
        case ExperimentKind::convergence_map: e.reservoir_steps = items * 2 * steps; break;
        case ExperimentKind::convergence_curve:
            e.reservoir_steps = items * static_cast<long long>(c.dt_values.size()) * 2 * steps;
            break;
        case ExperimentKind::task_sweep: e.reservoir_steps = items * c.split.total(); break;
        case ExperimentKind::ipc_sweep: e.reservoir_steps = items * (c.ipc.washout + c.ipc_length); break;
        case ExperimentKind::conserved_trace:
            e.reservoir_steps = items * static_cast<long long>(c.initial_states.size()) * steps;
            break;
    }
    if (c.experiment != ExperimentKind::phase_diagram) {
        e.diagonalizations = items * (c.experiment == ExperimentKind::convergence_curve
                                          ? static_cast<long long>(c.dt_values.size())
                                          : 1);
        e.diagonalization_dim = dim;
        e.seconds = e.diagonalizations * kSetup1024 * std::pow(static_cast<double>(dim) / 1024.0, 3) +
                    static_cast<double>(e.reservoir_steps) * kStep256 * scale;
    }
    const int workers = c.workers > 0 ? c.workers : default_workers();
    e.seconds /= std::max(1, workers);
    return e;
}

nlohmann::json run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    Run run(config);
    nlohmann::json summary;
    switch (config.experiment) {
        case ExperimentKind::phase_diagram: summary = run_phase_diagram(config, run); break;
        case ExperimentKind::dynamics_trace: summary = run_dynamics_trace(config, run); break;
        case ExperimentKind::convergence_map: summary = run_convergence_map(config, run); break;
        case ExperimentKind::convergence_curve: summary = run_convergence_curve(config, run); break;
        case ExperimentKind::task_sweep: summary = run_task_sweep(config, run); break;
        case ExperimentKind::ipc_sweep: summary = run_ipc_sweep(config, run); break;
        case ExperimentKind::conserved_trace: summary = run_conserved_trace(config, run); break;
    }
    summary["experiment"] = to_string(config.experiment);
    run.write_file("summary.json", summary.dump(2) + "\n");
    run.write_file("config.ini", config.to_ini());
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json manifest = run.manifest(wall);
    manifest["summary"] = summary;
    std::ofstream os(fs::path(config.output_dir) / "manifest.json");
    os << manifest.dump(2) << "\n";
    if (!os) throw std::runtime_error("cannot write manifest.json in " + config.output_dir);
    return manifest;
}

std::uint32_t file_crc32(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    const std::string bytes = buf.str();
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

std::string code_version() { return QRC_VERSION; }

}  // namespace qrc

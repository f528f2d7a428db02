#include "qrc/spectral.hpp"

#include "qrc/csv.hpp"
#include "qrc/errors.hpp"
#include "qrc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qrc {

GapRatioStats gap_ratio_stats(const std::vector<double>& e) {
    if (e.size() < 3) throw ValidationError("gap_ratio_stats: need at least 3 eigenvalues");
    for (std::size_t i = 1; i < e.size(); ++i) {
        if (!(e[i] >= e[i - 1])) {
            throw ValidationError("gap_ratio_stats: eigenvalues not sorted ascending at index " +
                                  std::to_string(i));
        }
    }
    const double span = e.back() - e.front();
    const double cutoff = 1e-12 * span;

    GapRatioStats out;
    out.ratios.reserve(e.size() - 2);
    double sum = 0.0;
    for (std::size_t n = 1; n + 1 < e.size(); ++n) {
        const double d0 = e[n] - e[n - 1];
        const double d1 = e[n + 1] - e[n];
        const double hi = std::max(d0, d1);
        if (hi < cutoff || hi == 0.0) {
            ++out.n_dropped;
            continue;
        }
        const double r = std::min(d0, d1) / hi;
        out.ratios.push_back(r);
        sum += r;
    }
    if (out.ratios.empty()) {
        throw NumericError("gap_ratio_stats: every gap pair is degenerate");
    }
    out.mean_r = sum / static_cast<double>(out.ratios.size());
    return out;
}

GapRatioStats gap_ratio_stats(const RealVector& eigenvalues) {
    return gap_ratio_stats(std::vector<double>(eigenvalues.begin(), eigenvalues.end()));
}

GapRatioStats realization_gap_ratio(const DisorderRealization& real, Parity sector) {
    return gap_ratio_stats(symmetric_eigenvalues(build_real_sector_hamiltonian(real, sector)));
}

std::vector<PhaseCell> phase_scan(const std::vector<double>& h_grid, const std::vector<double>& w_grid,
                                  const ModelParams& base, const PhaseScanOptions& options) {
    if (h_grid.empty() || w_grid.empty()) throw ValidationError("phase_scan: empty grid");
    if (options.n_realizations < 1) throw ValidationError("phase_scan: n_realizations must be >= 1");
    base.validate();

    const std::size_t nh = h_grid.size();
    const std::size_t nw = w_grid.size();
    const auto nr = static_cast<std::size_t>(options.n_realizations);
    std::vector<double> mean_r(nh * nw * nr);
    std::vector<int> dropped(nh * nw * nr);

    parallel_for(nh * nw * nr, options.workers, [&](std::size_t item) {
        const std::size_t r = item % nr;
        const std::size_t cell = item / nr;
        const std::size_t hi = cell / nw;
        const std::size_t wi = cell % nw;
        ModelParams p = base;
        p.h = h_grid[hi];
        p.w = w_grid[wi];
        p.seed = derive_seed({base.seed, hi, wi, r});
        try {
            const GapRatioStats s = realization_gap_ratio(sample_realization(p), options.sector);
            mean_r[item] = s.mean_r;
            dropped[item] = s.n_dropped;
        } catch (const std::exception& ex) {
            throw NumericError("phase_scan: h=" + format_double(p.h) + " w=" + format_double(p.w) +
                               " realization " + std::to_string(r) + ": " + ex.what());
        }
    });

    std::vector<PhaseCell> cells;
    cells.reserve(nh * nw);
    for (std::size_t cell = 0; cell < nh * nw; ++cell) {
        PhaseCell c;
        c.h = h_grid[cell / nw];
        c.w = w_grid[cell % nw];
        c.n_realizations = options.n_realizations;
        double sum = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
            sum += mean_r[cell * nr + r];
            c.n_dropped_total += dropped[cell * nr + r];
        }
        c.mean_r = sum / static_cast<double>(nr);
        if (nr > 1) {
            double ss = 0.0;
            for (std::size_t r = 0; r < nr; ++r) {
                const double d = mean_r[cell * nr + r] - c.mean_r;
                ss += d * d;
            }
            c.stderr_r = std::sqrt(ss / static_cast<double>(nr - 1) / static_cast<double>(nr));
        }
        cells.push_back(c);
    }
    return cells;
}

void write_phase_csv(std::ostream& os, const std::vector<PhaseCell>& cells) {
    CsvWriter csv(os, {"h", "w", "mean_r", "stderr_r", "n_realizations", "n_dropped_total"});
    for (const auto& c : cells) {
        csv.cell(c.h).cell(c.w).cell(c.mean_r).cell(c.stderr_r).cell(c.n_realizations).cell(
            c.n_dropped_total);
        csv.end_row();
    }
}

std::vector<double> log_grid(double lo, double hi, int n) {
    if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw ValidationError("log_grid: need n >= 1 and 0 < lo <= hi");
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
    return out;
}

}  // namespace qrc

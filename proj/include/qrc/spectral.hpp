#pragma once

// Adjacent-gap ratio statistics for telling ergodic from localized spectra.
// Reference means: ~0.386 for Poisson level statistics, ~0.53 for GOE.

#include "qrc/spin_model.hpp"

#include <iosfwd>
#include <vector>

namespace qrc {

struct GapRatioStats {
    std::vector<double> ratios;
    double mean_r = 0.0;
    int n_dropped = 0;
};

/// r_n = min(d_n, d_{n+1}) / max(d_n, d_{n+1}) over consecutive gaps of an
/// ascending spectrum. Pairs whose larger gap is below 1e-12 of the spectral
/// span are skipped and counted in n_dropped.
GapRatioStats gap_ratio_stats(const std::vector<double>& eigenvalues);
GapRatioStats gap_ratio_stats(const RealVector& eigenvalues);

/// Mean <r> of one realization, diagonalizing the given parity sector.
GapRatioStats realization_gap_ratio(const DisorderRealization& real, Parity sector = Parity::even);

struct PhaseCell {
    double h = 0.0;
    double w = 0.0;
    double mean_r = 0.0;
    double stderr_r = 0.0;
    int n_realizations = 0;
    long n_dropped_total = 0;
};

struct PhaseScanOptions {
    int n_realizations = 1;
    Parity sector = Parity::even;
    int workers = 1;
};

/// Heat map of <r> over an (h, w) grid, rows ordered h-major. Each realization
/// is seeded by derive_seed(base.seed, h index, w index, realization index), so
/// results do not depend on the worker count.
std::vector<PhaseCell> phase_scan(const std::vector<double>& h_grid, const std::vector<double>& w_grid,
                                  const ModelParams& base, const PhaseScanOptions& options);

/// CSV with header h,w,mean_r,stderr_r,n_realizations,n_dropped_total.
void write_phase_csv(std::ostream& os, const std::vector<PhaseCell>& cells);

/// n points log-spaced over [lo, hi].
std::vector<double> log_grid(double lo, double hi, int n);

}  // namespace qrc

#include "qrc/csv.hpp"
#include "qrc/errors.hpp"
#include "qrc/spectral.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace qrc;

TEST_CASE("gap_ratio_stats basics") {
    const GapRatioStats s = gap_ratio_stats(std::vector<double>{0, 1, 3});
    REQUIRE(s.ratios.size() == 1);
    CHECK(s.ratios[0] == 0.5);
    CHECK(s.mean_r == 0.5);

    CHECK_THROWS_AS(gap_ratio_stats(std::vector<double>{0, 2, 1}), ValidationError);
    CHECK_THROWS_AS(gap_ratio_stats(std::vector<double>{0, 1}), ValidationError);

    // A zero-width pair is dropped and counted; the next pair gives r = 0.
    const GapRatioStats d = gap_ratio_stats(std::vector<double>{0, 0, 0, 1});
    CHECK(d.n_dropped == 1);
    REQUIRE(d.ratios.size() == 1);
    CHECK(d.ratios[0] == 0.0);
}

TEST_CASE("gap ratios are affine and reversal invariant") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<double> e(200);
    for (auto& x : e) x = u(rng);
    std::sort(e.begin(), e.end());
    const GapRatioStats base = gap_ratio_stats(e);

    std::vector<double> scaled(e);
    for (auto& x : scaled) x = 4.0 * x + 16.0;
    const auto sr = gap_ratio_stats(scaled).ratios;
    REQUIRE(sr.size() == base.ratios.size());
    for (std::size_t i = 0; i < sr.size(); ++i) CHECK(std::abs(sr[i] - base.ratios[i]) <= 1e-12);

    std::vector<double> rev(e.rbegin(), e.rend());
    for (auto& x : rev) x = -x;
    std::vector<double> a = gap_ratio_stats(rev).ratios, b = base.ratios;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    for (double r : base.ratios) {
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("Poisson and GOE references") {
    std::mt19937_64 rng(2024);
    std::exponential_distribution<double> gap(1.0);
    std::vector<double> levels(100000);
    double acc = 0.0;
    for (auto& x : levels) x = acc += gap(rng);
    CHECK(gap_ratio_stats(levels).mean_r == doctest::Approx(0.386).epsilon(0.005 / 0.386));

    std::normal_distribution<double> g;
    double sum = 0.0;
    const int samples = 8;
    for (int s = 0; s < samples; ++s) {
        RealMatrix a(512, 512);
        for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
        sum += gap_ratio_stats(symmetric_eigenvalues((a + a.transpose()) / 2)).mean_r;
    }
    CHECK(std::abs(sum / samples - 0.531) < 0.01);
}

TEST_CASE("phase_scan is deterministic across worker counts") {
    ModelParams base;
    base.n_spins = 6;
    base.seed = 12;
    PhaseScanOptions one{3, Parity::even, 1};
    PhaseScanOptions many{3, Parity::even, 4};
    const std::vector<double> hs{0.1, 10.0}, ws{0.0, 50.0};
    std::ostringstream a, b;
    write_phase_csv(a, phase_scan(hs, ws, base, one));
    write_phase_csv(b, phase_scan(hs, ws, base, many));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("h,w,mean_r,stderr_r,n_realizations,n_dropped_total\n", 0) == 0);

    const auto cells = phase_scan(hs, ws, base, one);
    REQUIRE(cells.size() == 4);
    CHECK(cells[1].h == 0.1);
    CHECK(cells[1].w == 50.0);
    CHECK(cells[0].n_realizations == 3);

    CHECK_THROWS_AS(phase_scan({}, ws, base, one), ValidationError);
    CHECK_THROWS_AS(phase_scan(hs, ws, base, PhaseScanOptions{0, Parity::even, 1}), ValidationError);
}

TEST_CASE("log_grid") {
    const auto g = log_grid(0.01, 100.0, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == doctest::Approx(0.01));
    CHECK(g[2] == doctest::Approx(1.0));
    CHECK(g.back() == doctest::Approx(100.0));
}

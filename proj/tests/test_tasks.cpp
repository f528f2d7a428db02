#include "qrc/errors.hpp"
#include "qrc/tasks.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <sstream>

using namespace qrc;

namespace {

// Every degree vector over `window` delays summing to `degree`.
std::set<std::string> brute_force_targets(int degree, int window) {
    std::set<std::string> out;
    std::vector<int> deg(static_cast<std::size_t>(window), 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == window) {
            if (left != 0) return;
            IpcTarget t;
            for (int i = 0; i < window; ++i)
                if (deg[static_cast<std::size_t>(i)] > 0) t.terms.push_back({i, deg[static_cast<std::size_t>(i)]});
            out.insert(t.notation());
            return;
        }
        for (int d = 0; d <= left; ++d) {
            deg[static_cast<std::size_t>(pos)] = d;
            rec(pos + 1, left - d);
        }
        deg[static_cast<std::size_t>(pos)] = 0;
    };
    rec(0, degree);
    return out;
}

// Columns s~_{k-j} for j < taps, zero before the start, plus bias.
DesignMatrix delay_line(const std::vector<double>& s, int taps) {
    const auto len = static_cast<Index>(s.size());
    RealMatrix f = RealMatrix::Zero(len, taps);
    std::vector<std::string> labels;
    for (int j = 0; j < taps; ++j) {
        labels.push_back("tap" + std::to_string(j));
        for (Index k = j; k < len; ++k) f(k, j) = s[static_cast<std::size_t>(k - j)];
    }
    return DesignMatrix::with_bias(f, labels);
}

double legendre_closed_form(int d, double x) {
    switch (d) {
        case 0: return 1.0;
        case 1: return x;
        case 2: return (3 * x * x - 1) / 2;
        case 3: return (5 * std::pow(x, 3) - 3 * x) / 2;
        case 4: return (35 * std::pow(x, 4) - 30 * x * x + 3) / 8;
        case 5: return (63 * std::pow(x, 5) - 70 * std::pow(x, 3) + 15 * x) / 8;
        case 6: return (231 * std::pow(x, 6) - 315 * std::pow(x, 4) + 105 * x * x - 5) / 16;
    }
    return 0.0;
}

}  // namespace

TEST_CASE("gen_input") {
    const auto a = gen_input(InputSpec::uniform(0.0, 0.2), 10000, 1);
    CHECK(std::all_of(a.begin(), a.end(), [](double s) { return s >= 0.0 && s <= 0.2; }));
    const auto b = gen_input(InputSpec::binary(), 1000, 2);
    CHECK(std::all_of(b.begin(), b.end(), [](double s) { return s == 0.0 || s == 1.0; }));
    CHECK(std::count(b.begin(), b.end(), 1.0) > 400);
    const auto c = gen_input(InputSpec::uniform(0.0, 1.0), 100000, 3);
    double mean = 0.0;
    for (double s : c) mean += s;
    CHECK(std::abs(mean / 1e5 - 0.5) <= 0.005);
    CHECK(gen_input(InputSpec::uniform(0.0, 1.0), 50, 4) == gen_input(InputSpec::uniform(0.0, 1.0), 50, 4));
    CHECK(gen_input(InputSpec::uniform(0.0, 1.0), 50, 4) != gen_input(InputSpec::uniform(0.0, 1.0), 50, 5));
    CHECK_THROWS_AS(gen_input(InputSpec::uniform(0.5, 0.5), 5, 1), ValidationError);
    CHECK_THROWS_AS(gen_input(InputSpec::uniform(0.6, 0.5), 5, 1), ValidationError);
}

TEST_CASE("narma_target") {
    const std::vector<double> zeros(2000, 0.0);
    const auto y = narma_target(zeros, 10);
    CHECK(y[0] == doctest::Approx(0.1));
    // Fixed point of y = 0.3 y + 0.05 * 10 y^2 + 0.1.
    const double fixed = (0.7 - std::sqrt(0.49 - 0.2)) / 1.0;
    CHECK(fixed == doctest::Approx(0.1615).epsilon(1e-3));
    CHECK(std::abs(y.back() - fixed) <= 1e-12);

    // Explicit recurrence for a short input, n = 2.
    const std::vector<double> s{0.1, 0.2, 0.05, 0.15};
    const auto y2 = narma_target(s, 2);
    std::vector<double> e(4);
    e[0] = 0.1;
    e[1] = 0.3 * e[0] + 0.05 * e[0] * e[0] + 0.1;
    e[2] = 0.3 * e[1] + 0.05 * e[1] * (e[1] + e[0]) + 1.5 * s[0] * s[1] + 0.1;
    e[3] = 0.3 * e[2] + 0.05 * e[2] * (e[2] + e[1]) + 1.5 * s[1] * s[2] + 0.1;
    for (std::size_t k = 0; k < 4; ++k) CHECK(y2[k] == doctest::Approx(e[k]).epsilon(1e-15));

    const auto bounded = narma_target(gen_input(InputSpec::uniform(0.0, 0.2), 10000, 7), 10);
    CHECK(std::all_of(bounded.begin(), bounded.end(), [](double v) { return std::isfinite(v) && v < 1.0; }));

    const auto wide = gen_input(InputSpec::uniform(0.0, 1.0), 10000, 8);
    CHECK_THROWS_AS(narma_target(wide, 10), NumericError);
    CHECK_THROWS_AS(narma_target(zeros, 0), ValidationError);
}

TEST_CASE("delay_target") {
    const auto s = gen_input(InputSpec::uniform(0.0, 1.0), 30, 9);
    CHECK(delay_target(s, 0) == s);
    const auto y = delay_target(s, 10);
    CHECK(y[10] == s[0]);
    CHECK(y[29] == s[19]);
    for (int k = 0; k < 10; ++k) CHECK(y[static_cast<std::size_t>(k)] == 0.0);
    const auto z = delay_target(s, 30);
    CHECK(std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));
    CHECK_THROWS_AS(delay_target(s, -1), ValidationError);

    const RealVector t = build_task_target(TaskSpec::delay(3), s);
    CHECK(t(5) == s[2]);
    CHECK(TaskSpec::narma(10).name() == "narma10");
    CHECK(TaskSpec::delay(10).name() == "delay10");
}

TEST_CASE("legendre") {
    for (double x : {-1.0, -0.3, 0.0, 0.5, 1.0}) {
        CHECK(legendre_eval(0, x) == 1.0);
        for (int d = 1; d <= 6; ++d) {
            CHECK(legendre_eval(d, x) == doctest::Approx(legendre_closed_form(d, x)).epsilon(1e-13));
            CHECK(std::abs(legendre_eval(d, x)) <= 1.0 + 1e-15);
        }
    }
    CHECK(legendre_eval(1, 0.3) == 0.3);
    CHECK(legendre_eval(2, 0.5) == doctest::Approx(-0.125));
    CHECK_THROWS_AS(legendre_eval(-1, 0.0), ValidationError);

    const auto x = gen_input(InputSpec::uniform(-1.0, 1.0), 100000, 10);
    for (int i = 0; i <= 6; ++i) {
        for (int j = 0; j <= 6; ++j) {
            double m = 0.0;
            for (double v : x) m += legendre_eval(i, v) * legendre_eval(j, v);
            m /= 1e5;
            if (i == j) CHECK(m == doctest::Approx(1.0 / (2 * i + 1)).epsilon(0.1));
            else CHECK(std::abs(m) < 0.01);
        }
    }
}

TEST_CASE("IPC targets") {
    const IpcTarget t = IpcTarget::parse("d1@3*d2@0");
    CHECK(t.notation() == "d2@0*d1@3");
    CHECK(t.total_degree() == 3);
    CHECK(t.max_delay() == 3);
    CHECK(IpcTarget::parse(t.notation()) == t);
    CHECK_THROWS_AS(IpcTarget::parse("d1@0*d1@0"), ValidationError);
    CHECK_THROWS_AS(IpcTarget::parse("x1@0"), ValidationError);
    CHECK_THROWS_AS(IpcTarget::parse("d0@1"), ValidationError);

    const auto d1 = enumerate_ipc_targets(1, {{1, 3}});
    REQUIRE(d1.size() == 3);
    CHECK(d1[0].notation() == "d1@0");
    CHECK(d1[2].notation() == "d1@2");

    const auto d2 = enumerate_ipc_targets(2, {{1, 1}, {2, 2}});
    std::vector<std::string> names;
    for (const auto& x : d2) names.push_back(x.notation());
    CHECK(names == std::vector<std::string>{"d1@0", "d2@0", "d1@0*d1@1", "d2@1"});

    for (int degree = 1; degree <= 5; ++degree) {
        for (int window = 1; window <= 6; ++window) {
            DelayWindows w;
            for (int d = 1; d <= degree; ++d) w[d] = window;
            std::set<std::string> got;
            for (const auto& x : enumerate_ipc_targets(degree, w))
                if (x.total_degree() == degree) got.insert(x.notation());
            CHECK(got == brute_force_targets(degree, window));
        }
    }

    const auto all = enumerate_ipc_targets(6, default_delay_windows(6));
    CHECK(std::is_sorted(all.begin(), all.end(), canonical_less));
    CHECK(all.back().total_degree() == 6);
    for (std::size_t i = 1; i < all.size(); ++i) CHECK_FALSE(all[i] == all[i - 1]);

    DelayWindows huge;
    for (int d = 1; d <= 6; ++d) huge[d] = 200;
    CHECK_THROWS_AS(enumerate_ipc_targets(6, huge), SizeError);

    const auto s = gen_input(InputSpec::uniform(-1.0, 1.0), 20, 11);
    const RealVector y = evaluate_ipc_target(t, s);
    CHECK(y(0) == doctest::Approx(legendre_eval(2, s[0]) * legendre_eval(1, 0.0)));
    CHECK(y(10) == doctest::Approx(legendre_eval(2, s[10]) * legendre_eval(1, s[7])));
}

TEST_CASE("ipc_capacity") {
    IpcConfig cfg;
    cfg.d_max = 3;
    cfg.windows = default_delay_windows(3);
    cfg.washout = 200;
    cfg.surrogate_samples = 500;
    const auto s = gen_input(InputSpec::uniform(-1.0, 1.0), 10200, 12);

    SUBCASE("delay-line oracle") {
        const CapacityReport r = ipc_capacity(delay_line(s, 10), s, cfg);
        CHECK(std::abs(r.total - 10.0) <= 0.05);
        CHECK(std::abs(r.per_degree.at(1) - 10.0) <= 0.05);
        CHECK(r.counted_per_degree.at(1) == 10);
        CHECK(r.per_degree.at(2) == 0.0);
        CHECK(r.per_degree.at(3) == 0.0);
        CHECK(r.n_variables == 10);
        CHECK(r.normalized_total == doctest::Approx(r.total / 10));
        for (const auto& t : r.per_target) {
            if (t.target.total_degree() == 1 && t.target.max_delay() < 10) CHECK(t.raw >= 1.0 - 1e-9);
            if (t.passed) CHECK(t.raw >= r.threshold_table.at(t.target.total_degree()));
        }
        std::ostringstream os;
        write_capacity_csv(os, r);
        CHECK(os.str().rfind("degree,capacity,threshold,n_targets_counted\n1,", 0) == 0);
        nlohmann::json j;
        to_json(j, r);
        CHECK(j["per_degree"]["1"].get<double>() == doctest::Approx(10.0).epsilon(0.005));
    }
    SUBCASE("independent input surrogate") {
        const auto other = gen_input(InputSpec::uniform(-1.0, 1.0), 10200, 13);
        const CapacityReport r = ipc_capacity(delay_line(other, 10), s, cfg);
        CHECK(r.total <= 0.05);
    }
    SUBCASE("realizable nonlinear target") {
        // Add the exact target P2(s_k) P1(s_{k-1}) as a column.
        DesignMatrix x = delay_line(s, 3);
        const RealVector extra = evaluate_ipc_target(IpcTarget::parse("d2@0*d1@1"), s);
        RealMatrix f(x.rows(), 4);
        f << x.values.leftCols(3), extra;
        const CapacityReport r = ipc_capacity(DesignMatrix::with_bias(f, {"a", "b", "c", "e"}), s, cfg);
        bool found = false;
        for (const auto& t : r.per_target) {
            if (t.target.notation() == "d2@0*d1@1") {
                found = true;
                CHECK(t.raw >= 1.0 - 1e-9);
                CHECK(t.passed);
            }
        }
        CHECK(found);
        CHECK(r.total <= 4.0 * 1.01);
        CHECK(r.per_degree.at(3) >= 0.99);
    }
    SUBCASE("held-out scores") {
        const CapacityReport r = ipc_capacity(delay_line(s, 10), s, cfg);
        REQUIRE(r.held_out_threshold_table.size() == 3);
        for (const auto& t : r.per_target) {
            if (t.target.total_degree() == 1 && t.target.max_delay() < 10) CHECK(t.held_out >= 1.0 - 1e-9);
            if (t.passed) CHECK(t.held_out >= r.held_out_threshold_table.at(t.target.total_degree()));
        }
        cfg.held_out_selection = false;
        const CapacityReport plain = ipc_capacity(delay_line(s, 10), s, cfg);
        CHECK(plain.held_out_threshold_table.empty());
        CHECK(std::abs(plain.total - r.total) <= 0.05);
    }
    SUBCASE("nonlinear echo-state design respects the bound") {
        // 20 tanh units with random recurrent and input weights.
        std::mt19937_64 rng(14);
        std::normal_distribution<double> g;
        const Index units = 20;
        RealMatrix w(units, units);
        RealVector win(units);
        for (Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng) * 0.9 / std::sqrt(double(units));
        for (auto& v : win) v = g(rng);
        RealMatrix f(static_cast<Index>(s.size()), units);
        RealVector state = RealVector::Zero(units);
        for (Index k = 0; k < f.rows(); ++k) {
            state = (w * state + win * s[static_cast<std::size_t>(k)]).array().tanh();
            f.row(k) = state.transpose();
        }
        std::vector<std::string> labels;
        for (Index j = 0; j < units; ++j) labels.push_back("u" + std::to_string(j));
        const CapacityReport r = ipc_capacity(DesignMatrix::with_bias(f, labels), s, cfg);
        CHECK(r.total > 0.5 * units);
        CHECK(r.total <= 1.01 * units);
        CHECK(r.per_degree.at(1) > 1.0);
        CHECK(r.per_degree.at(2) + r.per_degree.at(3) > 0.1);
    }
    SUBCASE("analytic thresholds") {
        cfg.threshold_mode = IpcConfig::ThresholdMode::analytic;
        const CapacityReport r = ipc_capacity(delay_line(s, 10), s, cfg);
        CHECK(r.threshold_table.at(1) == doctest::Approx(2.0 * 11 / 10000));
        CHECK(std::abs(r.total - 10.0) <= 0.05);
    }
    SUBCASE("errors") {
        const DesignMatrix x = delay_line(s, 2);
        CHECK_THROWS_AS(ipc_capacity(x, std::span(s).first(100), cfg), ValidationError);
        auto bad = s;
        bad[5] = 1.5;
        CHECK_THROWS_AS(ipc_capacity(x, bad, cfg), ValidationError);
        cfg.washout = 10;
        CHECK_THROWS_AS(ipc_capacity(x, s, cfg), ValidationError);
        cfg.washout = 10200;
        CHECK_THROWS_AS(ipc_capacity(x, s, cfg), ValidationError);
    }
}

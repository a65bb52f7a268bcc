#include <doctest.h>

#include "oracles.hpp"

#include <robustcredit/errors.hpp>
#include <robustcredit/hjb.hpp>
#include <robustcredit/pricing.hpp>

#include <cmath>
#include <random>

using namespace robustcredit;

namespace {

nlohmann::json benchmark_json() {
    return nlohmann::json::parse(read_text_file(oracle::config_path("benchmark.json")));
}

/// One obligor with constant intensities in the alive state.
nlohmann::json single_name_json(double r, double gamma, double h, double h_ref, double mu, bool no_uncertainty) {
    nlohmann::json doc;
    doc["M"] = 1;
    doc["r"] = r;
    doc["gamma"] = gamma;
    doc["T"] = 1.0;
    doc["grid_steps"] = 1000;
    doc["no_uncertainty"] = no_uncertainty;
    doc["obligors"] = {{{"maturity", 2.0}, {"coupon", 0.3}, {"recovery", 0.5}}};
    doc["intensities"]["reference"] = h_ref;
    doc["intensities"]["risk_neutral"] = h;
    doc["intensities"]["penalty_mu"] = mu;
    return doc;
}

const DefaultState kS00 = DefaultState::from_bitstring("00");
const DefaultState kS10 = DefaultState::from_bitstring("10");
const DefaultState kS01 = DefaultState::from_bitstring("01");
const DefaultState kS11 = DefaultState::from_bitstring("11");

}  // namespace

TEST_SUITE("ytransform") {
    TEST_CASE("evaluation examples") {
        const YTransform half(0.5);
        CHECK(half.delta() == doctest::Approx(1.0));
        CHECK(std::abs(y_eval(half, 1.0, 1.0) - std::exp(-1.0)) <= 1e-15);
        CHECK(std::abs(y_eval(half, 2.0, 4.0) - 2.4261226) <= 1e-7);
        CHECK(std::abs(y_eval(half, 1e-15, 2.0) - 2.0) <= 1e-12);
        CHECK_THROWS_AS(y_eval(half, 0.0, 1.0), DomainError);
        CHECK_THROWS_AS(y_eval(half, 1.0, -1.0), DomainError);
        CHECK_THROWS_AS(YTransform(1.0), DomainError);
    }

    TEST_CASE("log-domain evaluation stays consistent where the direct form underflows") {
        const YTransform yt(0.3);
        const double y = 800.0;
        const double x = 0.9;
        const double direct = oracle::y_direct(0.3, y, x);
        CHECK(std::abs(yt.log_eval(y, x) - (std::log(x) - y * std::pow(x, -yt.delta()))) <= 1e-12);
        CHECK(yt.eval(y, x) == doctest::Approx(direct).epsilon(1e-12));
    }

    TEST_CASE("inverse examples") {
        const YTransform half(0.5);
        CHECK(std::abs(y_inverse(half, 1.0, std::exp(-1.0)) - 1.0) <= 1e-12);
        const double scanned = oracle::scan_inverse(
            [](double x) { return oracle::y_direct(0.5, 0.35, x); }, 0.9, 0.05, 5.0);
        CHECK(std::abs(y_inverse(half, 0.35, 0.9) - scanned) <= 1e-6);
    }

    TEST_CASE("round trip and scaling identity over random draws") {
        std::mt19937_64 rng(20240611);
        std::uniform_real_distribution<double> logu(-6.0, 6.0);
        double worst_round = 0.0;
        double worst_scaling = 0.0;
        for (double gamma : {0.2, 0.5, 0.8}) {
            const YTransform yt(gamma);
            for (int n = 0; n < 1000; ++n) {
                const double y = std::exp(logu(rng));
                const double x = std::exp(0.5 * logu(rng));
                const double log_target = yt.log_eval(y, x);
                const double from_log = yt.inverse_from_log(y, log_target);
                worst_round = std::max(worst_round, std::abs(from_log - x) / x);
                const double target = yt.eval(y, x);
                if (!std::isnormal(target)) continue;
                const double back = yt.inverse(y, target);
                worst_round = std::max(worst_round, std::abs(back - x) / x);
                const double direct = yt.inverse_direct(y, target);
                worst_scaling = std::max(worst_scaling, std::abs(back - direct) / direct);
            }
        }
        CHECK(worst_round <= 1e-8);
        CHECK(worst_scaling <= 1e-8);
    }
}

TEST_SUITE("coefficients") {
    TEST_CASE("constructed input makes the bracketed inverse equal x / B_child") {
        const double gamma = 0.4;
        const double h_ref = 0.7;
        const double mu = 0.8;
        const double x = 1.3;
        const double B_child = 1.1;
        const double delta = gamma / (1.0 - gamma);
        const double h = h_ref * std::exp(mu * x - mu * std::pow(B_child, 1.0 + delta) * std::pow(x, -delta));
        const auto m = load_model(single_name_json(0.03, gamma, h, h_ref, mu, false).dump());
        const YTransform yt(gamma);
        const double ratio = x / B_child;
        const double expected = gamma * h * std::pow(ratio, 1.0 / (gamma - 1.0)) + h / (mu * B_child) / ratio;
        const double got = c_coefficient(yt, 0.2, 0, DefaultState(0), B_child, x, m);
        CHECK(got == doctest::Approx(expected).epsilon(1e-10));
    }

    TEST_CASE("benchmark state 10 matches a composition of scan-oracle pieces") {
        const auto m = oracle::benchmark_model();
        const YTransform yt(0.5);
        const int j = 1;
        const double h = m.h_rn(j, kS10)(0.0);
        const double h_ref = m.h_ref(j, kS10)(0.0);
        const double mu = m.mu(j, kS10)(0.0);
        const double B_child = std::exp(0.025);
        const double x = 1.0;
        const double y = mu * B_child;
        const double arg = mu * h / (y * h_ref) * x * std::exp(-mu * x);
        const double inv = oracle::scan_inverse([&](double s) { return oracle::y_direct(0.5, y, s); }, arg, 0.01, 10.0);
        const double expected = 0.5 * h * std::pow(inv, 1.0 / (0.5 - 1.0)) + h / y / inv;
        CHECK(std::abs(c_coefficient(yt, 0.0, j, kS10, B_child, x, m) - expected) <= 1e-6 * expected);
    }

    TEST_CASE("coefficient stays finite at the penalty floor") {
        const auto m = load_model(single_name_json(0.05, 0.5, 1.0, 0.5, 1e-9, false).dump());
        CHECK(m.mu(0, DefaultState(0))(0.0) == doctest::Approx(kMuFloor));
        const YTransform yt(0.5);
        for (double x : {0.2, 1.0, 3.0}) {
            const double c = c_coefficient(yt, 0.0, 0, DefaultState(0), 1.02, x, m);
            CHECK(std::isfinite(c));
            CHECK(c > 0.0);
        }
        CHECK_THROWS_AS(c_coefficient(yt, 0.0, 0, DefaultState(0), 1.0, 0.0, m), DomainError);
    }
}

TEST_SUITE("state equations") {
    TEST_CASE("terminal state closed form") {
        const auto m = oracle::benchmark_model();
        const auto grid = make_grid(m, 2000);
        const auto B = solve_terminal_state(m, grid);
        CHECK(B.value(grid.steps()) == 1.0);
        CHECK(std::abs(B.value(0) - 1.0253151) <= 1e-7);
        for (int k = 0; k <= grid.steps(); ++k) {
            CHECK(std::abs(B.value(k) - std::exp(0.025 * (1.0 - grid.node(k)))) <= 1e-14);
        }
        auto doc = benchmark_json();
        doc["r"] = 0.0;
        const auto flat = load_model(doc.dump());
        const auto B0 = solve_terminal_state(flat, make_grid(flat, 100));
        CHECK(B0.min() == 1.0);
        CHECK(B0.max() == 1.0);
    }

    TEST_CASE("single name without uncertainty and h equal to h^P keeps the terminal-state value") {
        const auto m = load_model(single_name_json(0.05, 0.5, 0.8, 0.8, 1.0, true).dump());
        const auto table = solve_all(m, make_grid(m, 1000), SolveMethod::both);
        const auto& st = table.state(DefaultState(0));
        for (int k = 0; k <= 1000; ++k) {
            CHECK(std::abs(st.B.value(k) - std::exp(0.025 * (1.0 - table.grid().node(k)))) <= 1e-10);
        }
        CHECK(st.fp_iterations >= 1);
        CHECK(st.fp_iterations <= 50);
    }

    TEST_CASE("single name without uncertainty matches the Hamiltonian ODE oracle") {
        const double r = 0.04;
        const double gamma = 0.6;
        const auto m = load_model(single_name_json(r, gamma, 1.4, 0.6, 1.0, true).dump());
        const auto table = solve_all(m, make_grid(m, 1000), SolveMethod::both);
        const double oracle_B0 = oracle::single_name_value(
            gamma, r, 1.0, 1.4, 0.6, 0.0, [&](double t) { return std::exp(gamma * r * (1.0 - t)); }, 200);
        CHECK(std::abs(table.value(DefaultState(0), 0.0) - oracle_B0) <= 1e-8);
    }

    TEST_CASE("benchmark single-survivor states match the robust Hamiltonian ODE oracle") {
        const auto m = oracle::benchmark_model();
        const auto table = solve_all(m, make_grid(m, 2000), SolveMethod::both);
        const double oracle_B0 = oracle::single_name_value(
            0.5, 0.05, 1.0, 2.0, 1.0, 0.5, [](double t) { return std::exp(0.025 * (1.0 - t)); }, 200);
        CHECK(std::abs(table.value(kS10, 0.0) - oracle_B0) <= 1e-8);
        CHECK(std::abs(table.value(kS01, 0.0) - oracle_B0) <= 1e-8);
    }

    TEST_CASE("ODE residual from centred differences") {
        const auto m = oracle::benchmark_model();
        const auto grid = make_grid(m, 2000);
        const auto table = solve_all(m, grid, SolveMethod::direct);
        const YTransform yt(m.gamma());
        double worst = 0.0;
        for (auto z : {kS00, kS01, kS10}) {
            const auto children = table.children(z);
            const auto& B = table.B(z);
            for (int k = 1; k < grid.steps(); ++k) {
                const double tm = grid.node(k - 1);
                const double t = grid.node(k);
                const double tp = grid.node(k + 1);
                const double slope = (B.value(k + 1) - B.value(k - 1)) / (tp - tm);
                const double residual = std::abs(slope - hjb_derivative(m, yt, z, children, t, B.value(k)));
                worst = std::max(worst, residual / (1.0 + std::abs(B.value(k))));
            }
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_SUITE("bounds") {
    TEST_CASE("benchmark sandwich with an inactive clamp") {
        const auto m = oracle::benchmark_model();
        const auto table = solve_all(m, make_grid(m, 2000), SolveMethod::both);
        for (auto z : enumerate_states(2)) {
            const auto& st = table.state(z);
            INFO("state " << z.bitstring(2));
            CHECK(st.bounds.lower > 0.0);
            CHECK(st.bounds.lower <= st.B.min());
            CHECK(st.B.max() <= st.bounds.upper);
            CHECK(st.clamp_hits == 0);
        }
    }

    TEST_CASE("a non-negative decay constant gives a unit lower bound") {
        const auto m = load_model(single_name_json(0.05, 0.5, 1e-6, 1e-6, 1.0, false).dump());
        const auto grid = make_grid(m, 200);
        const auto child = solve_terminal_state(m, grid);
        const ChildFunctions children{&child};
        const auto b = compute_bounds(m, DefaultState(0), children, grid);
        CHECK(b.lower == 1.0);
        const auto solved = solve_state_direct(m, DefaultState(0), children, grid, b);
        CHECK(solved.B.min() >= b.lower);
        CHECK(solved.B.max() <= b.upper);
    }

    TEST_CASE("sandwich holds on random models") {
        std::mt19937_64 rng(77);
        for (int draw = 0; draw < 20; ++draw) {
            oracle::RandomModelOptions opt;
            opt.M = 1 + draw % 3;
            opt.time_dependent = draw % 2 == 1;
            const auto m = oracle::random_model(rng, opt);
            const auto table = solve_all(m, make_grid(m, m.grid_steps()), SolveMethod::direct);
            for (auto z : enumerate_states(m.M())) {
                const auto& st = table.state(z);
                CHECK(st.bounds.lower <= st.B.min());
                CHECK(st.B.max() <= st.bounds.upper);
                CHECK(st.B.min() > 0.0);
                CHECK(st.clamp_hits == 0);
            }
        }
    }
}

TEST_SUITE("solvers") {
    TEST_CASE("table shape and terminal values") {
        const auto m = oracle::benchmark_model();
        const auto table = solve_all(m, make_grid(m, 500), SolveMethod::both);
        CHECK(std::abs(table.value(kS11, 0.0) - std::exp(0.025)) <= 1e-14);
        for (auto z : enumerate_states(2)) CHECK(table.B(z).value(500) == 1.0);
        CHECK(table.max_cross_gap() <= 1e-6);

        const auto single = load_model(single_name_json(0.05, 0.5, 1.0, 0.5, 1.0, false).dump());
        const auto t1 = solve_all(single, make_grid(single, 100), SolveMethod::direct);
        CHECK(enumerate_states(1).size() == 2);
        CHECK(t1.B(DefaultState(1)).value(0) == doctest::Approx(std::exp(0.025)));
    }

    TEST_CASE("benchmark fixed point converges quickly and agrees with the direct solve") {
        const auto m = oracle::benchmark_model();
        const auto table = solve_all(m, make_grid(m, 2000), SolveMethod::both);
        for (auto z : {kS00, kS01, kS10}) {
            CHECK(table.state(z).fp_iterations <= 50);
            CHECK(table.state(z).cross_gap <= 1e-6);
        }
    }

    TEST_CASE("fixed point respects the iteration cap") {
        const auto m = oracle::benchmark_model();
        const auto grid = make_grid(m, 200);
        const auto child = solve_terminal_state(m, grid);
        const ChildFunctions children{nullptr, &child};
        const auto b = compute_bounds(m, kS10, children, grid);
        CHECK_THROWS_AS(solve_state_fixed_point(m, kS10, children, grid, b, {1e-10, 2}), ConvergenceError);
    }

    TEST_CASE("method parsing") {
        CHECK(parse_solve_method("direct") == SolveMethod::direct);
        CHECK(parse_solve_method("fixed") == SolveMethod::fixed_point);
        CHECK(parse_solve_method("both") == SolveMethod::both);
        CHECK_THROWS_AS(parse_solve_method("newton"), ValidationError);
    }

    TEST_CASE("direct and fixed point agree on random models") {
        std::mt19937_64 rng(4242);
        double worst = 0.0;
        for (int draw = 0; draw < 50; ++draw) {
            oracle::RandomModelOptions opt;
            opt.M = 1 + draw % 3;
            opt.time_dependent = draw % 3 == 0;
            const auto m = oracle::random_model(rng, opt);
            const auto table = solve_all(m, make_grid(m, m.grid_steps()), SolveMethod::both);
            worst = std::max(worst, table.max_cross_gap());
        }
        CHECK(worst <= 1e-6);
    }

    TEST_CASE("a weaker penalty lowers the benchmark value") {
        auto doc = benchmark_json();
        const auto base = load_model(doc.dump());
        for (auto& [bits, row] : doc["intensities"]["penalty_mu"]["per_state"].items()) {
            for (auto& [k, v] : row.items()) v = 2.0 * v.get<double>();
        }
        const auto doubled = load_model(doc.dump());
        const auto b0 = solve_all(base, make_grid(base, 1000), SolveMethod::direct);
        const auto b1 = solve_all(doubled, make_grid(doubled, 1000), SolveMethod::direct);
        CHECK(b1.value(kS00, 0.0) <= b0.value(kS00, 0.0));
    }
}

#include <doctest.h>

#include "oracles.hpp"

#include <robustcredit/errors.hpp>
#include <robustcredit/policy.hpp>

#include <cmath>
#include <random>

using namespace robustcredit;

namespace {

nlohmann::json benchmark_json() {
    return nlohmann::json::parse(read_text_file(oracle::config_path("benchmark.json")));
}

struct Solved {
    MarketModel model;
    TimeGrid grid;
    PriceTable prices;
    SolutionTable table;

    explicit Solved(MarketModel m, int steps = 1000)
        : model(std::move(m)),
          grid(make_grid(model, steps)),
          prices(solve_prices(model, grid)),
          table(solve_all(model, grid, SolveMethod::both)) {}
};

/// Per-obligor Hamiltonian inputs and the jump matrix at (t, z), alive indexing.
struct LocalProblem {
    std::vector<oracle::HamiltonianInputs> obligors;
    std::vector<std::vector<double>> G;
};

LocalProblem local_problem(const Solved& s, double t, DefaultState z) {
    const auto& m = s.model;
    LocalProblem out;
    const auto dep = depreciation_matrix(s.prices, t, z);
    const double B = s.table.value(z, t);
    for (int j : dep.alive) {
        out.obligors.push_back({m.gamma(), B, s.table.value(z.with_default(j), t), m.h_rn(j, z)(t),
                                m.h_ref(j, z)(t), m.no_uncertainty() ? 0.0 : m.mu(j, z)(t)});
    }
    const auto n = static_cast<Eigen::Index>(dep.alive.size());
    out.G.assign(dep.alive.size(), std::vector<double>(dep.alive.size()));
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) out.G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = dep.G(a, b);
    }
    return out;
}

std::vector<double> alive_entries(const std::vector<double>& full, DefaultState z, int M) {
    std::vector<double> out;
    for (int j : z.alive_obligors(M)) out.push_back(full[static_cast<std::size_t>(j)]);
    return out;
}

const Solved& benchmark() {
    static const Solved s(oracle::benchmark_model());
    return s;
}

const DefaultState kS00 = DefaultState::from_bitstring("00");
const DefaultState kS10 = DefaultState::from_bitstring("10");
const DefaultState kS11 = DefaultState::from_bitstring("11");

}  // namespace

TEST_SUITE("exposures") {
    TEST_CASE("no trade when nothing distinguishes the two measures") {
        nlohmann::json doc;
        doc["M"] = 1;
        doc["r"] = 0.05;
        doc["gamma"] = 0.5;
        doc["T"] = 1.0;
        doc["no_uncertainty"] = true;
        doc["obligors"] = {{{"maturity", 2.0}, {"coupon", 0.3}, {"recovery", 0.5}}};
        doc["intensities"]["reference"] = 0.8;
        doc["intensities"]["risk_neutral"] = 0.8;
        doc["intensities"]["penalty_mu"] = 1.0;
        const Solved s(load_model(doc.dump()), 400);
        for (double t : {0.0, 0.3, 0.99}) {
            CHECK(std::abs(gamma_star(s.table, s.model, t, DefaultState(0), 0)) <= 1e-9);
            const auto snap = optimal_feedback(s.table, s.prices, s.model, t, DefaultState(0));
            CHECK(std::abs(snap.pi_star[0]) <= 1e-8);
            CHECK(snap.theta_star[0] == 1.0);
        }
    }

    TEST_CASE("benchmark state 10 exposure matches a grid-search maximiser") {
        const auto& s = benchmark();
        const double g = gamma_star(s.table, s.model, 0.0, kS10, 1);
        const auto c = local_problem(s, 0.0, kS10).obligors[0];
        const double lo = -0.9;
        const double hi = 2.0;
        const int points = 2000;
        const double step = (hi - lo) / (points - 1);
        double best = -1e300;
        double arg = lo;
        for (int k = 0; k < points; ++k) {
            const double x = lo + step * k;
            const double v = oracle::min_over_tilt(c, x).second;
            if (v > best) {
                best = v;
                arg = x;
            }
        }
        CHECK(std::abs(arg - g) <= step);
        CHECK(std::abs(oracle::max_over_exposure(c).first - g) <= 1e-6);
        CHECK(1.0 + g > 0.0);
    }

    TEST_CASE("exposures stay admissible across the benchmark grid") {
        const auto& s = benchmark();
        const auto pol = optimal_policy_grid(s.table, s.prices, s.model, 1);
        for (auto z : enumerate_states(2)) {
            for (int j : z.alive_obligors(2)) {
                for (int k = 0; k <= s.grid.steps(); k += 50) {
                    CHECK(1.0 + pol.exposure(z, k, j) > 0.0);
                    CHECK(pol.tilt(z, k, j) > 0.0);
                }
            }
        }
    }
}

TEST_SUITE("feedback") {
    TEST_CASE("all defaulted means everything in the money market") {
        const auto& s = benchmark();
        const auto snap = optimal_feedback(s.table, s.prices, s.model, 0.2, kS11);
        CHECK(snap.pi_star == std::vector<double>{0.0, 0.0});
        CHECK(snap.money_market_fraction == 1.0);
    }

    TEST_CASE("defaulted obligors hold nothing") {
        const auto& s = benchmark();
        const auto snap = optimal_feedback(s.table, s.prices, s.model, 0.0, kS10);
        CHECK(snap.pi_star[0] == 0.0);
        CHECK(snap.pi_star[1] != 0.0);
        CHECK(snap.money_market_fraction == doctest::Approx(1.0 - snap.pi_star[1]));
    }

    TEST_CASE("without contagion the solve reduces to back-substitution") {
        auto doc = benchmark_json();
        doc["intensities"]["reference"] = nlohmann::json{{"base", {0.5, 0.7}}, {"contagion_multiplier", {{1.0, 1.0}, {1.0, 1.0}}}};
        doc["intensities"]["risk_neutral"] = nlohmann::json{{"base", {1.0, 1.2}}, {"contagion_multiplier", {{1.0, 1.0}, {1.0, 1.0}}}};
        const Solved s(load_model(doc.dump()), 2000);
        const auto snap = optimal_feedback(s.table, s.prices, s.model, 0.0, kS00);
        const auto dep = depreciation_matrix(s.prices, 0.0, kS00);
        for (int j = 0; j < 2; ++j) {
            CHECK(snap.pi_star[static_cast<std::size_t>(j)] ==
                  doctest::Approx(snap.gamma_star[static_cast<std::size_t>(j)] / dep.G(j, j)).epsilon(1e-7));
        }
    }

    TEST_CASE("benchmark fractions match a fine Hamiltonian grid search") {
        const auto& s = benchmark();
        const auto snap = optimal_feedback(s.table, s.prices, s.model, 0.0, kS00);
        const auto lp = local_problem(s, 0.0, kS00);
        const int points = 401;
        const double step = 10.0 / (points - 1);
        double best = -1e300;
        std::vector<double> arg(2);
        for (int a = 0; a < points; ++a) {
            for (int b = 0; b < points; ++b) {
                const std::vector<double> pi{-5.0 + step * a, -5.0 + step * b};
                const double v = oracle::hamiltonian(lp.obligors, s.model.r(), lp.G, pi);
                if (v > best) {
                    best = v;
                    arg = pi;
                }
            }
        }
        CHECK(std::abs(arg[0] - snap.pi_star[0]) <= step);
        CHECK(std::abs(arg[1] - snap.pi_star[1]) <= step);
        CHECK(oracle::hamiltonian(lp.obligors, s.model.r(), lp.G, snap.pi_star) >= best - 1e-12);
    }

    TEST_CASE("optimal fractions dominate a coarse grid and the tilt solves the inner problem") {
        const auto& s = benchmark();
        for (auto z : {kS00, kS10}) {
            for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const auto snap = optimal_feedback(s.table, s.prices, s.model, t, z);
                const auto lp = local_problem(s, t, z);
                const auto pi = alive_entries(snap.pi_star, z, 2);
                const auto theta = alive_entries(snap.theta_star, z, 2);
                const double at_opt = oracle::hamiltonian(lp.obligors, s.model.r(), lp.G, pi);
                const double at_saddle = oracle::hamiltonian(lp.obligors, s.model.r(), lp.G, pi, &theta);
                CHECK(std::abs(at_opt - at_saddle) <= 1e-10);
                const std::size_t n = pi.size();
                double worst_pi = -1e300;
                double worst_theta = 1e300;
                for (int a = 0; a < 41; ++a) {
                    for (int b = 0; b < (n == 2 ? 41 : 1); ++b) {
                        std::vector<double> trial{-5.0 + 0.25 * a, -5.0 + 0.25 * b};
                        std::vector<double> tilt{0.1 + 4.9 / 40 * a, 0.1 + 4.9 / 40 * b};
                        trial.resize(n);
                        tilt.resize(n);
                        worst_pi = std::max(worst_pi, oracle::hamiltonian(lp.obligors, s.model.r(), lp.G, trial));
                        worst_theta = std::min(worst_theta, oracle::hamiltonian(lp.obligors, s.model.r(), lp.G, pi, &tilt));
                    }
                }
                CHECK(worst_pi <= at_opt + 1e-8);
                CHECK(worst_theta >= at_saddle - 1e-8);
            }
        }
    }

    TEST_CASE("first-order conditions hold at every node") {
        const auto& s = benchmark();
        double worst = 0.0;
        for (auto z : {kS00, kS10, DefaultState::from_bitstring("01")}) {
            for (int k = 0; k <= s.grid.steps(); ++k) {
                worst = std::max(worst, optimal_feedback(s.table, s.prices, s.model, s.grid.node(k), z).foc_residual);
            }
        }
        CHECK(worst <= 1e-8);
    }

    TEST_CASE("robustness lowers demand and raises the worst-case intensity") {
        const auto base_doc = benchmark_json();
        double prev_pi = 1e300;
        double prev_intensity = -1e300;
        double prev_B = 1e300;
        for (int n = 0; n < 8; ++n) {
            const double mu = 0.1 + (2.0 - 0.1) * n / 7.0;
            auto doc = base_doc;
            doc["intensities"]["penalty_mu"]["per_state"]["00"]["1"] = mu;
            const Solved s(load_model(doc.dump()), 400);
            const auto snap = optimal_feedback(s.table, s.prices, s.model, 0.0, kS00);
            CHECK(snap.pi_star[0] <= prev_pi + 1e-10);
            CHECK(snap.worst_case_intensity[0] >= prev_intensity - 1e-10);
            CHECK(s.table.value(kS00, 0.0) <= prev_B + 1e-10);
            prev_pi = snap.pi_star[0];
            prev_intensity = snap.worst_case_intensity[0];
            prev_B = s.table.value(kS00, 0.0);
        }
    }
}

TEST_SUITE("worst case") {
    TEST_CASE("benchmark tilt is pessimistic and satisfies the exposure identity") {
        const auto& s = benchmark();
        const auto snap = optimal_feedback(s.table, s.prices, s.model, 0.0, kS00);
        CHECK(snap.theta_star[0] > 1.0);
        const double B = s.table.value(kS00, 0.0);
        for (int j = 0; j < 2; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            const double Bj = s.table.value(kS00.with_default(j), 0.0);
            const double identity = snap.theta_star[sj] * std::pow(1.0 + snap.gamma_star[sj], s.model.gamma() - 1.0);
            const double expected = B * s.model.h_rn(j, kS00)(0.0) / (Bj * s.model.h_ref(j, kS00)(0.0));
            CHECK(std::abs(identity - expected) <= 1e-8 * expected);
            CHECK(snap.worst_case_intensity[sj] == doctest::Approx(snap.theta_star[sj] * 0.5));
        }
    }

    TEST_CASE("an exposure that leaves B unchanged induces no tilt") {
        const auto& s = benchmark();
        const double B = s.table.value(kS10, 0.3);
        const double Bj = s.table.value(kS11, 0.3);
        const double g = std::pow(B / Bj, 1.0 / s.model.gamma()) - 1.0;
        const auto theta = induced_tilt(s.table, s.model, 0.3, kS10, {g});
        CHECK(theta[0] == doctest::Approx(1.0).epsilon(1e-14));
    }

    TEST_CASE("the two tilt forms disagree away from the optimum") {
        const auto& s = benchmark();
        const double g = gamma_star(s.table, s.model, 0.1, kS10, 1);
        CHECK(worst_case(s.table, s.model, 0.1, kS10, {g})[0] > 0.0);
        CHECK_THROWS_AS(worst_case(s.table, s.model, 0.1, kS10, {g + 0.2}), ConsistencyError);
    }

    TEST_CASE("no uncertainty pins the tilt to one") {
        auto doc = benchmark_json();
        doc["no_uncertainty"] = true;
        const Solved s(load_model(doc.dump()), 400);
        const auto snap = optimal_feedback(s.table, s.prices, s.model, 0.0, kS00);
        CHECK(snap.theta_star == std::vector<double>{1.0, 1.0});
        CHECK(induced_tilt(s.table, s.model, 0.0, kS00, {0.3, -0.2}) == std::vector<double>{1.0, 1.0});
    }
}

TEST_SUITE("hessian") {
    TEST_CASE("identity jump matrix with unit curvatures") {
        const auto r = hessian_from_curvatures(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Constant(3, -1.0));
        CHECK(r.max_eigenvalue == doctest::Approx(-1.0));
        CHECK(r.negative_definite());
    }

    TEST_CASE("benchmark trial points are strictly concave") {
        const auto& s = benchmark();
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        const auto dep = depreciation_matrix(s.prices, 0.4, kS00);
        int checked = 0;
        for (int n = 0; n < 200; ++n) {
            const Eigen::Vector2d pi(U(rng), U(rng));
            const Eigen::Vector2d g = dep.G.transpose() * pi;
            if (g.minCoeff() <= -0.95) continue;
            CHECK(hessian_check(s.prices, s.table, s.model, 0.4, kS00, {pi(0), pi(1)}).negative_definite());
            ++checked;
        }
        CHECK(checked > 50);
    }

    TEST_CASE("quadratic form matches second differences of the oracle Hamiltonian") {
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (int draw = 0; draw < 3; ++draw) {
            oracle::RandomModelOptions opt;
            opt.M = 2 + draw % 2;
            const Solved s(oracle::random_model(rng, opt), 400);
            const DefaultState z(0);
            const double t = 0.3 * s.model.T();
            const auto lp = local_problem(s, t, z);
            const auto n = lp.obligors.size();
            const auto dep = depreciation_matrix(s.prices, t, z);
            std::vector<double> pi(n);
            for (auto& p : pi) p = 0.3 * U(rng);
            const Eigen::VectorXd g = dep.G.transpose() * Eigen::Map<const Eigen::VectorXd>(pi.data(), static_cast<Eigen::Index>(n));
            if (g.minCoeff() <= -0.9) continue;
            const auto report = hessian_check(s.prices, s.table, s.model, t, z, pi);
            CHECK(report.negative_definite());
            // Rebuild the full matrix from the curvatures implied by the oracle.
            Eigen::VectorXd ell(static_cast<Eigen::Index>(n));
            const double eps = 1e-3;
            for (std::size_t j = 0; j < n; ++j) {
                const auto& c = lp.obligors[j];
                const double g0 = g(static_cast<Eigen::Index>(j));
                const double second = (oracle::min_over_tilt(c, g0 + eps).second - 2.0 * oracle::min_over_tilt(c, g0).second +
                                       oracle::min_over_tilt(c, g0 - eps).second) /
                                      (eps * eps);
                ell(static_cast<Eigen::Index>(j)) = second / s.model.gamma();
            }
            const Eigen::MatrixXd H = dep.G * ell.asDiagonal() * dep.G.transpose();
            const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
            CHECK(report.max_eigenvalue == doctest::Approx(top).epsilon(1e-4));
            for (int q = 0; q < 100; ++q) {
                Eigen::VectorXd x(static_cast<Eigen::Index>(n));
                for (auto& v : x) v = U(rng);
                CHECK(x.dot(H * x) < 0.0);
            }
        }
    }
}

TEST_SUITE("value function") {
    TEST_CASE("closed form, homotheticity and domain") {
        const auto& s = benchmark();
        CHECK(value_function(s.table, 0.5, 0.0, kS11, 1.0) == doctest::Approx(2.0506302));
        const double w1 = value_function(s.table, 0.5, 0.2, kS00, 1.5);
        const double w2 = value_function(s.table, 0.5, 0.2, kS00, 3.0);
        CHECK(w2 == doctest::Approx(std::sqrt(2.0) * w1).epsilon(1e-14));
        CHECK_THROWS_AS(value_function(s.table, 0.5, 0.0, kS00, 0.0), DomainError);
    }
}

TEST_SUITE("policy grids") {
    TEST_CASE("a zero allocation has zero exposure and the induced tilt") {
        const auto& s = benchmark();
        const auto pol = allocation_policy_grid(s.table, s.prices, s.model, [](int, DefaultState z) {
            return std::vector<double>(z.alive_obligors(2).size(), 0.0);
        });
        for (int k : {0, 500, 1000}) {
            const double t = s.grid.node(k);
            CHECK(pol.exposure(kS00, k, 0) == 0.0);
            CHECK(pol.tilt(kS00, k, 0) == doctest::Approx(induced_tilt(s.table, s.model, t, kS00, {0.0, 0.0})[0]));
        }
    }

    TEST_CASE("optimal grid agrees with point evaluations") {
        const auto& s = benchmark();
        const auto pol = optimal_policy_grid(s.table, s.prices, s.model, 2);
        const auto snap = optimal_feedback(s.table, s.prices, s.model, s.grid.node(300), kS00);
        CHECK(pol.exposure(kS00, 300, 1) == snap.gamma_star[1]);
        CHECK(pol.tilt(kS00, 300, 1) == snap.theta_star[1]);
    }
}

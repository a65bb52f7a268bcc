#include "robustcredit/policy.hpp"

#include "robustcredit/errors.hpp"
#include "robustcredit/linalg.hpp"
#include "robustcredit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace robustcredit {

namespace {

constexpr double kFocTolerance = 1e-6;
constexpr double kDualTolerance = 1e-8;

struct Local {
    double h;
    double h_ref;
    double mu;
    double B;
    double B_child;
};

Local local_at(const SolutionTable& solution, const MarketModel& model, double t, DefaultState z, int j) {
    return {model.h_rn(j, z)(t), model.h_ref(j, z)(t), model.mu(j, z)(t), solution.value(z, t),
            solution.value(z.with_default(j), t)};
}

double tilt_exponential(const MarketModel& model, const Local& c, double gamma_j) {
    if (model.no_uncertainty()) return 1.0;
    return std::exp(-c.mu * (c.B_child * std::pow(1.0 + gamma_j, model.gamma()) - c.B));
}

}  // namespace

double gamma_star(const SolutionTable& solution, const MarketModel& model, double t, DefaultState z, int j) {
    if (z.defaulted(j)) throw DomainError("exposure requested for a defaulted obligor");
    const YTransform yt(model.gamma());
    const auto c = local_at(solution, model, t, z, j);
    const double X = exposure_root(yt, model.no_uncertainty(), c.h, c.h_ref, c.mu, c.B_child, c.B);
    return std::pow(X, 1.0 / (model.gamma() - 1.0)) - 1.0;
}

std::vector<double> induced_tilt(const SolutionTable& solution, const MarketModel& model, double t,
                                 DefaultState z, const std::vector<double>& gammas) {
    const auto alive = z.alive_obligors(model.M());
    if (gammas.size() != alive.size()) throw DomainError("one exposure per alive obligor expected");
    std::vector<double> out(alive.size());
    for (std::size_t a = 0; a < alive.size(); ++a) {
        if (!(1.0 + gammas[a] > 0.0)) throw DomainError("exposure at or below -1 is not admissible");
        out[a] = tilt_exponential(model, local_at(solution, model, t, z, alive[a]), gammas[a]);
    }
    return out;
}

std::vector<double> worst_case(const SolutionTable& solution, const MarketModel& model, double t,
                               DefaultState z, const std::vector<double>& gammas) {
    const auto alive = z.alive_obligors(model.M());
    const auto primary = induced_tilt(solution, model, t, z, gammas);
    if (model.no_uncertainty()) return primary;
    for (std::size_t a = 0; a < alive.size(); ++a) {
        const auto c = local_at(solution, model, t, z, alive[a]);
        const double X = std::pow(1.0 + gammas[a], model.gamma() - 1.0);
        const double closed = (c.h / c.h_ref) * (c.B / c.B_child) / X;
        if (!(std::abs(closed - primary[a]) <= kDualTolerance * std::max(1.0, primary[a]))) {
            std::ostringstream os;
            os << "worst-case tilt forms disagree for obligor " << alive[a] + 1 << " in state "
               << z.bitstring(model.M()) << " at t=" << t << ": " << primary[a] << " vs " << closed;
            throw ConsistencyError(os.str());
        }
    }
    return primary;
}

PolicySnapshot optimal_feedback(const SolutionTable& solution, const PriceTable& prices,
                                const MarketModel& model, double t, DefaultState z) {
    const int M = model.M();
    PolicySnapshot snap;
    snap.t = t;
    snap.z = z;
    snap.pi_star.assign(static_cast<std::size_t>(M), 0.0);
    snap.gamma_star.assign(static_cast<std::size_t>(M), 0.0);
    snap.theta_star.assign(static_cast<std::size_t>(M), 1.0);
    snap.worst_case_intensity.assign(static_cast<std::size_t>(M), 0.0);
    if (z.all_defaulted(M)) return snap;

    const auto dep = depreciation_matrix(prices, t, z);
    const auto& alive = dep.alive;
    const auto n = static_cast<Eigen::Index>(alive.size());
    Eigen::VectorXd target(n);
    for (Eigen::Index a = 0; a < n; ++a) target(a) = gamma_star(solution, model, t, z, alive[static_cast<std::size_t>(a)]);
    const Eigen::VectorXd pi = lu_solve(dep.G.transpose(), target);

    // Re-derive the exposures from the solved fractions so the residual covers the linear solve.
    const Eigen::VectorXd exposures = dep.G.transpose() * pi;
    std::vector<double> gammas(exposures.data(), exposures.data() + n);
    const auto theta = worst_case(solution, model, t, z, gammas);

    const double B = solution.value(z, t);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double lhs = 0.0;
        double rhs = 0.0;
        double scale = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto c = local_at(solution, model, t, z, alive[static_cast<std::size_t>(j)]);
            const double Gij = dep.G(i, j);
            lhs += c.h_ref * c.B_child * Gij * std::pow(1.0 + gammas[static_cast<std::size_t>(j)], model.gamma() - 1.0) *
                   theta[static_cast<std::size_t>(j)];
            rhs += B * Gij * c.h;
            scale += B * std::abs(Gij) * c.h;
        }
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(scale, 1e-300));
    }
    snap.foc_residual = worst;
    if (!(worst <= kFocTolerance)) {
        std::ostringstream os;
        os << "first-order conditions violated in state " << z.bitstring(M) << " at t=" << t
           << ": residual " << worst;
        throw FocResidualError(os.str());
    }

    double invested = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
        const int j = alive[static_cast<std::size_t>(a)];
        const auto sj = static_cast<std::size_t>(j);
        snap.pi_star[sj] = pi(a);
        snap.gamma_star[sj] = target(a);
        snap.theta_star[sj] = theta[static_cast<std::size_t>(a)];
        snap.worst_case_intensity[sj] = theta[static_cast<std::size_t>(a)] * model.h_ref(j, z)(t);
        invested += pi(a);
    }
    snap.money_market_fraction = 1.0 - invested;
    return snap;
}

HessianReport hessian_from_curvatures(const Eigen::MatrixXd& G, const Eigen::VectorXd& ell) {
    const Eigen::MatrixXd H = G * ell.asDiagonal() * G.transpose();
    return {max_symmetric_eigenvalue(H)};
}

HessianReport hessian_check(const PriceTable& prices, const SolutionTable& solution,
                            const MarketModel& model, double t, DefaultState z, const std::vector<double>& pi) {
    const auto dep = depreciation_matrix(prices, t, z);
    const auto n = static_cast<Eigen::Index>(dep.alive.size());
    if (static_cast<Eigen::Index>(pi.size()) != n) throw DomainError("one fraction per alive obligor expected");
    const Eigen::VectorXd exposures = dep.G.transpose() * Eigen::Map<const Eigen::VectorXd>(pi.data(), n);
    std::vector<double> gammas(exposures.data(), exposures.data() + n);
    const auto theta = induced_tilt(solution, model, t, z, gammas);
    const double gamma = model.gamma();
    const double U = 1.0 / gamma;
    Eigen::VectorXd ell(n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto c = local_at(solution, model, t, z, dep.alive[static_cast<std::size_t>(a)]);
        const double lift = 1.0 + gammas[static_cast<std::size_t>(a)];
        const double mu = model.no_uncertainty() ? 0.0 : c.mu;
        ell(a) = -gamma * U * c.h_ref * c.B_child * std::pow(lift, gamma - 2.0) * theta[static_cast<std::size_t>(a)] *
                 ((1.0 - gamma) + gamma * mu * c.B_child * std::pow(lift, gamma));
    }
    return hessian_from_curvatures(dep.G, ell);
}

double value_function(const SolutionTable& solution, double gamma, double t, DefaultState z, double v) {
    if (!(v > 0.0)) throw DomainError("wealth must be positive");
    return std::pow(v, gamma) / gamma * solution.value(z, t);
}

PolicyGrid::PolicyGrid(int M, TimeGrid grid) : M_(M), grid_(std::move(grid)) {
    const std::size_t n = (std::size_t{1} << M) * grid_.nodes().size() * static_cast<std::size_t>(M);
    exposure_.assign(n, 0.0);
    tilt_.assign(n, 1.0);
}

void PolicyGrid::set(DefaultState z, int k, int j, double exposure, double tilt) {
    exposure_[slot(z, k, j)] = exposure;
    tilt_[slot(z, k, j)] = tilt;
}

PolicyGrid optimal_policy_grid(const SolutionTable& solution, const PriceTable& prices,
                               const MarketModel& model, int threads) {
    const auto& grid = solution.grid();
    PolicyGrid out(model.M(), grid);
    std::vector<DefaultState> states;
    for (auto z : enumerate_states(model.M())) {
        if (!z.all_defaulted(model.M())) states.push_back(z);
    }
    parallel_for(states.size(), threads, [&](std::size_t idx) {
        const DefaultState z = states[idx];
        for (int k = 0; k <= grid.steps(); ++k) {
            const auto snap = optimal_feedback(solution, prices, model, grid.node(k), z);
            for (int j : z.alive_obligors(model.M())) {
                const auto sj = static_cast<std::size_t>(j);
                out.set(z, k, j, snap.gamma_star[sj], snap.theta_star[sj]);
            }
        }
    });
    return out;
}

PolicyGrid allocation_policy_grid(const SolutionTable& solution, const PriceTable& prices,
                                  const MarketModel& model, const AllocationRule& rule) {
    const auto& grid = solution.grid();
    PolicyGrid out(model.M(), grid);
    for (auto z : enumerate_states(model.M())) {
        if (z.all_defaulted(model.M())) continue;
        for (int k = 0; k <= grid.steps(); ++k) {
            const double t = grid.node(k);
            const auto dep = depreciation_matrix_at_node(prices, k, z);
            const auto pi = rule(k, z);
            const auto n = static_cast<Eigen::Index>(dep.alive.size());
            if (static_cast<Eigen::Index>(pi.size()) != n) throw DomainError("one fraction per alive obligor expected");
            const Eigen::VectorXd exposures = dep.G.transpose() * Eigen::Map<const Eigen::VectorXd>(pi.data(), n);
            std::vector<double> gammas(exposures.data(), exposures.data() + n);
            const auto theta = induced_tilt(solution, model, t, z, gammas);
            for (Eigen::Index a = 0; a < n; ++a) {
                out.set(z, k, dep.alive[static_cast<std::size_t>(a)], gammas[static_cast<std::size_t>(a)],
                        theta[static_cast<std::size_t>(a)]);
            }
        }
    }
    return out;
}

}  // namespace robustcredit

#include "robustcredit/hjb.hpp"

#include "robustcredit/errors.hpp"
#include "robustcredit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace robustcredit {

std::string to_string(SolveMethod m) {
    switch (m) {
        case SolveMethod::direct: return "direct";
        case SolveMethod::fixed_point: return "fixed_point";
        case SolveMethod::both: return "both";
    }
    return "unknown";
}

SolveMethod parse_solve_method(const std::string& s) {
    if (s == "direct") return SolveMethod::direct;
    if (s == "fixed" || s == "fixed_point") return SolveMethod::fixed_point;
    if (s == "both") return SolveMethod::both;
    throw ValidationError("unknown solve method '" + s + "'");
}

SolutionTable::SolutionTable(int M, TimeGrid grid, SolveMethod method)
    : M_(M), grid_(std::move(grid)), method_(method), states_(std::size_t{1} << M) {}

const SolutionTable::State& SolutionTable::state(DefaultState z) const {
    if (z.mask() >= states_.size()) throw DomainError("state outside the solution table");
    return states_[z.mask()];
}

void SolutionTable::set(DefaultState z, State s) { states_.at(z.mask()) = std::move(s); }

double SolutionTable::max_cross_gap() const {
    double g = 0.0;
    for (const auto& s : states_) g = std::max(g, s.cross_gap);
    return g;
}

ChildFunctions SolutionTable::children(DefaultState z) const {
    ChildFunctions out(static_cast<std::size_t>(M_), nullptr);
    for (int j : z.alive_obligors(M_)) out[static_cast<std::size_t>(j)] = &states_[z.with_default(j).mask()].B;
    return out;
}

double exposure_root(const YTransform& yt, bool no_uncertainty, double h, double h_ref, double mu,
                     double B_child, double B) {
    if (!(B_child > 0.0) || !(B > 0.0)) {
        std::ostringstream os;
        os << "exposure root needs positive value components (B=" << B << ", B_child=" << B_child << ")";
        throw DomainError(os.str());
    }
    const double log_ratio = std::log(h) + std::log(B) - std::log(h_ref) - std::log(B_child);
    if (no_uncertainty) return std::exp(log_ratio);
    return yt.inverse_from_log(mu * B_child, log_ratio - mu * B);
}

namespace {

struct Coefs {
    double h;
    double h_ref;
    double mu;
};

Coefs coefs_at(const MarketModel& model, int j, DefaultState z, double t) {
    return {model.h_rn(j, z)(t), model.h_ref(j, z)(t), model.mu(j, z)(t)};
}

double c_from_coefs(const YTransform& yt, bool no_uncertainty, const Coefs& c, double B_child, double x) {
    const double gamma = yt.gamma();
    const double X = exposure_root(yt, no_uncertainty, c.h, c.h_ref, c.mu, B_child, x);
    const double lift = std::pow(X, 1.0 / (gamma - 1.0));  // 1 + Gamma
    if (no_uncertainty) return c.h_ref - (1.0 - gamma) * c.h * lift;
    return gamma * c.h * lift + c.h / (c.mu * B_child * X);
}

/// Drift pieces of the state equation at time t: B' = -x a(t) + xc sum C_j(xc) - s(t).
struct Drift {
    double a = 0.0;       // gamma (r + sum h)
    double source = 0.0;  // sum h^P / mu (zero without uncertainty)
};

Drift drift_at(const MarketModel& model, DefaultState z, double t) {
    Drift d;
    double sum_h = 0.0;
    for (int j : z.alive_obligors(model.M())) {
        sum_h += model.h_rn(j, z)(t);
        if (!model.no_uncertainty()) d.source += model.h_ref(j, z)(t) / model.mu(j, z)(t);
    }
    d.a = model.gamma() * (model.r() + sum_h);
    return d;
}

double c_sum(const MarketModel& model, const YTransform& yt, DefaultState z,
             const ChildFunctions& children, double t, double x) {
    double s = 0.0;
    for (int j : z.alive_obligors(model.M())) {
        const double Bj = children[static_cast<std::size_t>(j)]->at(t);
        s += c_from_coefs(yt, model.no_uncertainty(), coefs_at(model, j, z, t), Bj, x);
    }
    return s;
}

void check_children(const MarketModel& model, DefaultState z, const ChildFunctions& children) {
    if (children.size() != static_cast<std::size_t>(model.M())) {
        throw DomainError("child list must have one slot per obligor");
    }
    for (int j : z.alive_obligors(model.M())) {
        if (children[static_cast<std::size_t>(j)] == nullptr) {
            throw DomainError("missing child solution for obligor " + std::to_string(j + 1));
        }
    }
}

}  // namespace

double c_coefficient(const YTransform& yt, double t, int j, DefaultState z, double B_child, double x,
                     const MarketModel& model) {
    if (z.defaulted(j)) throw DomainError("coefficient requested for a defaulted obligor");
    return c_from_coefs(yt, model.no_uncertainty(), coefs_at(model, j, z, t), B_child, x);
}

double hjb_derivative(const MarketModel& model, const YTransform& yt, DefaultState z,
                      const ChildFunctions& children, double t, double B) {
    check_children(model, z, children);
    const Drift d = drift_at(model, z, t);
    return -B * (d.a - c_sum(model, yt, z, children, t, B)) - d.source;
}

GridFunction solve_terminal_state(const MarketModel& model, const TimeGrid& grid) {
    std::vector<double> v(grid.nodes().size());
    const double k = model.gamma() * model.r();
    for (int n = 0; n <= grid.steps(); ++n) {
        v[static_cast<std::size_t>(n)] = std::exp(k * (grid.t_end() - grid.node(n)));
    }
    v.back() = 1.0;
    return {grid, std::move(v)};
}

Bounds compute_bounds(const MarketModel& model, DefaultState z, const ChildFunctions& children,
                      const TimeGrid& grid) {
    const int M = model.M();
    const double T = grid.t_end();
    const double gamma = model.gamma();
    if (z.all_defaulted(M)) return {1.0, std::exp(gamma * model.r() * T)};
    check_children(model, z, children);
    const auto alive = z.alive_obligors(M);

    auto child = [&](int j) -> const GridFunction& { return *children[static_cast<std::size_t>(j)]; };

    if (model.no_uncertainty()) {
        double min_a = std::numeric_limits<double>::infinity();
        double max_a = -std::numeric_limits<double>::infinity();
        for (int k = 0; k <= grid.steps(); ++k) {
            const double t = grid.node(k);
            double a = gamma * model.r();
            for (int j : alive) a += gamma * model.h_rn(j, z)(t) - model.h_ref(j, z)(t);
            min_a = std::min(min_a, a);
            max_a = std::max(max_a, a);
        }
        const double lower = std::min(1.0, std::exp(T * min_a));
        double c_max = 0.0;
        for (int j : alive) {
            const double max_h = model.h_rn(j, z).max_on(0.0, T);
            const double min_h = model.h_rn(j, z).min_on(0.0, T);
            const double max_hp = model.h_ref(j, z).max_on(0.0, T);
            c_max += (1.0 - gamma) * max_h * std::pow(child(j).max() * max_hp / min_h, 1.0 / (1.0 - gamma));
        }
        const double delta = gamma / (1.0 - gamma);
        const double upper = std::exp(T * std::max(0.0, max_a)) * (1.0 + T * c_max * std::pow(lower, -delta));
        return {lower, upper};
    }

    const YTransform yt(gamma);
    // sup_t h_j / (h^P_j mu_j B_j) per alive obligor.
    std::vector<double> S(alive.size(), 0.0);
    for (int k = 0; k <= grid.steps(); ++k) {
        const double t = grid.node(k);
        for (std::size_t a = 0; a < alive.size(); ++a) {
            const int j = alive[a];
            const auto c = coefs_at(model, j, z, t);
            S[a] = std::max(S[a], c.h / (c.h_ref * c.mu * child(j).value(k)));
        }
    }
    double max_dbar = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= grid.steps(); ++k) {
        const double t = grid.node(k);
        double dbar = gamma * model.r();
        for (std::size_t a = 0; a < alive.size(); ++a) {
            const int j = alive[a];
            const auto c = coefs_at(model, j, z, t);
            const double y = c.mu * child(j).value(k);
            const double kappa = 1.0 / yt.inverse_from_log(y, std::log(S[a]) - 1.0);
            dbar += gamma * c.h - gamma * c.h * std::pow(kappa, 1.0 / (1.0 - gamma)) - c.h / y * kappa;
        }
        max_dbar = std::max(max_dbar, dbar);
    }
    double max_hp = 0.0;
    double min_mu = std::numeric_limits<double>::infinity();
    for (int j : alive) {
        max_hp = std::max(max_hp, model.h_ref(j, z).max_on(0.0, T));
        min_mu = std::min(min_mu, model.mu(j, z).min_on(0.0, T));
    }
    const double upper = std::exp(T * std::max(0.0, max_dbar)) * (1.0 + T * M * max_hp / min_mu);
    double K = model.r();
    for (int j : alive) {
        K += model.h_rn(j, z).min_on(0.0, T) -
             std::pow(upper / child(j).min(), 1.0 / gamma) * model.h_rn(j, z).max_on(0.0, T);
    }
    K *= gamma;
    const double lower = K >= 0.0 ? 1.0 : std::exp(K * T);
    return {lower, upper};
}

StateResult solve_state_direct(const MarketModel& model, DefaultState z, const ChildFunctions& children,
                               const TimeGrid& grid, const Bounds& bounds) {
    check_children(model, z, children);
    const YTransform yt(model.gamma());
    long hits = 0;
    auto rhs = [&](double t, double x) {
        const double xc = std::clamp(x, bounds.lower, bounds.upper);
        if (xc != x) ++hits;
        const Drift d = drift_at(model, z, t);
        return -x * d.a + xc * c_sum(model, yt, z, children, t, xc) - d.source;
    };
    StateResult out{integrate_backward(rhs, 1.0, grid), 0, 0};
    out.clamp_hits = hits;
    return out;
}

StateResult solve_state_fixed_point(const MarketModel& model, DefaultState z,
                                    const ChildFunctions& children, const TimeGrid& grid,
                                    const Bounds& bounds, const FixedPointOptions& options) {
    check_children(model, z, children);
    const YTransform yt(model.gamma());
    GridFunction prev(grid, std::vector<double>(grid.nodes().size(), 1.0));
    double prev_diff = std::numeric_limits<double>::infinity();
    long hits = 0;
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        auto rhs = [&](double t, double x) {
            const double frozen = std::clamp(prev.at(t), bounds.lower, bounds.upper);
            if (frozen != prev.at(t)) ++hits;
            const Drift d = drift_at(model, z, t);
            return -x * (d.a - c_sum(model, yt, z, children, t, frozen)) - d.source;
        };
        GridFunction next = integrate_backward(rhs, 1.0, grid);
        double diff = sup_distance(next, prev);
        if (diff > prev_diff) {
            std::vector<double> avg(next.values().begin(), next.values().end());
            for (std::size_t k = 0; k < avg.size(); ++k) avg[k] = 0.5 * (avg[k] + prev.values()[k]);
            next = GridFunction(grid, std::move(avg));
            diff = sup_distance(next, prev);
        }
        prev = std::move(next);
        prev_diff = diff;
        if (diff < options.tol) return {std::move(prev), iter, hits};
    }
    std::ostringstream os;
    os << "fixed point for state " << z.bitstring(model.M()) << " did not reach tolerance "
       << options.tol << " in " << options.max_iter << " iterations (last change " << prev_diff << ")";
    throw ConvergenceError(os.str());
}

SolutionTable solve_all(const MarketModel& model, const TimeGrid& grid, SolveMethod method,
                        const FixedPointOptions& options, int threads) {
    const int M = model.M();
    SolutionTable table(M, grid, method);
    const auto states = enumerate_states(M);
    {
        SolutionTable::State terminal;
        terminal.B = solve_terminal_state(model, grid);
        terminal.bounds = compute_bounds(model, states.front(), {}, grid);
        table.set(states.front(), std::move(terminal));
    }
    std::size_t pos = 1;
    while (pos < states.size()) {
        const int layer = states[pos].m_count();
        std::vector<DefaultState> batch;
        for (; pos < states.size() && states[pos].m_count() == layer; ++pos) batch.push_back(states[pos]);
        std::vector<SolutionTable::State> solved(batch.size());
        parallel_for(batch.size(), threads, [&](std::size_t idx) {
            const DefaultState z = batch[idx];
            const auto children = table.children(z);
            SolutionTable::State s;
            s.bounds = compute_bounds(model, z, children, grid);
            if (method == SolveMethod::fixed_point) {
                auto fp = solve_state_fixed_point(model, z, children, grid, s.bounds, options);
                s.B = std::move(fp.B);
                s.fp_iterations = fp.iterations;
                s.clamp_hits = fp.clamp_hits;
            } else {
                auto direct = solve_state_direct(model, z, children, grid, s.bounds);
                s.clamp_hits = direct.clamp_hits;
                if (method == SolveMethod::both) {
                    const auto fp = solve_state_fixed_point(model, z, children, grid, s.bounds, options);
                    s.fp_iterations = fp.iterations;
                    s.cross_gap = sup_distance(direct.B, fp.B);
                }
                s.B = std::move(direct.B);
            }
            solved[idx] = std::move(s);
        });
        for (std::size_t idx = 0; idx < batch.size(); ++idx) {
            if (method == SolveMethod::both && !(solved[idx].cross_gap <= kHjbCrossCheckTol)) {
                std::ostringstream os;
                os << "direct and fixed-point solutions disagree in state " << batch[idx].bitstring(M)
                   << ": sup gap " << solved[idx].cross_gap;
                throw ConsistencyError(os.str());
            }
            table.set(batch[idx], std::move(solved[idx]));
        }
    }
    return table;
}

}  // namespace robustcredit

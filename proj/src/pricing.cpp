#include "robustcredit/pricing.hpp"

#include "robustcredit/errors.hpp"
#include "robustcredit/linalg.hpp"
#include "robustcredit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace robustcredit {

PriceTable::PriceTable(const MarketModel& model, TimeGrid horizon)
    : M_(model.M()), horizon_(std::move(horizon)) {
    for (int i = 0; i < M_; ++i) recovery_.push_back(model.obligor(i).recovery);
    const auto n = (std::size_t{1} << M_) * static_cast<std::size_t>(M_);
    table_.resize(n);
    gaps_.assign(n, 0.0);
}

std::size_t PriceTable::slot(int i, DefaultState z) const {
    return static_cast<std::size_t>(z.mask()) * static_cast<std::size_t>(M_) + static_cast<std::size_t>(i);
}

const GridFunction& PriceTable::function(int i, DefaultState z) const {
    if (z.defaulted(i)) {
        throw DomainError("no pre-default price for defaulted obligor " + std::to_string(i + 1));
    }
    return table_[slot(i, z)];
}

double PriceTable::value(int i, DefaultState z, double t) const {
    if (z.defaulted(i)) return recovery(i);
    return table_[slot(i, z)].at(t);
}

double PriceTable::at_node(int i, DefaultState z, int k) const {
    if (z.defaulted(i)) return recovery(i);
    return table_[slot(i, z)].value(k);
}

double PriceTable::method_gap(int i, DefaultState z) const {
    return z.defaulted(i) ? 0.0 : gaps_[slot(i, z)];
}

TimeGrid pricing_grid(const MarketModel& model, const TimeGrid& horizon, int obligor) {
    std::vector<double> nodes(horizon.nodes().begin(), horizon.nodes().end());
    const double T = horizon.t_end();
    const double Ti = model.obligor(obligor).maturity;
    const double dt = T / horizon.steps();
    const int extra = std::max(1, static_cast<int>(std::ceil((Ti - T) / dt - 1e-9)));
    for (int k = 1; k <= extra; ++k) {
        nodes.push_back(k == extra ? Ti : T + (Ti - T) * static_cast<double>(k) / extra);
    }
    const double snap = 1e-12 * std::max(1.0, Ti);
    for (double knot : model.all_knots()) {
        if (knot <= T || knot >= Ti) continue;
        const auto it = std::lower_bound(nodes.begin(), nodes.end(), knot);
        const bool near_next = it != nodes.end() && *it - knot <= snap;
        const bool near_prev = it != nodes.begin() && knot - *(it - 1) <= snap;
        if (!near_next && !near_prev) nodes.insert(it, knot);
    }
    return TimeGrid::from_nodes(std::move(nodes));
}

namespace {

struct Job {
    int obligor;
    DefaultState z;
};

/// Exact quadrature when obligor i is the only alive name.
std::vector<double> single_name_quadrature(const MarketModel& model, int i, DefaultState z,
                                           const TimeGrid& grid) {
    const auto& ob = model.obligor(i);
    const auto& h = model.h_rn(i, z);
    const auto rate = h.plus(PiecewiseConstant::constant(model.r()));
    const auto weight = h.scaled(ob.recovery).plus(PiecewiseConstant::constant(ob.coupon));
    std::vector<double> out(grid.nodes().size());
    for (int k = 0; k <= grid.steps(); ++k) {
        const double t = grid.node(k);
        out[static_cast<std::size_t>(k)] =
            std::exp(-rate.integral(t, ob.maturity)) + quad_segment_exp(rate, weight, t, ob.maturity);
    }
    out.back() = 1.0;
    return out;
}

/// Cellwise backward recursion with the coupling term linear between nodes
/// and coefficients constant on each cell.
std::vector<double> coupled_quadrature(const MarketModel& model, int i, DefaultState z,
                                       const TimeGrid& grid,
                                       const std::vector<const GridFunction*>& children,
                                       const std::vector<int>& others) {
    const auto& ob = model.obligor(i);
    const auto alive = z.alive_obligors(model.M());
    const int n = grid.steps();
    std::vector<double> F(static_cast<std::size_t>(n) + 1);
    F.back() = 1.0;
    auto coupling = [&](double t_cell, int node) {
        double s = ob.coupon + ob.recovery * model.h_rn(i, z)(t_cell);
        for (std::size_t a = 0; a < others.size(); ++a) {
            s += model.h_rn(others[a], z)(t_cell) * children[a]->value(node);
        }
        return s;
    };
    for (int k = n - 1; k >= 0; --k) {
        const double ta = grid.node(k);
        const double dt = grid.node(k + 1) - ta;
        double rho = model.r();
        for (int j : alive) rho += model.h_rn(j, z)(ta);
        const double wa = coupling(ta, k);
        const double wb = coupling(ta, k + 1);
        F[static_cast<std::size_t>(k)] =
            std::exp(-rho * dt) * F[static_cast<std::size_t>(k) + 1] + linear_exp_integral(wa, wb, rho, dt);
    }
    return F;
}

GridFunction ode_route(const MarketModel& model, int i, DefaultState z, const TimeGrid& grid,
                       const std::vector<const GridFunction*>& children, const std::vector<int>& others) {
    const auto& ob = model.obligor(i);
    const auto alive = z.alive_obligors(model.M());
    auto rhs = [&](double t, double F) {
        double rho = model.r();
        for (int j : alive) rho += model.h_rn(j, z)(t);
        double w = ob.coupon + ob.recovery * model.h_rn(i, z)(t);
        for (std::size_t a = 0; a < others.size(); ++a) {
            w += model.h_rn(others[a], z)(t) * children[a]->at(t);
        }
        return rho * F - w;
    };
    return integrate_backward(rhs, 1.0, grid);
}

}  // namespace

PriceTable solve_prices(const MarketModel& model, const TimeGrid& horizon, int threads) {
    PriceTable table(model, horizon);
    const int M = model.M();
    std::vector<TimeGrid> grids;
    for (int i = 0; i < M; ++i) grids.push_back(pricing_grid(model, horizon, i));
    std::vector<GridFunction> ode_table(table.table_.size());

    const auto states = enumerate_states(M);
    std::size_t pos = 0;
    while (pos < states.size()) {
        const int layer = states[pos].m_count();
        std::vector<Job> jobs;
        for (; pos < states.size() && states[pos].m_count() == layer; ++pos) {
            for (int i : states[pos].alive_obligors(M)) jobs.push_back({i, states[pos]});
        }
        parallel_for(jobs.size(), threads, [&](std::size_t idx) {
            const auto [i, z] = jobs[idx];
            const auto& grid = grids[static_cast<std::size_t>(i)];
            std::vector<int> others;
            std::vector<const GridFunction*> quad_children;
            std::vector<const GridFunction*> ode_children;
            for (int j : z.alive_obligors(M)) {
                if (j == i) continue;
                others.push_back(j);
                const auto child = table.slot(i, z.with_default(j));
                quad_children.push_back(&table.table_[child]);
                ode_children.push_back(&ode_table[child]);
            }
            std::vector<double> quad = others.empty()
                                           ? single_name_quadrature(model, i, z, grid)
                                           : coupled_quadrature(model, i, z, grid, quad_children, others);
            GridFunction ode = ode_route(model, i, z, grid, ode_children, others);
            GridFunction q(grid, std::move(quad));
            const double gap = sup_distance(q, ode);
            const auto s = table.slot(i, z);
            table.gaps_[s] = gap;
            table.table_[s] = std::move(q);
            ode_table[s] = std::move(ode);
        });
        for (const auto& job : jobs) {
            const double gap = table.gaps_[table.slot(job.obligor, job.z)];
            table.max_gap_ = std::max(table.max_gap_, gap);
            if (!(gap <= kPriceCrossCheckTol)) {
                std::ostringstream os;
                os << "price evaluations disagree for obligor " << job.obligor + 1 << " in state "
                   << job.z.bitstring(M) << ": sup gap " << gap;
                throw ConsistencyError(os.str());
            }
        }
    }
    return table;
}

DepreciationMatrix depreciation_matrix(const PriceTable& prices, double t, DefaultState z) {
    DepreciationMatrix out;
    out.alive = z.alive_obligors(prices.M());
    const auto n = static_cast<Eigen::Index>(out.alive.size());
    out.G.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const int i = out.alive[static_cast<std::size_t>(a)];
        const double F = prices.value(i, z, t);
        for (Eigen::Index b = 0; b < n; ++b) {
            const int j = out.alive[static_cast<std::size_t>(b)];
            out.G(a, b) = prices.value(i, z.with_default(j), t) / F - 1.0;
        }
    }
    return out;
}

DepreciationMatrix depreciation_matrix_at_node(const PriceTable& prices, int k, DefaultState z) {
    DepreciationMatrix out;
    out.alive = z.alive_obligors(prices.M());
    const auto n = static_cast<Eigen::Index>(out.alive.size());
    out.G.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const int i = out.alive[static_cast<std::size_t>(a)];
        const double F = prices.at_node(i, z, k);
        for (Eigen::Index b = 0; b < n; ++b) {
            const int j = out.alive[static_cast<std::size_t>(b)];
            out.G(a, b) = prices.at_node(i, z.with_default(j), k) / F - 1.0;
        }
    }
    return out;
}

RankReport check_assumption_a1(const PriceTable& prices, const TimeGrid& grid) {
    RankReport report;
    for (const auto z : enumerate_states(prices.M())) {
        if (z.all_defaulted(prices.M())) continue;
        RankReport::StateSummary summary{z, std::numeric_limits<double>::infinity(), 0.0};
        for (int k = 0; k <= grid.steps(); ++k) {
            const double t = grid.node(k);
            const double sigma = smallest_singular_value(depreciation_matrix(prices, t, z).G);
            if (sigma < summary.min_singular_value) {
                summary.min_singular_value = sigma;
                summary.t_at_min = t;
            }
            if (!(sigma >= RankReport::kThreshold)) report.flags.push_back({t, z, sigma});
        }
        report.states.push_back(summary);
    }
    return report;
}

}  // namespace robustcredit

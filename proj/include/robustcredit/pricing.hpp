#pragma once

#include "robustcredit/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace robustcredit {

/// Largest tolerated sup-norm gap between the two price evaluations.
inline constexpr double kPriceCrossCheckTol = 1e-5;

/// Pre-default bond prices F_{i,z}. Each obligor has its own grid that starts
/// with the horizon grid nodes and continues to its maturity.
class PriceTable {
public:
    PriceTable() = default;
    PriceTable(const MarketModel& model, TimeGrid horizon);

    [[nodiscard]] int M() const { return M_; }
    [[nodiscard]] const TimeGrid& horizon_grid() const { return horizon_; }
    [[nodiscard]] double recovery(int i) const { return recovery_[static_cast<std::size_t>(i)]; }

    /// Price function on obligor i's full grid; only for alive i.
    [[nodiscard]] const GridFunction& function(int i, DefaultState z) const;
    /// F_{i,z}(t) by linear interpolation, or R_i when obligor i has defaulted.
    [[nodiscard]] double value(int i, DefaultState z, double t) const;
    /// F_{i,z} at horizon node k (exact, no interpolation).
    [[nodiscard]] double at_node(int i, DefaultState z, int k) const;

    /// Largest sup-norm gap between quadrature and ODE evaluations.
    [[nodiscard]] double max_method_gap() const { return max_gap_; }
    [[nodiscard]] double method_gap(int i, DefaultState z) const;

private:
    friend PriceTable solve_prices(const MarketModel&, const TimeGrid&, int);

    [[nodiscard]] std::size_t slot(int i, DefaultState z) const;

    int M_ = 0;
    TimeGrid horizon_;
    std::vector<double> recovery_;
    std::vector<GridFunction> table_;
    std::vector<double> gaps_;
    double max_gap_ = 0.0;
};

/// Grid used for obligor i: the horizon nodes followed by steps of the same
/// size (and any knot times) up to the maturity.
TimeGrid pricing_grid(const MarketModel& model, const TimeGrid& horizon, int obligor);

/// Solves all pre-default prices by backward recursion over default states.
/// Every function is computed by exact quadrature and by backward RK4; the
/// quadrature result is stored. Throws ConsistencyError when the two differ
/// by more than kPriceCrossCheckTol.
PriceTable solve_prices(const MarketModel& model, const TimeGrid& horizon, int threads = 1);

/// Jump matrix over the alive obligors of z (in ascending index order):
/// entry (a, b) = F_{i,z^j}/F_{i,z} - 1 for i = alive[a], j = alive[b].
struct DepreciationMatrix {
    std::vector<int> alive;
    Eigen::MatrixXd G;
};

DepreciationMatrix depreciation_matrix(const PriceTable& prices, double t, DefaultState z);
DepreciationMatrix depreciation_matrix_at_node(const PriceTable& prices, int k, DefaultState z);

/// Rank report for the depreciation matrices on every node and state.
struct RankReport {
    struct StateSummary {
        DefaultState z;
        double min_singular_value = 0.0;
        double t_at_min = 0.0;
    };
    struct Flag {
        double t = 0.0;
        DefaultState z;
        double singular_value = 0.0;
    };
    static constexpr double kThreshold = 1e-10;

    std::vector<StateSummary> states;
    std::vector<Flag> flags;

    [[nodiscard]] bool clean() const { return flags.empty(); }
};

RankReport check_assumption_a1(const PriceTable& prices, const TimeGrid& grid);

}  // namespace robustcredit

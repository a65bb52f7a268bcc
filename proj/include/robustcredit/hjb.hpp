#pragma once

#include "robustcredit/model.hpp"
#include "robustcredit/ytransform.hpp"

#include <string>
#include <vector>

namespace robustcredit {

/// Child solutions B_{z^j} indexed by obligor j; null for obligors already
/// defaulted in z.
using ChildFunctions = std::vector<const GridFunction*>;

struct Bounds {
    double lower = 0.0;
    double upper = 0.0;
};

enum class SolveMethod { direct, fixed_point, both };

std::string to_string(SolveMethod m);
/// Accepts "direct", "fixed", "fixed_point" and "both"; throws ValidationError otherwise.
SolveMethod parse_solve_method(const std::string& s);

struct FixedPointOptions {
    double tol = 1e-10;
    int max_iter = 200;
};

/// Value-function time components B_z on the horizon grid for every state.
class SolutionTable {
public:
    struct State {
        GridFunction B;
        Bounds bounds;
        int fp_iterations = 0;   ///< 0 when the fixed point was not run
        double cross_gap = 0.0;  ///< direct vs fixed-point sup gap (method both)
        long clamp_hits = 0;     ///< stage evaluations where the truncation bound was active
    };

    SolutionTable() = default;
    SolutionTable(int M, TimeGrid grid, SolveMethod method);

    [[nodiscard]] int M() const { return M_; }
    [[nodiscard]] const TimeGrid& grid() const { return grid_; }
    [[nodiscard]] SolveMethod method() const { return method_; }
    [[nodiscard]] const State& state(DefaultState z) const;
    [[nodiscard]] const GridFunction& B(DefaultState z) const { return state(z).B; }
    [[nodiscard]] double value(DefaultState z, double t) const { return state(z).B.at(t); }
    [[nodiscard]] double max_cross_gap() const;
    /// Children of z in the form expected by the per-state solvers.
    [[nodiscard]] ChildFunctions children(DefaultState z) const;

    void set(DefaultState z, State s);

private:
    int M_ = 0;
    TimeGrid grid_;
    SolveMethod method_ = SolveMethod::direct;
    std::vector<State> states_;
};

/// Root X = Y^{-1}_{mu B_child}((h B)/(h^P B_child) e^{-mu B}) that fixes the
/// optimal jump exposure through (1 + Gamma)^{gamma - 1} = X. With
/// no_uncertainty the tilt is pinned to 1 and X = (h B)/(h^P B_child).
double exposure_root(const YTransform& yt, bool no_uncertainty, double h, double h_ref, double mu,
                     double B_child, double B);

/// C_j(t, mu_j B_child; x) for alive obligor j in state z. Throws DomainError
/// for nonpositive B_child or x.
double c_coefficient(const YTransform& yt, double t, int j, DefaultState z, double B_child, double x,
                     const MarketModel& model);

/// B'(t) implied by the state equation at (t, B), without truncation.
double hjb_derivative(const MarketModel& model, const YTransform& yt, DefaultState z,
                      const ChildFunctions& children, double t, double B);

/// e^{gamma r (T - t)} on every node.
GridFunction solve_terminal_state(const MarketModel& model, const TimeGrid& grid);

/// A-priori bounds on B_z from grid-sampled extrema of the children and the
/// intensity functions.
Bounds compute_bounds(const MarketModel& model, DefaultState z, const ChildFunctions& children,
                      const TimeGrid& grid);

struct StateResult {
    GridFunction B;
    int iterations = 0;
    long clamp_hits = 0;
};

/// Backward RK4 on the truncated state equation.
StateResult solve_state_direct(const MarketModel& model, DefaultState z, const ChildFunctions& children,
                               const TimeGrid& grid, const Bounds& bounds);

/// Freezes the coefficient sum at the previous iterate, solves the resulting
/// linear equation by backward RK4, and repeats from B = 1 until the sup
/// change drops below tol. Iterates are averaged with their predecessor
/// whenever the change grows. Throws ConvergenceError after max_iter.
StateResult solve_state_fixed_point(const MarketModel& model, DefaultState z,
                                    const ChildFunctions& children, const TimeGrid& grid,
                                    const Bounds& bounds, const FixedPointOptions& options = {});

/// Largest tolerated direct vs fixed-point gap for method both.
inline constexpr double kHjbCrossCheckTol = 1e-5;

/// Solves every state in recursion order. Throws ConsistencyError when
/// method both finds a gap above kHjbCrossCheckTol.
SolutionTable solve_all(const MarketModel& model, const TimeGrid& grid, SolveMethod method,
                        const FixedPointOptions& options = {}, int threads = 1);

}  // namespace robustcredit

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace robustcredit {

/// Strictly increasing time nodes starting at 0. Uniform grids keep the last
/// node exactly equal to t_end.
class TimeGrid {
public:
    TimeGrid() = default;

    static TimeGrid uniform(double t_end, int steps);
    /// Nodes must start at 0 and be strictly increasing.
    static TimeGrid from_nodes(std::vector<double> nodes);

    [[nodiscard]] int steps() const { return static_cast<int>(nodes_.size()) - 1; }
    [[nodiscard]] double t_end() const { return nodes_.back(); }
    [[nodiscard]] double node(int k) const { return nodes_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] std::span<const double> nodes() const { return nodes_; }

    /// Index k of the cell [t_k, t_{k+1}) containing t, clamped to the grid.
    [[nodiscard]] int cell(double t) const;

private:
    std::vector<double> nodes_;
};

/// One sampled value per grid node, evaluated off-node by linear interpolation.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(TimeGrid grid, std::vector<double> values);

    [[nodiscard]] const TimeGrid& grid() const { return grid_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] double value(int k) const { return values_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] double at(double t) const;
    [[nodiscard]] double min() const;
    [[nodiscard]] double max() const;

private:
    TimeGrid grid_;
    std::vector<double> values_;
};

/// Sup-norm distance between two functions sampled on the same node count.
double sup_distance(const GridFunction& a, const GridFunction& b);

/// Right-continuous step function on [0, inf): value_k on [knot_k, knot_{k+1}).
class PiecewiseConstant {
public:
    PiecewiseConstant() = default;
    PiecewiseConstant(std::vector<double> knots, std::vector<double> values);

    static PiecewiseConstant constant(double value) { return {{0.0}, {value}}; }

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] std::span<const double> knots() const { return knots_; }
    [[nodiscard]] std::span<const double> levels() const { return values_; }
    [[nodiscard]] bool is_constant() const { return values_.size() == 1; }

    [[nodiscard]] double min_on(double a, double b) const;
    [[nodiscard]] double max_on(double a, double b) const;
    /// Exact integral over [a, b].
    [[nodiscard]] double integral(double a, double b) const;

    [[nodiscard]] PiecewiseConstant scaled(double factor) const;
    /// Pointwise map of the levels (used for clamping).
    [[nodiscard]] PiecewiseConstant map_levels(const std::function<double(double)>& f) const;
    /// Pointwise sum; knots are merged.
    [[nodiscard]] PiecewiseConstant plus(const PiecewiseConstant& other) const;

    friend bool operator==(const PiecewiseConstant&, const PiecewiseConstant&) = default;

private:
    std::vector<double> knots_;
    std::vector<double> values_;
};

using BackwardRhs = std::function<double(double t, double y)>;

/// Classical RK4 from grid.t_end() down to 0 with y(t_end) = terminal_value.
/// The first stage of each step is evaluated just inside the step, so step
/// functions with jumps on grid nodes are integrated without smearing.
/// Throws NumericalError when a stage is not finite.
GridFunction integrate_backward(const BackwardRhs& rhs, double terminal_value,
                                const TimeGrid& grid);

struct Bracket {
    double lo;
    double hi;
};

/// Solves f(x) = target for f strictly increasing on (0, inf) with f(0+) = 0
/// and f(inf) = inf. Geometric bracket expansion, then Newton steps in
/// log-log coordinates (secant steps when no derivative is given) with
/// bisection fallback. Result satisfies |f(x) - target| <= 1e-12 max(1, target)
/// or sits on a bracket collapsed to machine precision.
/// Throws BracketError / ConvergenceError.
double invert_monotone(const std::function<double(double)>& f, double target,
                       std::optional<Bracket> bracket_hint = std::nullopt,
                       const std::function<double(double)>& derivative = {});

/// Same contract as invert_monotone but expressed through g(u) = log f(e^u),
/// for functions whose values under- or overflow. Solves g(u) = log_target
/// and returns e^u; `slope` is dg/du when available.
double invert_monotone_log(const std::function<double(double)>& log_f, double log_target,
                           std::optional<Bracket> bracket_hint = std::nullopt,
                           const std::function<double(double)>& slope = {});

/// Exact value of int_a^b w(u) exp(-int_a^u rho(s) ds) du for step functions.
double quad_segment_exp(const PiecewiseConstant& rate, const PiecewiseConstant& weight,
                        double a, double b);

/// int_0^dt (w0 + (w1 - w0) s/dt) exp(-rho s) ds, stable for rho dt -> 0.
double linear_exp_integral(double w0, double w1, double rho, double dt);

}  // namespace robustcredit

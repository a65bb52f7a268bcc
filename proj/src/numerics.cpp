#include "robustcredit/numerics.hpp"

#include "robustcredit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace robustcredit {

TimeGrid TimeGrid::uniform(double t_end, int steps) {
    if (steps < 1) throw ValidationError("grid needs at least one step");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ValidationError("grid end must be positive");
    std::vector<double> nodes(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) {
        nodes[static_cast<std::size_t>(k)] = t_end * static_cast<double>(k) / steps;
    }
    nodes.back() = t_end;
    TimeGrid g;
    g.nodes_ = std::move(nodes);
    return g;
}

TimeGrid TimeGrid::from_nodes(std::vector<double> nodes) {
    if (nodes.size() < 2 || nodes.front() != 0.0) {
        throw ValidationError("grid nodes must start at 0 and hold at least two points");
    }
    for (std::size_t k = 1; k < nodes.size(); ++k) {
        if (!(nodes[k] > nodes[k - 1])) throw ValidationError("grid nodes must be strictly increasing");
    }
    TimeGrid g;
    g.nodes_ = std::move(nodes);
    return g;
}

int TimeGrid::cell(double t) const {
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    auto k = static_cast<int>(it - nodes_.begin()) - 1;
    return std::clamp(k, 0, steps() - 1);
}

GridFunction::GridFunction(TimeGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.nodes().size()) {
        throw ValidationError("grid function needs one value per node");
    }
}

double GridFunction::at(double t) const {
    const int k = grid_.cell(t);
    const double t0 = grid_.node(k);
    const double t1 = grid_.node(k + 1);
    const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    return values_[static_cast<std::size_t>(k)] * (1.0 - w) +
           values_[static_cast<std::size_t>(k) + 1] * w;
}

double GridFunction::min() const { return *std::min_element(values_.begin(), values_.end()); }
double GridFunction::max() const { return *std::max_element(values_.begin(), values_.end()); }

double sup_distance(const GridFunction& a, const GridFunction& b) {
    if (a.values().size() != b.values().size()) {
        throw ValidationError("grid functions live on different grids");
    }
    double d = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k) {
        d = std::max(d, std::abs(a.values()[k] - b.values()[k]));
    }
    return d;
}

PiecewiseConstant::PiecewiseConstant(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.empty() || knots_.size() != values_.size()) {
        throw SchemaError("piecewise-constant function needs matching knots and values");
    }
    if (knots_.front() != 0.0) throw SchemaError("first knot must be 0");
    for (std::size_t k = 1; k < knots_.size(); ++k) {
        if (!(knots_[k] > knots_[k - 1])) throw SchemaError("knots must be strictly increasing");
    }
}

double PiecewiseConstant::operator()(double t) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    const auto k = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
    return values_[k];
}

double PiecewiseConstant::min_on(double a, double b) const {
    double m = (*this)(a);
    for (std::size_t k = 0; k < knots_.size(); ++k) {
        if (knots_[k] > a && knots_[k] <= b) m = std::min(m, values_[k]);
    }
    return m;
}

double PiecewiseConstant::max_on(double a, double b) const {
    double m = (*this)(a);
    for (std::size_t k = 0; k < knots_.size(); ++k) {
        if (knots_[k] > a && knots_[k] <= b) m = std::max(m, values_[k]);
    }
    return m;
}

double PiecewiseConstant::integral(double a, double b) const {
    double sum = 0.0;
    double left = a;
    while (left < b) {
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), left);
        const double right = it == knots_.end() ? b : std::min(b, *it);
        sum += (*this)(left) * (right - left);
        left = right;
    }
    return sum;
}

PiecewiseConstant PiecewiseConstant::scaled(double factor) const {
    return map_levels([factor](double v) { return v * factor; });
}

PiecewiseConstant PiecewiseConstant::map_levels(const std::function<double(double)>& f) const {
    PiecewiseConstant out = *this;
    for (auto& v : out.values_) v = f(v);
    return out;
}

PiecewiseConstant PiecewiseConstant::plus(const PiecewiseConstant& other) const {
    std::vector<double> knots = knots_;
    knots.insert(knots.end(), other.knots_.begin(), other.knots_.end());
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    std::vector<double> values;
    values.reserve(knots.size());
    for (double t : knots) values.push_back((*this)(t) + other(t));
    return {std::move(knots), std::move(values)};
}

GridFunction integrate_backward(const BackwardRhs& rhs, double terminal_value,
                                const TimeGrid& grid) {
    if (!std::isfinite(terminal_value)) throw NumericalError("terminal value is not finite");
    const int n = grid.steps();
    std::vector<double> y(static_cast<std::size_t>(n) + 1);
    y[static_cast<std::size_t>(n)] = terminal_value;
    auto check = [](double v, double t) {
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite Runge-Kutta stage at t=" << t;
            throw NumericalError(os.str());
        }
        return v;
    };
    for (int k = n; k > 0; --k) {
        const double tb = grid.node(k);
        const double ta = grid.node(k - 1);
        const double h = ta - tb;  // negative step
        const double tm = 0.5 * (ta + tb);
        const double yb = y[static_cast<std::size_t>(k)];
        const double k1 = check(rhs(std::nextafter(tb, ta), yb), tb);
        const double k2 = check(rhs(tm, yb + 0.5 * h * k1), tm);
        const double k3 = check(rhs(tm, yb + 0.5 * h * k2), tm);
        const double k4 = check(rhs(ta, yb + h * k3), ta);
        y[static_cast<std::size_t>(k) - 1] =
            check(yb + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), ta);
    }
    return {grid, std::move(y)};
}

double invert_monotone_log(const std::function<double(double)>& log_f, double log_target,
                           std::optional<Bracket> bracket_hint,
                           const std::function<double(double)>& slope) {
    if (!std::isfinite(log_target)) throw DomainError("inversion target must be positive and finite");
    double ulo = 0.0;
    double uhi = 0.0;
    if (bracket_hint) {
        if (!(bracket_hint->lo > 0.0) || !(bracket_hint->hi >= bracket_hint->lo)) {
            throw DomainError("invalid bracket hint");
        }
        ulo = std::log(bracket_hint->lo);
        uhi = std::log(bracket_hint->hi);
    }
    const double step = std::log(2.0);
    double glo = log_f(ulo) - log_target;
    double ghi = uhi == ulo ? glo : log_f(uhi) - log_target;
    for (int doublings = 0; glo > 0.0; ++doublings) {
        if (doublings >= 200) throw BracketError("could not bracket the root from below");
        uhi = ulo;
        ghi = glo;
        ulo -= step;
        glo = log_f(ulo) - log_target;
    }
    for (int doublings = 0; ghi < 0.0; ++doublings) {
        if (doublings >= 200) throw BracketError("could not bracket the root from above");
        ulo = uhi;
        glo = ghi;
        uhi += step;
        ghi = log_f(uhi) - log_target;
    }
    if (glo == 0.0) return std::exp(ulo);
    if (ghi == 0.0) return std::exp(uhi);

    const double tol = 1e-13;
    double u = ulo - glo * (uhi - ulo) / (ghi - glo);
    for (int iter = 0; iter < 200; ++iter) {
        if (!(u > ulo && u < uhi)) u = 0.5 * (ulo + uhi);
        const double g = log_f(u) - log_target;
        if (std::isnan(g)) throw DomainError("inverted function is not defined at the trial point");
        if (std::abs(g) <= tol) return std::exp(u);
        if (g < 0.0) {
            ulo = u;
            glo = g;
        } else {
            uhi = u;
            ghi = g;
        }
        if (uhi - ulo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(u))) {
            return std::exp(u);
        }
        double next = std::numeric_limits<double>::quiet_NaN();
        if (slope) {
            const double s = slope(u);
            if (s > 0.0 && std::isfinite(s)) next = u - g / s;
        } else {
            next = ulo - glo * (uhi - ulo) / (ghi - glo);
        }
        if (!(next > ulo && next < uhi)) next = 0.5 * (ulo + uhi);
        u = next;
    }
    throw ConvergenceError("monotone inversion did not converge in 200 iterations");
}

double invert_monotone(const std::function<double(double)>& f, double target,
                       std::optional<Bracket> bracket_hint,
                       const std::function<double(double)>& derivative) {
    if (!(target > 0.0) || !std::isfinite(target)) {
        throw DomainError("inversion target must be positive and finite");
    }
    auto log_f = [&f](double u) {
        const double v = f(std::exp(u));
        if (v < 0.0 || std::isnan(v)) throw DomainError("inverted function left (0, inf)");
        return std::log(v);
    };
    std::function<double(double)> slope;
    if (derivative) {
        slope = [&f, &derivative](double u) {
            const double x = std::exp(u);
            return x * derivative(x) / f(x);
        };
    }
    return invert_monotone_log(log_f, std::log(target), bracket_hint, slope);
}

double quad_segment_exp(const PiecewiseConstant& rate, const PiecewiseConstant& weight,
                        double a, double b) {
    if (!(b > a)) return 0.0;
    std::vector<double> cuts{a, b};
    for (double k : rate.knots()) if (k > a && k < b) cuts.push_back(k);
    for (double k : weight.knots()) if (k > a && k < b) cuts.push_back(k);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double sum = 0.0;
    double log_discount = 0.0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double len = cuts[s + 1] - cuts[s];
        const double rho = rate(cuts[s]);
        const double w = weight(cuts[s]);
        sum += std::exp(-log_discount) * linear_exp_integral(w, w, rho, len);
        log_discount += rho * len;
    }
    return sum;
}

double linear_exp_integral(double w0, double w1, double rho, double dt) {
    const double x = rho * dt;
    double i0;  // int_0^dt e^{-rho s} ds
    double i1;  // int_0^dt (s/dt) e^{-rho s} ds
    if (std::abs(x) < 0.1) {
        // Power series: sum (-x)^n / (n+1)!  and  sum (-x)^n / (n! (n+2)).
        double term = 1.0;  // (-x)^n / n!
        i0 = 0.0;
        i1 = 0.0;
        for (int n = 0; n < 16; ++n) {
            i0 += term / (n + 1);
            i1 += term / (n + 2);
            term *= -x / (n + 1);
        }
        i0 *= dt;
        i1 *= dt;
    } else {
        const double e = std::exp(-x);
        i0 = -std::expm1(-x) / rho;
        i1 = (1.0 - e * (1.0 + x)) / (rho * x);
    }
    return w0 * i0 + (w1 - w0) * i1;
}

}  // namespace robustcredit

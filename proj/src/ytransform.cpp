#include "robustcredit/ytransform.hpp"

#include "robustcredit/errors.hpp"
#include "robustcredit/numerics.hpp"

#include <cmath>
#include <string>

namespace robustcredit {

YTransform::YTransform(double gamma) : gamma_(gamma), delta_(gamma / (1.0 - gamma)) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
}

double YTransform::log_eval(double y, double x) const {
    if (!(y > 0.0) || !(x > 0.0)) {
        throw DomainError("transform needs positive arguments (y=" + std::to_string(y) +
                          ", x=" + std::to_string(x) + ")");
    }
    const double lx = std::log(x);
    return lx - std::exp(std::log(y) - delta_ * lx);
}

double YTransform::eval(double y, double x) const {
    if (!(y > 0.0) || !(x > 0.0)) {
        throw DomainError("transform needs positive arguments (y=" + std::to_string(y) +
                          ", x=" + std::to_string(x) + ")");
    }
    const double e = y * std::pow(x, -delta_);
    if (e > 500.0 || !std::isfinite(e)) return std::exp(log_eval(y, x));
    return x * std::exp(-e);
}

namespace {

/// Solves u - exp(-delta (u - a)) = L for u, i.e. log x for the inverse of
/// x exp(-(x / e^a)^{-delta}) at target e^L.
double solve_log(double delta, double shift, double log_target) {
    auto g = [delta, shift](double u) { return u - std::exp(-delta * (u - shift)); };
    auto slope = [delta, shift](double u) { return 1.0 + delta * std::exp(-delta * (u - shift)); };
    // The root exceeds L, and lies within L + 1 whenever L >= shift.
    const double x0 = std::exp(std::max(log_target, shift));
    return invert_monotone_log(g, log_target, Bracket{x0, x0}, slope);
}

}  // namespace

double YTransform::inverse_unit(double target) const {
    if (!(target > 0.0) || !std::isfinite(target)) throw DomainError("inverse needs a positive target");
    return solve_log(delta_, 0.0, std::log(target));
}

double YTransform::inverse_from_log(double y, double log_target) const {
    if (!(y > 0.0)) throw DomainError("inverse needs y > 0");
    if (!std::isfinite(log_target)) throw DomainError("inverse needs a positive finite target");
    const double s = std::log(y) / delta_;  // log y^{1/delta}
    const double u = std::log(solve_log(delta_, 0.0, log_target - s));
    return std::exp(s + u);
}

double YTransform::inverse(double y, double target) const {
    if (!(target > 0.0) || !std::isfinite(target)) throw DomainError("inverse needs a positive target");
    return inverse_from_log(y, std::log(target));
}

double YTransform::inverse_direct(double y, double target) const {
    if (!(y > 0.0) || !(target > 0.0) || !std::isfinite(target)) {
        throw DomainError("inverse needs positive arguments");
    }
    const double a = std::log(y) / delta_;
    return solve_log(delta_, a, std::log(target));
}

double y_eval(const YTransform& yt, double y, double x) { return yt.eval(y, x); }
double y_inverse(const YTransform& yt, double y, double target) { return yt.inverse(y, target); }

}  // namespace robustcredit

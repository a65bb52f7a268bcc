#pragma once

namespace robustcredit {

/// The increasing map x -> x exp(-y x^{-delta}) with delta = gamma / (1 - gamma),
/// and its inverse in x.
class YTransform {
public:
    /// Throws DomainError unless 0 < gamma < 1.
    explicit YTransform(double gamma);

    [[nodiscard]] double gamma() const { return gamma_; }
    [[nodiscard]] double delta() const { return delta_; }

    /// Throws DomainError for nonpositive y or x. Switches to the log domain
    /// when y x^{-delta} exceeds 500.
    [[nodiscard]] double eval(double y, double x) const;
    /// log of eval(y, x), finite wherever y, x > 0.
    [[nodiscard]] double log_eval(double y, double x) const;

    /// Inverse with y = 1, solved in log coordinates.
    [[nodiscard]] double inverse_unit(double target) const;
    /// Inverse through the scaling y^{1/delta} Y_1^{-1}(y^{-1/delta} target).
    [[nodiscard]] double inverse(double y, double target) const;
    /// Same inverse, taking log(target); avoids forming tiny or huge targets.
    [[nodiscard]] double inverse_from_log(double y, double log_target) const;
    /// Inverse solved directly for the given y, without the scaling identity.
    [[nodiscard]] double inverse_direct(double y, double target) const;

private:
    double gamma_;
    double delta_;
};

/// Free-function forms of the YTransform members.
double y_eval(const YTransform& yt, double y, double x);
double y_inverse(const YTransform& yt, double y, double target);

}  // namespace robustcredit

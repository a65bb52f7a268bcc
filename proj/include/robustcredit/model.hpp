#pragma once

#include "robustcredit/default_state.hpp"
#include "robustcredit/numerics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace robustcredit {

/// Smallest admissible penalty weight; configured values below it are raised to it.
inline constexpr double kMuFloor = 1e-6;

struct ObligorSpec {
    double maturity = 0.0;  ///< T_i in years
    double coupon = 0.0;    ///< continuously paid coupon rate C_i
    double recovery = 0.0;  ///< recovery fraction R_i in [0, 1)
};

/// Time functions indexed by (obligor, default state); only pairs where the
/// obligor is alive carry a function.
class StateTimeFunction {
public:
    StateTimeFunction() = default;
    explicit StateTimeFunction(int M);

    [[nodiscard]] int obligors() const { return M_; }
    [[nodiscard]] bool has(int obligor, DefaultState z) const;
    /// Throws DomainError for pairs without a function.
    [[nodiscard]] const PiecewiseConstant& at(int obligor, DefaultState z) const;
    void set(int obligor, DefaultState z, PiecewiseConstant f);

    friend bool operator==(const StateTimeFunction&, const StateTimeFunction&) = default;

private:
    [[nodiscard]] std::size_t slot(int obligor, DefaultState z) const;

    int M_ = 0;
    std::vector<std::optional<PiecewiseConstant>> table_;
};

/// Validated market description. Immutable once constructed.
class MarketModel {
public:
    struct Inputs {
        int M = 0;
        double r = 0.0;
        double gamma = 0.0;
        double T = 0.0;
        std::vector<ObligorSpec> obligors;
        StateTimeFunction h_ref;  ///< reference-measure intensities h^P
        StateTimeFunction h_rn;   ///< risk-neutral intensities h
        StateTimeFunction mu;     ///< penalty weights
        /// Forces the worst-case tilt to 1 (the investor trusts the reference model).
        bool no_uncertainty = false;
        int grid_steps = 2000;
    };

    /// Validates and takes ownership. Throws ValidationError, SchemaError or
    /// CapacityError. Penalty weights are floored at kMuFloor.
    explicit MarketModel(Inputs inputs);

    [[nodiscard]] const Inputs& inputs() const { return in_; }
    [[nodiscard]] int M() const { return in_.M; }
    [[nodiscard]] double r() const { return in_.r; }
    [[nodiscard]] double gamma() const { return in_.gamma; }
    [[nodiscard]] double T() const { return in_.T; }
    [[nodiscard]] bool no_uncertainty() const { return in_.no_uncertainty; }
    [[nodiscard]] int grid_steps() const { return in_.grid_steps; }
    [[nodiscard]] const ObligorSpec& obligor(int i) const {
        return in_.obligors[static_cast<std::size_t>(i)];
    }
    [[nodiscard]] double max_maturity() const;

    [[nodiscard]] const PiecewiseConstant& h_ref(int i, DefaultState z) const { return in_.h_ref.at(i, z); }
    [[nodiscard]] const PiecewiseConstant& h_rn(int i, DefaultState z) const { return in_.h_rn.at(i, z); }
    [[nodiscard]] const PiecewiseConstant& mu(int i, DefaultState z) const { return in_.mu.at(i, z); }

    /// Sum of risk-neutral intensities of the obligors alive in z.
    [[nodiscard]] double total_h_rn(double t, DefaultState z) const;

    /// Non-fatal findings, e.g. coupons below r * R_i.
    [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }

    /// Every knot time of every intensity and penalty function, sorted and unique.
    [[nodiscard]] std::vector<double> all_knots() const;

private:
    Inputs in_;
    std::vector<std::string> warnings_;
};

/// Uniform grid on [0, T] with `steps` cells, plus every knot time inside
/// (0, T) so that step-function coefficients only jump on nodes.
TimeGrid make_grid(const MarketModel& model, int steps);

/// Parses a JSON configuration document. Throws SchemaError for malformed or
/// incomplete documents and ValidationError for out-of-range values.
MarketModel load_model(std::string_view document);
MarketModel load_model_file(const std::filesystem::path& path);

/// Reads a whole file; throws SchemaError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace robustcredit

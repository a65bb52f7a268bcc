#pragma once

#include "robustcredit/hjb.hpp"
#include "robustcredit/pricing.hpp"

#include <functional>
#include <vector>

namespace robustcredit {

/// Optimal allocation at one (t, z). Vectors have one entry per obligor;
/// defaulted obligors carry pi = 0, Gamma = 0, theta = 1 and zero intensity.
struct PolicySnapshot {
    double t = 0.0;
    DefaultState z;
    std::vector<double> pi_star;
    std::vector<double> gamma_star;
    std::vector<double> theta_star;
    std::vector<double> worst_case_intensity;
    double money_market_fraction = 1.0;
    double foc_residual = 0.0;
};

/// Gamma*_j at (t, z) for alive obligor j. Throws DomainError if the inverse
/// argument is not positive.
double gamma_star(const SolutionTable& solution, const MarketModel& model, double t, DefaultState z, int j);

/// Worst-case tilt for each alive obligor of z (indexed like
/// z.alive_obligors()) given the jump exposures in `gammas` (same
/// indexing). Evaluates the exponential form and the closed form and throws
/// ConsistencyError when they differ by more than 1e-8 relative.
std::vector<double> worst_case(const SolutionTable& solution, const MarketModel& model, double t,
                               DefaultState z, const std::vector<double>& gammas);

/// Tilt exp(-mu [B_j (1 + Gamma)^gamma - B]) induced by arbitrary exposures
/// (alive indexing); all ones without uncertainty.
std::vector<double> induced_tilt(const SolutionTable& solution, const MarketModel& model, double t,
                                 DefaultState z, const std::vector<double>& gammas);

/// Optimal fractions from G^T pi = Gamma*. Throws SingularMatrixError for a
/// singular G and FocResidualError when the first-order conditions are
/// violated by more than 1e-6.
PolicySnapshot optimal_feedback(const SolutionTable& solution, const PriceTable& prices,
                                const MarketModel& model, double t, DefaultState z);

struct HessianReport {
    double max_eigenvalue = 0.0;
    [[nodiscard]] bool negative_definite() const { return max_eigenvalue < 0.0; }
};

/// Hessian in pi of the Hamiltonian (at v = 1, with the tilt minimised for
/// the trial pi). `pi` holds one entry per alive obligor. Throws DomainError
/// if the trial point is not admissible.
HessianReport hessian_check(const PriceTable& prices, const SolutionTable& solution,
                            const MarketModel& model, double t, DefaultState z, const std::vector<double>& pi);

/// Eigenvalue check for G diag(ell) G^T.
HessianReport hessian_from_curvatures(const Eigen::MatrixXd& G, const Eigen::VectorXd& ell);

/// (v^gamma / gamma) B_z(t). Throws DomainError for v <= 0.
double value_function(const SolutionTable& solution, double gamma, double t, DefaultState z, double v);

/// Exposures Gamma_j and tilts theta_j on the horizon grid for every state.
class PolicyGrid {
public:
    PolicyGrid() = default;
    PolicyGrid(int M, TimeGrid grid);

    [[nodiscard]] int M() const { return M_; }
    [[nodiscard]] const TimeGrid& grid() const { return grid_; }
    [[nodiscard]] double exposure(DefaultState z, int k, int j) const { return exposure_[slot(z, k, j)]; }
    [[nodiscard]] double tilt(DefaultState z, int k, int j) const { return tilt_[slot(z, k, j)]; }
    void set(DefaultState z, int k, int j, double exposure, double tilt);

private:
    [[nodiscard]] std::size_t slot(DefaultState z, int k, int j) const {
        return (static_cast<std::size_t>(z.mask()) * grid_.nodes().size() + static_cast<std::size_t>(k)) *
                   static_cast<std::size_t>(M_) +
               static_cast<std::size_t>(j);
    }

    int M_ = 0;
    TimeGrid grid_;
    std::vector<double> exposure_;
    std::vector<double> tilt_;
};

/// Optimal exposures and worst-case tilts at every node and state.
PolicyGrid optimal_policy_grid(const SolutionTable& solution, const PriceTable& prices,
                               const MarketModel& model, int threads = 1);

/// Allocation rule: fractions for the alive obligors (alive indexing) at node k.
using AllocationRule = std::function<std::vector<double>(int k, DefaultState z)>;

/// Exposures Gamma = G^T pi for an arbitrary allocation rule, each paired
/// with the tilt it induces. Throws DomainError if some 1 + Gamma <= 0.
PolicyGrid allocation_policy_grid(const SolutionTable& solution, const PriceTable& prices,
                                  const MarketModel& model, const AllocationRule& rule);

}  // namespace robustcredit

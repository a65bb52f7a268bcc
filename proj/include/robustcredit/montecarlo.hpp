#pragma once

#include "robustcredit/policy.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace robustcredit {

/// Counter-based generator: every draw is a pure function of (seed, stream,
/// counter), so paths can be simulated in any order.
class SplitMixStream {
public:
    SplitMixStream(std::uint64_t seed, std::uint64_t stream);

    [[nodiscard]] std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    [[nodiscard]] double next_uniform();
    [[nodiscard]] std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Parses a decimal or 0x-prefixed 64-bit seed. Throws SeedError.
std::uint64_t parse_seed(const std::string& text);

enum class MeasureKind { reference, worst_case, custom };

/// Intensity tilt used to drive the default clocks.
struct Measure {
    MeasureKind kind = MeasureKind::worst_case;
    double tilt = 1.0;  ///< only read for custom
};

/// "reference", "worst" (or "worst_case") and "custom:<theta>". Throws ValidationError.
Measure parse_measure(const std::string& text);
std::string to_string(const Measure& m);

struct SimConfig {
    long paths = 10000;
    std::uint64_t seed = 20240611;
    Measure measure;
    double v0 = 1.0;
    DefaultState z0;
    double t0 = 0.0;
    int threads = 1;
};

struct Estimate {
    double mean = 0.0;
    double variance = 0.0;
    double std_error = 0.0;
    long count = 0;

    /// (mean - target) / std_error; 0 when both sides agree exactly.
    [[nodiscard]] double z_score(double target) const;
    [[nodiscard]] bool within(double target, double n_se) const;
};

/// Mean, sample variance and standard error; sums are taken pairwise in
/// input order.
Estimate estimate(const std::vector<double>& samples);

struct SimulationSummary {
    Estimate objective;         ///< U(V_T) + penalty integral
    Estimate terminal_utility;  ///< U(V_T)
    Estimate penalty;
    Estimate eta;      ///< density of the simulation measure w.r.t. the reference
    Estimate entropy;  ///< sum_j int (theta log theta - theta + 1) h^P ds
    double target = 0.0;  ///< U(v0) B_{z0}(t0); 0 without a solution table
    double min_wealth = 0.0;
    double mean_defaults = 0.0;
    std::vector<double> checkpoints;
    /// Compensated default indicators under the simulation measure, indexed
    /// [obligor][checkpoint]. Entries for obligors defaulted in z0 are zero.
    std::vector<std::vector<Estimate>> compensators;
};

/// Simulates default times and controlled wealth on [t0, T] under
/// `sim.measure`, with exposures Gamma_j(t) read from `policy`. The tilt for
/// the worst-case measure is also read from `policy`. Throws ValidationError
/// for an invalid configuration.
SimulationSummary simulate_paths(const MarketModel& model, const SolutionTable& solution,
                                 const PolicyGrid& policy, const SimConfig& sim);

struct MartingaleReport {
    double tilt = 1.0;
    std::vector<double> checkpoints;
    std::vector<std::vector<Estimate>> compensators;
    Estimate eta;
    std::vector<std::string> flags;
    [[nodiscard]] bool clean() const { return flags.empty(); }
};

/// Simulates under the reference measure, reports the compensated default
/// indicators and the density eta_T of the constant tilt `tilt`, and flags
/// every mean further than 3 standard errors from its expectation.
MartingaleReport martingale_diagnostics(const MarketModel& model, SimConfig sim, double tilt);

struct EntropyReport {
    Estimate direct;      ///< running entropy integral
    Estimate log_eta;     ///< log density at T
    Estimate difference;  ///< pathwise direct - log_eta
    [[nodiscard]] bool agree() const { return difference.within(0.0, 3.0); }
};

/// Relative entropy of a constant custom tilt, estimated under that tilt.
EntropyReport entropy_estimate(const MarketModel& model, const SimConfig& sim);

}  // namespace robustcredit

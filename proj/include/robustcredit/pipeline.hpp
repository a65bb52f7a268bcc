#pragma once

#include "robustcredit/montecarlo.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace robustcredit {

enum class Command { price, solve, policy, simulate, sweep, check };

std::string to_string(Command c);
/// Throws ValidationError for an unknown name.
Command parse_command(const std::string& name);

/// Exit codes of run_pipeline.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitCheckFailed = 3;

struct RunOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<int> grid_steps;  ///< overrides the config value
    SolveMethod method = SolveMethod::both;
    long paths = 10000;
    std::uint64_t seed = 20240611;
    Measure measure;
    double v0 = 1.0;
    std::optional<std::string> state;  ///< bitstring; all alive when unset
    double t0 = 0.0;
    std::string param;
    std::string values;
    std::optional<double> tie_risk_neutral;
    int threads = 1;
};

/// Everything derived from one configuration.
struct Pipeline {
    MarketModel model;
    TimeGrid grid;
    PriceTable prices;
    SolutionTable solution;
};

/// Loads, prices and solves. Throws on any failure.
Pipeline build_pipeline(const MarketModel& model, int grid_steps, SolveMethod method, int threads);

/// One row of policy.csv per (node, non-terminal state, alive obligor).
std::vector<PolicySnapshot> policy_table(const Pipeline& p, int threads);

/// Swept parameter: "<family>.<bitstring>.<obligor>" with family one of
/// reference, risk_neutral, penalty_mu (obligor is 1-based), or one of the
/// scalars r and gamma.
struct SweepSpec {
    std::string param;
    std::vector<double> values;
    std::optional<double> tie_risk_neutral;  ///< also set h to factor * value (reference only)
    DefaultState z;                          ///< observation state
    double t = 0.0;                          ///< observation time
    bool reuse_prices = true;
};

struct SweepRow {
    double value = 0.0;
    std::string status = "ok";
    double B = 0.0;
    double money_market_fraction = 0.0;
    std::vector<double> pi_star;
    std::vector<double> gamma_star;
    std::vector<double> theta_star;
    std::vector<double> worst_case_intensity;
};

/// "lo:hi:count" as count evenly spaced values. Throws ValidationError.
std::vector<double> parse_values(const std::string& text);

/// Copy of the model with `param` set to `value` (and the tied risk-neutral
/// intensity when requested). Throws ValidationError for an unknown path.
MarketModel apply_parameter(const MarketModel& base, const std::string& param, double value,
                            std::optional<double> tie_risk_neutral = std::nullopt);

/// True when the parameter leaves risk-neutral prices unchanged.
bool prices_independent_of(const std::string& param, std::optional<double> tie_risk_neutral);

/// Re-solves the model at every value. Failures are reported per row and
/// never abort the sweep. Rows come back in input order.
std::vector<SweepRow> run_sweep(const MarketModel& base, const SweepSpec& spec, int grid_steps,
                                SolveMethod method, int threads);

/// Outcome of one invariant in the check suite.
struct CheckItem {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

std::vector<CheckItem> run_check_suite(const Pipeline& p, int threads);

/// Decimal form with 17 significant digits.
std::string format_number(double x);

/// 64-bit FNV-1a of the bytes.
std::uint64_t fnv1a64(std::string_view bytes);

void write_prices_csv(std::ostream& os, const Pipeline& p);
void write_solution_csv(std::ostream& os, const Pipeline& p);
void write_policy_csv(std::ostream& os, const MarketModel& model, const std::vector<PolicySnapshot>& rows);
void write_sweep_csv(std::ostream& os, int M, const std::vector<SweepRow>& rows);
void write_mc_summary_csv(std::ostream& os, const SimulationSummary& s);
void write_check_csv(std::ostream& os, const std::vector<CheckItem>& items);

/// Runs one subcommand, writing its CSV and manifest.txt into out_dir.
/// Diagnostics go to `log`. Returns one of the kExit* codes.
int run_pipeline(Command command, const RunOptions& options, std::ostream& log);

}  // namespace robustcredit

#include "robustcredit/pipeline.hpp"

#include "robustcredit/errors.hpp"
#include "robustcredit/parallel.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#ifndef ROBUSTCREDIT_VERSION
#define ROBUSTCREDIT_VERSION "0.0.0"
#endif

namespace robustcredit {

namespace {

constexpr double kFocCheckTol = 1e-8;
constexpr double kDualCheckTol = 1e-8;
constexpr double kCrossMethodCheckTol = 1e-6;
constexpr double kTerminalCheckTol = 1e-10;
constexpr int kHessianStride = 50;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || !std::isfinite(v)) throw ValidationError(what + " is not a number: '" + s + "'");
    return v;
}

std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

std::vector<DefaultState> live_states(int M) {
    std::vector<DefaultState> out;
    for (auto z : enumerate_states(M)) {
        if (!z.all_defaulted(M)) out.push_back(z);
    }
    return out;
}

DefaultState parse_state(const std::optional<std::string>& bits, int M) {
    if (!bits) return DefaultState(0);
    if (static_cast<int>(bits->size()) != M) {
        throw ValidationError("state '" + *bits + "' must have one digit per obligor");
    }
    try {
        return DefaultState::from_bitstring(*bits);
    } catch (const SchemaError& e) {
        throw ValidationError(e.what());
    }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + path.string());
    os << contents;
    if (!os) throw ValidationError("failed writing " + path.string());
}

}  // namespace

std::string to_string(Command c) {
    switch (c) {
        case Command::price:
            return "price";
        case Command::solve:
            return "solve";
        case Command::policy:
            return "policy";
        case Command::simulate:
            return "simulate";
        case Command::sweep:
            return "sweep";
        case Command::check:
            return "check";
    }
    return "unknown";
}

Command parse_command(const std::string& name) {
    for (auto c : {Command::price, Command::solve, Command::policy, Command::simulate, Command::sweep, Command::check}) {
        if (to_string(c) == name) return c;
    }
    throw ValidationError("unknown command '" + name + "'");
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Pipeline build_pipeline(const MarketModel& model, int grid_steps, SolveMethod method, int threads) {
    if (grid_steps < 1) throw ValidationError("grid steps must be at least 1");
    auto grid = make_grid(model, grid_steps);
    auto prices = solve_prices(model, grid, threads);
    auto solution = solve_all(model, grid, method, {}, threads);
    return {model, std::move(grid), std::move(prices), std::move(solution)};
}

std::vector<PolicySnapshot> policy_table(const Pipeline& p, int threads) {
    const auto states = live_states(p.model.M());
    std::vector<std::vector<PolicySnapshot>> per_state(states.size());
    parallel_for(states.size(), threads, [&](std::size_t s) {
        for (int k = 0; k <= p.grid.steps(); ++k) {
            per_state[s].push_back(optimal_feedback(p.solution, p.prices, p.model, p.grid.node(k), states[s]));
        }
    });
    std::vector<PolicySnapshot> out;
    for (auto& v : per_state) out.insert(out.end(), v.begin(), v.end());
    return out;
}

std::vector<double> parse_values(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ValidationError("values must look like lo:hi:count, got '" + text + "'");
    const double lo = parse_double(parts[0], "sweep lower end");
    const double hi = parse_double(parts[1], "sweep upper end");
    char* end = nullptr;
    const long count = std::strtol(parts[2].c_str(), &end, 10);
    if (parts[2].empty() || *end != '\0' || count < 1 || count > 100000) {
        throw ValidationError("sweep count must be an integer in [1, 100000], got '" + parts[2] + "'");
    }
    if (count == 1) return {lo};
    std::vector<double> out(static_cast<std::size_t>(count));
    for (long n = 0; n < count; ++n) {
        out[static_cast<std::size_t>(n)] = n == count - 1 ? hi : lo + (hi - lo) * static_cast<double>(n) / static_cast<double>(count - 1);
    }
    return out;
}

MarketModel apply_parameter(const MarketModel& base, const std::string& param, double value,
                            std::optional<double> tie_risk_neutral) {
    auto in = base.inputs();
    const auto parts = split(param, '.');
    if (parts.size() == 1 && (param == "r" || param == "gamma")) {
        if (tie_risk_neutral) throw ValidationError("a risk-neutral tie only applies to reference intensities");
        (param == "r" ? in.r : in.gamma) = value;
        return MarketModel(std::move(in));
    }
    if (parts.size() != 3) {
        throw ValidationError("parameter path '" + param + "' must be <family>.<state>.<obligor>, r or gamma");
    }
    StateTimeFunction* target = nullptr;
    if (parts[0] == "reference") target = &in.h_ref;
    if (parts[0] == "risk_neutral") target = &in.h_rn;
    if (parts[0] == "penalty_mu") target = &in.mu;
    if (!target) throw ValidationError("unknown parameter family '" + parts[0] + "'");
    const DefaultState z = parse_state(parts[1], base.M());
    char* end = nullptr;
    const long obligor = std::strtol(parts[2].c_str(), &end, 10);
    if (parts[2].empty() || *end != '\0' || obligor < 1 || obligor > base.M()) {
        throw ValidationError("obligor in '" + param + "' must be between 1 and " + std::to_string(base.M()));
    }
    const int i = static_cast<int>(obligor - 1);
    if (z.defaulted(i)) throw ValidationError("obligor " + parts[2] + " has already defaulted in state " + parts[1]);
    target->set(i, z, PiecewiseConstant::constant(value));
    if (tie_risk_neutral) {
        if (parts[0] != "reference") throw ValidationError("a risk-neutral tie only applies to reference intensities");
        in.h_rn.set(i, z, PiecewiseConstant::constant(*tie_risk_neutral * value));
    }
    return MarketModel(std::move(in));
}

bool prices_independent_of(const std::string& param, std::optional<double> tie_risk_neutral) {
    if (tie_risk_neutral) return false;
    return param.rfind("reference.", 0) == 0 || param.rfind("penalty_mu.", 0) == 0;
}

std::vector<SweepRow> run_sweep(const MarketModel& base, const SweepSpec& spec, int grid_steps,
                                SolveMethod method, int threads) {
    if (spec.values.empty()) throw ValidationError("a sweep needs at least one value");
    if (spec.z.mask() >= (1u << base.M())) throw ValidationError("observation state has too many obligors");
    if (!(spec.t >= 0.0 && spec.t <= base.T())) throw ValidationError("observation time must lie in [0, T]");
    // Validate the path once so a typo fails the whole command.
    (void)apply_parameter(base, spec.param, spec.values.front(), spec.tie_risk_neutral);

    const bool reuse = spec.reuse_prices && prices_independent_of(spec.param, spec.tie_risk_neutral);
    std::optional<PriceTable> shared;
    TimeGrid shared_grid;
    if (reuse) {
        shared_grid = make_grid(base, grid_steps);
        shared = solve_prices(base, shared_grid, threads);
    }

    const int M = base.M();
    std::vector<SweepRow> rows(spec.values.size());
    parallel_for(rows.size(), threads, [&](std::size_t n) {
        SweepRow& row = rows[n];
        row.value = spec.values[n];
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.pi_star.assign(static_cast<std::size_t>(M), nan);
        row.gamma_star.assign(static_cast<std::size_t>(M), nan);
        row.theta_star.assign(static_cast<std::size_t>(M), nan);
        row.worst_case_intensity.assign(static_cast<std::size_t>(M), nan);
        row.B = nan;
        row.money_market_fraction = nan;
        try {
            const auto model = apply_parameter(base, spec.param, row.value, spec.tie_risk_neutral);
            const auto grid = make_grid(model, grid_steps);
            const bool can_reuse = reuse && std::equal(grid.nodes().begin(), grid.nodes().end(),
                                                       shared_grid.nodes().begin(), shared_grid.nodes().end());
            const PriceTable prices = can_reuse ? *shared : solve_prices(model, grid);
            const auto solution = solve_all(model, grid, method);
            const auto snap = optimal_feedback(solution, prices, model, spec.t, spec.z);
            row.B = solution.value(spec.z, spec.t);
            row.money_market_fraction = snap.money_market_fraction;
            row.pi_star = snap.pi_star;
            row.gamma_star = snap.gamma_star;
            row.theta_star = snap.theta_star;
            row.worst_case_intensity = snap.worst_case_intensity;
        } catch (const NumericalError& e) {
            row.status = std::string("numerical_error: ") + e.what();
        } catch (const Error& e) {
            row.status = std::string("invalid: ") + e.what();
        }
    });
    return rows;
}

std::vector<CheckItem> run_check_suite(const Pipeline& p, int threads) {
    const auto& m = p.model;
    const int M = m.M();
    std::vector<CheckItem> items;
    auto add = [&](std::string name, bool passed, double value, double threshold, std::string detail = {}) {
        items.push_back({std::move(name), passed, value, threshold, std::move(detail)});
    };

    add("price_cross_method", p.prices.max_method_gap() <= kPriceCrossCheckTol, p.prices.max_method_gap(),
        kPriceCrossCheckTol);

    const auto rank = check_assumption_a1(p.prices, p.grid);
    double min_sv = std::numeric_limits<double>::infinity();
    for (const auto& s : rank.states) min_sv = std::min(min_sv, s.min_singular_value);
    add("jump_matrix_rank", rank.clean(), min_sv, RankReport::kThreshold,
        std::to_string(rank.flags.size()) + " flagged nodes");

    const DefaultState terminal((1u << M) - 1u);
    double terminal_gap = 0.0;
    for (int k = 0; k <= p.grid.steps(); ++k) {
        const double t = p.grid.node(k);
        terminal_gap = std::max(terminal_gap, std::abs(p.solution.B(terminal).value(k) -
                                                       std::exp(m.gamma() * m.r() * (m.T() - t))));
    }
    add("terminal_closed_form", terminal_gap <= kTerminalCheckTol, terminal_gap, kTerminalCheckTol);

    double slack = std::numeric_limits<double>::infinity();
    double min_B = std::numeric_limits<double>::infinity();
    long clamp_hits = 0;
    for (auto z : enumerate_states(M)) {
        const auto& st = p.solution.state(z);
        min_B = std::min(min_B, st.B.min());
        clamp_hits += st.clamp_hits;
        if (z == terminal) continue;
        slack = std::min({slack, st.B.min() - st.bounds.lower, st.bounds.upper - st.B.max()});
    }
    add("bounds_sandwich", slack >= 0.0, slack, 0.0, "smallest distance to a bound");
    add("truncation_inactive", clamp_hits == 0, static_cast<double>(clamp_hits), 0.0);
    add("positivity", min_B > 0.0, min_B, 0.0);
    if (p.solution.method() == SolveMethod::both) {
        add("hjb_cross_method", p.solution.max_cross_gap() <= kCrossMethodCheckTol, p.solution.max_cross_gap(),
            kCrossMethodCheckTol);
    } else {
        add("hjb_cross_method", true, 0.0, kCrossMethodCheckTol, "skipped: single method");
    }

    double foc = 0.0;
    double dual = 0.0;
    double identity = 0.0;
    double min_lift = std::numeric_limits<double>::infinity();
    double max_eig = -std::numeric_limits<double>::infinity();
    std::string failure;
    try {
        const auto snaps = policy_table(p, threads);
        for (const auto& s : snaps) {
            foc = std::max(foc, s.foc_residual);
            const double B = p.solution.value(s.z, s.t);
            for (int j : s.z.alive_obligors(M)) {
                const auto sj = static_cast<std::size_t>(j);
                const double Bj = p.solution.value(s.z.with_default(j), s.t);
                const double lift = 1.0 + s.gamma_star[sj];
                min_lift = std::min(min_lift, lift);
                const double h = m.h_rn(j, s.z)(s.t);
                const double hp = m.h_ref(j, s.z)(s.t);
                const double target = B * h / (Bj * hp);
                const double X = std::pow(lift, m.gamma() - 1.0);
                identity = std::max(identity, std::abs(s.theta_star[sj] * X - target) / target);
                if (!m.no_uncertainty()) {
                    const double mu = m.mu(j, s.z)(s.t);
                    const double exp_form = std::exp(-mu * (Bj * std::pow(lift, m.gamma()) - B));
                    const double closed = target / X;
                    dual = std::max(dual, std::abs(exp_form - closed) / std::max(1.0, exp_form));
                }
            }
        }
        for (auto z : live_states(M)) {
            for (int k = 0; k <= p.grid.steps(); k += kHessianStride) {
                const double t = p.grid.node(k);
                const auto snap = optimal_feedback(p.solution, p.prices, m, t, z);
                std::vector<double> pi;
                for (int j : z.alive_obligors(M)) pi.push_back(snap.pi_star[static_cast<std::size_t>(j)]);
                max_eig = std::max(max_eig, hessian_check(p.prices, p.solution, m, t, z, pi).max_eigenvalue);
            }
        }
    } catch (const NumericalError& e) {
        failure = e.what();
    }
    if (!failure.empty()) {
        add("policy_evaluation", false, 0.0, 0.0, failure);
        return items;
    }
    add("foc_residual", foc <= kFocCheckTol, foc, kFocCheckTol);
    add("dual_worst_case", dual <= kDualCheckTol, dual, kDualCheckTol);
    add("exposure_identity", identity <= kDualCheckTol, identity, kDualCheckTol);
    add("admissible_exposure", min_lift > 0.0, min_lift, 0.0, "smallest 1 + Gamma");
    add("hessian_negative_definite", max_eig < 0.0, max_eig, 0.0);
    return items;
}

void write_prices_csv(std::ostream& os, const Pipeline& p) {
    const int M = p.model.M();
    os << "t,state_bitstring,obligor,F_value\n";
    for (auto z : enumerate_states(M)) {
        for (int i : z.alive_obligors(M)) {
            for (int k = 0; k <= p.grid.steps(); ++k) {
                os << format_number(p.grid.node(k)) << ',' << z.bitstring(M) << ',' << i + 1 << ','
                   << format_number(p.prices.at_node(i, z, k)) << '\n';
            }
        }
    }
}

void write_solution_csv(std::ostream& os, const Pipeline& p) {
    const int M = p.model.M();
    const std::string method = to_string(p.solution.method());
    os << "t,state_bitstring,B_value,theta_lower,theta_upper,method,fp_iterations\n";
    for (auto z : enumerate_states(M)) {
        const auto& st = p.solution.state(z);
        for (int k = 0; k <= p.grid.steps(); ++k) {
            os << format_number(p.grid.node(k)) << ',' << z.bitstring(M) << ',' << format_number(st.B.value(k)) << ','
               << format_number(st.bounds.lower) << ',' << format_number(st.bounds.upper) << ',' << method << ','
               << st.fp_iterations << '\n';
        }
    }
}

void write_policy_csv(std::ostream& os, const MarketModel& model, const std::vector<PolicySnapshot>& rows) {
    const int M = model.M();
    os << "t,state,obligor,pi_star,gamma_star,theta_star,worst_case_intensity,foc_residual\n";
    for (const auto& s : rows) {
        for (int j : s.z.alive_obligors(M)) {
            const auto sj = static_cast<std::size_t>(j);
            os << format_number(s.t) << ',' << s.z.bitstring(M) << ',' << j + 1 << ',' << format_number(s.pi_star[sj])
               << ',' << format_number(s.gamma_star[sj]) << ',' << format_number(s.theta_star[sj]) << ','
               << format_number(s.worst_case_intensity[sj]) << ',' << format_number(s.foc_residual) << '\n';
        }
    }
}

void write_sweep_csv(std::ostream& os, int M, const std::vector<SweepRow>& rows) {
    os << "value,status,B,money_market_fraction";
    for (int i = 1; i <= M; ++i) {
        os << ",pi_star_" << i << ",gamma_star_" << i << ",theta_star_" << i << ",worst_case_intensity_" << i;
    }
    os << '\n';
    for (const auto& r : rows) {
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        os << format_number(r.value) << ',' << status << ',' << format_number(r.B) << ','
           << format_number(r.money_market_fraction);
        for (std::size_t i = 0; i < static_cast<std::size_t>(M); ++i) {
            os << ',' << format_number(r.pi_star[i]) << ',' << format_number(r.gamma_star[i]) << ','
               << format_number(r.theta_star[i]) << ',' << format_number(r.worst_case_intensity[i]);
        }
        os << '\n';
    }
}

void write_mc_summary_csv(std::ostream& os, const SimulationSummary& s) {
    os << "estimator,mean,se,target,z_score\n";
    auto row = [&](const std::string& name, const Estimate& e, std::optional<double> target) {
        os << name << ',' << format_number(e.mean) << ',' << format_number(e.std_error) << ',';
        if (target) os << format_number(*target) << ',' << format_number(e.z_score(*target));
        else os << ',';
        os << '\n';
    };
    row("objective", s.objective, s.target);
    row("terminal_utility", s.terminal_utility, std::nullopt);
    row("penalty", s.penalty, std::nullopt);
    row("entropy", s.entropy, std::nullopt);
    row("density", s.eta, std::nullopt);
    for (std::size_t j = 0; j < s.compensators.size(); ++j) {
        for (std::size_t c = 0; c < s.checkpoints.size(); ++c) {
            row("compensator_" + std::to_string(j + 1) + "@" + format_number(s.checkpoints[c]), s.compensators[j][c], 0.0);
        }
    }
}

void write_check_csv(std::ostream& os, const std::vector<CheckItem>& items) {
    os << "check,status,value,threshold,detail\n";
    for (const auto& c : items) {
        std::string detail = c.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        os << c.name << ',' << (c.passed ? "pass" : "fail") << ',' << format_number(c.value) << ','
           << format_number(c.threshold) << ',' << detail << '\n';
    }
}

int run_pipeline(Command command, const RunOptions& o, std::ostream& log) {
    try {
        const std::string config_text = read_text_file(o.config_path);
        const auto model = load_model(config_text);
        for (const auto& w : model.warnings()) log << "warning: " << w << '\n';
        const int steps = o.grid_steps.value_or(model.grid_steps());
        if (steps < 1) throw ValidationError("grid steps must be at least 1");
        const int threads = std::max(1, o.threads);

        std::ostringstream manifest;
        manifest << "tool robustcredit " << ROBUSTCREDIT_VERSION << '\n'
                 << "command " << to_string(command) << '\n'
                 << "config " << o.config_path << '\n'
                 << "config_fnv1a64 " << hex64(fnv1a64(config_text)) << '\n'
                 << "obligors " << model.M() << '\n'
                 << "grid_steps " << steps << '\n'
                 << "method " << to_string(o.method) << '\n';

        std::filesystem::create_directories(o.out_dir);
        const std::filesystem::path out(o.out_dir);
        std::vector<std::string> outputs;
        int code = kExitOk;

        auto emit = [&](const std::string& name, const std::string& body) {
            write_file(out / name, body);
            outputs.push_back(name);
        };

        switch (command) {
            case Command::price: {
                const auto grid = make_grid(model, steps);
                Pipeline p{model, grid, solve_prices(model, grid, threads), {}};
                manifest << "grid_nodes " << grid.nodes().size() << '\n'
                         << "price_method_gap " << format_number(p.prices.max_method_gap()) << '\n';
                std::ostringstream csv;
                write_prices_csv(csv, p);
                emit("prices.csv", csv.str());
                break;
            }
            case Command::solve: {
                const auto grid = make_grid(model, steps);
                Pipeline p{model, grid, {}, solve_all(model, grid, o.method, {}, threads)};
                manifest << "grid_nodes " << grid.nodes().size() << '\n'
                         << "hjb_cross_gap " << format_number(p.solution.max_cross_gap()) << '\n';
                std::ostringstream csv;
                write_solution_csv(csv, p);
                emit("solution.csv", csv.str());
                break;
            }
            case Command::policy: {
                const auto p = build_pipeline(model, steps, o.method, threads);
                manifest << "grid_nodes " << p.grid.nodes().size() << '\n';
                std::ostringstream csv;
                write_policy_csv(csv, model, policy_table(p, threads));
                emit("policy.csv", csv.str());
                break;
            }
            case Command::simulate: {
                SimConfig sim;
                sim.paths = o.paths;
                sim.seed = o.seed;
                sim.measure = o.measure;
                sim.v0 = o.v0;
                sim.z0 = parse_state(o.state, model.M());
                sim.t0 = o.t0;
                sim.threads = threads;
                const auto p = build_pipeline(model, steps, o.method, threads);
                const auto policy = optimal_policy_grid(p.solution, p.prices, model, threads);
                const auto summary = simulate_paths(model, p.solution, policy, sim);
                manifest << "grid_nodes " << p.grid.nodes().size() << '\n'
                         << "paths " << sim.paths << '\n'
                         << "seed " << sim.seed << '\n'
                         << "measure " << to_string(sim.measure) << '\n'
                         << "v0 " << format_number(sim.v0) << '\n'
                         << "state " << sim.z0.bitstring(model.M()) << '\n'
                         << "t0 " << format_number(sim.t0) << '\n';
                std::ostringstream csv;
                write_mc_summary_csv(csv, summary);
                emit("mc_summary.csv", csv.str());
                break;
            }
            case Command::sweep: {
                if (o.param.empty()) throw ValidationError("sweep needs --param");
                if (o.values.empty()) throw ValidationError("sweep needs --values");
                SweepSpec spec;
                spec.param = o.param;
                spec.values = parse_values(o.values);
                spec.tie_risk_neutral = o.tie_risk_neutral;
                spec.z = parse_state(o.state, model.M());
                spec.t = o.t0;
                const auto rows = run_sweep(model, spec, steps, o.method, threads);
                long failed = 0;
                for (const auto& r : rows) {
                    if (r.status != "ok") {
                        ++failed;
                        log << "sweep value " << format_number(r.value) << ": " << r.status << '\n';
                    }
                }
                manifest << "param " << spec.param << '\n'
                         << "values " << o.values << '\n'
                         << "state " << spec.z.bitstring(model.M()) << '\n'
                         << "t " << format_number(spec.t) << '\n';
                if (spec.tie_risk_neutral) manifest << "tie_risk_neutral " << format_number(*spec.tie_risk_neutral) << '\n';
                manifest << "failed_rows " << failed << '\n';
                std::ostringstream csv;
                write_sweep_csv(csv, model.M(), rows);
                emit("sweep.csv", csv.str());
                break;
            }
            case Command::check: {
                const auto p = build_pipeline(model, steps, o.method, threads);
                const auto items = run_check_suite(p, threads);
                bool ok = true;
                for (const auto& c : items) {
                    log << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << format_number(c.value)
                        << " threshold=" << format_number(c.threshold);
                    if (!c.detail.empty()) log << " (" << c.detail << ')';
                    log << '\n';
                    ok = ok && c.passed;
                }
                manifest << "grid_nodes " << p.grid.nodes().size() << '\n' << "check " << (ok ? "pass" : "fail") << '\n';
                std::ostringstream csv;
                write_check_csv(csv, items);
                emit("check.csv", csv.str());
                if (!ok) code = kExitCheckFailed;
                break;
            }
        }

        manifest << "eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n'
                 << "compiler " << __VERSION__ << '\n'
                 << "cxx_standard " << __cplusplus << '\n'
                 << "number_format %.17g\n";
        for (const auto& f : outputs) manifest << "output " << f << '\n';
        write_file(out / "manifest.txt", manifest.str());
        return code;
    } catch (const NumericalError& e) {
        log << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

}  // namespace robustcredit

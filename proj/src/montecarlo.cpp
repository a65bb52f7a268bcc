#include "robustcredit/montecarlo.hpp"

#include "robustcredit/errors.hpp"
#include "robustcredit/parallel.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace robustcredit {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr int kCheckpoints = 5;
constexpr double kMajorantFactor = 1.1;
constexpr std::size_t kBatch = 512;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

double entropy_density(double theta) { return theta * std::log(theta) - theta + 1.0; }

/// Everything a single path reports.
struct PathOutput {
    double utility = 0.0;
    double penalty = 0.0;
    double log_eta = 0.0;
    double entropy = 0.0;
    double min_wealth = 0.0;
    int defaults = 0;
    std::vector<double> compensators;  ///< [obligor * kCheckpoints + c]
};

/// Intensities and policy values of the alive obligors on one grid cell in
/// one state; tilts and exposures are linear in time across the cell.
struct CellView {
    int count = 0;
    double t_lo = 0.0;
    double inv_width = 0.0;
    std::array<int, kMaxObligors> j{};
    std::array<double, kMaxObligors> h{}, hp{}, mu{};
    std::array<double, kMaxObligors> g0{}, g1{};  ///< exposures at the cell ends
    std::array<double, kMaxObligors> s0{}, s1{};  ///< simulation-measure tilts
    std::array<double, kMaxObligors> e0{}, e1{};  ///< density-measure tilts

    [[nodiscard]] double weight(double t) const { return std::clamp((t - t_lo) * inv_width, 0.0, 1.0); }
    static double lerp(double a, double b, double w) { return a + (b - a) * w; }
    [[nodiscard]] double event_rate(double t) const {
        const double w = weight(t);
        double rate = 0.0;
        for (int a = 0; a < count; ++a) rate += lerp(s0[a], s1[a], w) * hp[a];
        return rate;
    }
};

/// Shared, read-only simulation setup.
class PathSimulator {
public:
    PathSimulator(const MarketModel& model, const PolicyGrid* policy, const TimeGrid& grid, const SimConfig& sim,
                  Measure eta_measure)
        : model_(model),
          policy_(policy),
          grid_(grid),
          sim_(sim),
          eta_measure_(eta_measure),
          M_(model.M()),
          gamma_(model.gamma()),
          same_measure_(eta_measure.kind == sim.measure.kind && eta_measure.tilt == sim.measure.tilt) {
        const double T = model.T();
        for (int c = 1; c <= kCheckpoints; ++c) {
            checkpoints_.push_back(c == kCheckpoints ? T : sim.t0 + (T - sim.t0) * c / kCheckpoints);
        }
        breaks_ = checkpoints_;
        for (double t : grid.nodes()) {
            if (t > sim.t0) breaks_.push_back(t);
        }
        std::sort(breaks_.begin(), breaks_.end());
        breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());
    }

    [[nodiscard]] const std::vector<double>& checkpoints() const { return checkpoints_; }

    [[nodiscard]] PathOutput run(std::uint64_t path) const {
        SplitMixStream rng(sim_.seed, path);
        PathOutput out;
        out.compensators.assign(static_cast<std::size_t>(M_ * kCheckpoints), 0.0);
        std::vector<double> cumulative(static_cast<std::size_t>(M_), 0.0);

        DefaultState z = sim_.z0;
        double log_v = std::log(sim_.v0);
        out.min_wealth = sim_.v0;
        double a = sim_.t0;
        std::size_t next_check = 0;
        CellView view;
        int view_k = -1;
        DefaultState view_z;

        for (double b : breaks_) {
            const int k = grid_.cell(a);
            double s = a;
            while (s < b) {
                if (k != view_k || !(z == view_z)) {
                    fill_view(view, z, k);
                    view_k = k;
                    view_z = z;
                }
                const double end = next_event(rng, view, s, b);
                integrate(view, s, end, log_v, out, cumulative);
                if (end < b) {
                    const int a_idx = pick_obligor(rng, view, end);
                    const int j = view.j[static_cast<std::size_t>(a_idx)];
                    const double w = view.weight(end);
                    log_v += std::log1p(CellView::lerp(view.g0[a_idx], view.g1[a_idx], w));
                    out.log_eta += std::log(CellView::lerp(view.e0[a_idx], view.e1[a_idx], w));
                    out.min_wealth = std::min(out.min_wealth, std::exp(log_v));
                    cumulative[static_cast<std::size_t>(j)] -= 1.0;
                    z = z.with_default(j);
                    ++out.defaults;
                }
                s = end;
            }
            while (next_check < checkpoints_.size() && checkpoints_[next_check] <= b) {
                for (int j = 0; j < M_; ++j) {
                    if (sim_.z0.defaulted(j)) continue;
                    out.compensators[static_cast<std::size_t>(j * kCheckpoints) + next_check] =
                        -cumulative[static_cast<std::size_t>(j)];
                }
                ++next_check;
            }
            a = b;
        }
        out.utility = std::exp(gamma_ * log_v) / gamma_;
        return out;
    }

private:
    [[nodiscard]] double tilt_at(const Measure& m, DefaultState z, int k, int j) const {
        switch (m.kind) {
            case MeasureKind::reference:
                return 1.0;
            case MeasureKind::custom:
                return m.tilt;
            case MeasureKind::worst_case:
                return policy_->tilt(z, k, j);
        }
        return 1.0;
    }

    void fill_view(CellView& v, DefaultState z, int k) const {
        const double tk = grid_.node(k);
        v.t_lo = tk;
        v.inv_width = 1.0 / (grid_.node(k + 1) - tk);
        v.count = 0;
        for (int j = 0; j < M_; ++j) {
            if (z.defaulted(j)) continue;
            const auto a = static_cast<std::size_t>(v.count++);
            v.j[a] = j;
            v.h[a] = model_.h_rn(j, z)(tk);
            v.hp[a] = model_.h_ref(j, z)(tk);
            v.mu[a] = model_.mu(j, z)(tk);
            v.g0[a] = policy_ ? policy_->exposure(z, k, j) : 0.0;
            v.g1[a] = policy_ ? policy_->exposure(z, k + 1, j) : 0.0;
            v.s0[a] = tilt_at(sim_.measure, z, k, j);
            v.s1[a] = tilt_at(sim_.measure, z, k + 1, j);
            v.e0[a] = tilt_at(eta_measure_, z, k, j);
            v.e1[a] = tilt_at(eta_measure_, z, k + 1, j);
        }
    }

    /// Time of the next accepted event in [s, b), or b if none.
    static double next_event(SplitMixStream& rng, const CellView& v, double s, double b) {
        if (v.count == 0) return b;
        const double bound = kMajorantFactor * std::max(v.event_rate(s), v.event_rate(b));
        if (!(bound > 0.0)) return b;
        double t = s;
        while (true) {
            t -= std::log(rng.next_uniform()) / bound;
            if (t >= b) return b;
            if (rng.next_uniform() * bound <= v.event_rate(t)) return t;
        }
    }

    static int pick_obligor(SplitMixStream& rng, const CellView& v, double t) {
        const double w = v.weight(t);
        const double u = rng.next_uniform() * v.event_rate(t);
        double acc = 0.0;
        for (int a = 0; a < v.count; ++a) {
            acc += CellView::lerp(v.s0[a], v.s1[a], w) * v.hp[a];
            if (u < acc) return a;
        }
        return v.count - 1;
    }

    /// Advances wealth and the running integrals over [a, b] with no event.
    void integrate(const CellView& v, double a, double b, double& log_v, PathOutput& out,
                   std::vector<double>& cumulative) const {
        const double dt = b - a;
        if (!(dt > 0.0)) return;
        const double wa = v.weight(a);
        const double wm = v.weight(0.5 * (a + b));
        const double wb = v.weight(b);
        double drift_half = model_.r();
        double drift_full = model_.r();
        double pen[3] = {0.0, 0.0, 0.0};
        double ent[3] = {0.0, 0.0, 0.0};
        double eta_drag = 0.0;
        for (int i = 0; i < v.count; ++i) {
            const double ga = CellView::lerp(v.g0[i], v.g1[i], wa);
            const double gm = CellView::lerp(v.g0[i], v.g1[i], wm);
            const double gb = CellView::lerp(v.g0[i], v.g1[i], wb);
            drift_half -= v.h[i] * 0.5 * (ga + gm);
            drift_full -= v.h[i] * 0.5 * (ga + gb);
            const double sa = CellView::lerp(v.s0[i], v.s1[i], wa);
            const double sm = CellView::lerp(v.s0[i], v.s1[i], wm);
            const double sb = CellView::lerp(v.s0[i], v.s1[i], wb);
            cumulative[static_cast<std::size_t>(v.j[i])] += dt * v.hp[i] * 0.5 * (sa + sb);
            const double phi_s[3] = {entropy_density(sa), entropy_density(sm), entropy_density(sb)};
            double phi_e[3] = {phi_s[0], phi_s[1], phi_s[2]};
            double ea = sa;
            double eb = sb;
            if (!same_measure_) {
                ea = CellView::lerp(v.e0[i], v.e1[i], wa);
                eb = CellView::lerp(v.e0[i], v.e1[i], wb);
                phi_e[0] = entropy_density(ea);
                phi_e[1] = entropy_density(CellView::lerp(v.e0[i], v.e1[i], wm));
                phi_e[2] = entropy_density(eb);
            }
            eta_drag += dt * v.hp[i] * (0.5 * (ea + eb) - 1.0);
            for (int q = 0; q < 3; ++q) {
                pen[q] += phi_s[q] * v.hp[i] / v.mu[i];
                ent[q] += phi_e[q] * v.hp[i];
            }
        }
        const double log_b = log_v + dt * drift_full;
        if (pen[0] != 0.0 || pen[1] != 0.0 || pen[2] != 0.0) {
            const double u_a = std::exp(gamma_ * log_v) / gamma_;
            const double u_m = std::exp(gamma_ * (log_v + 0.5 * dt * drift_half)) / gamma_;
            const double u_b = std::exp(gamma_ * log_b) / gamma_;
            out.penalty += dt / 6.0 * (pen[0] * u_a + 4.0 * pen[1] * u_m + pen[2] * u_b);
        }
        out.entropy += dt / 6.0 * (ent[0] + 4.0 * ent[1] + ent[2]);
        out.log_eta -= eta_drag;
        if (drift_full < 0.0) out.min_wealth = std::min(out.min_wealth, std::exp(log_b));
        log_v = log_b;
    }

    const MarketModel& model_;
    const PolicyGrid* policy_;
    const TimeGrid& grid_;
    SimConfig sim_;
    Measure eta_measure_;
    int M_;
    double gamma_;
    bool same_measure_;
    std::vector<double> checkpoints_;
    std::vector<double> breaks_;
};

void validate(const MarketModel& model, const SimConfig& sim, const PolicyGrid* policy) {
    if (sim.paths < 1) throw ValidationError("path count must be at least 1");
    if (!(sim.v0 > 0.0) || !std::isfinite(sim.v0)) throw ValidationError("initial wealth must be positive");
    if (!(sim.t0 >= 0.0 && sim.t0 < model.T())) throw ValidationError("start time must lie in [0, T)");
    if (sim.z0.mask() >= (1u << model.M())) throw ValidationError("initial state has too many obligors");
    if (sim.measure.kind == MeasureKind::custom && !(sim.measure.tilt > 0.0 && std::isfinite(sim.measure.tilt))) {
        throw ValidationError("custom tilt must be positive");
    }
    if (sim.measure.kind == MeasureKind::worst_case && !policy) {
        throw ValidationError("the worst-case measure needs a policy table");
    }
    if (policy && policy->M() != model.M()) throw ValidationError("policy table does not match the model");
}

std::vector<PathOutput> run_paths(const PathSimulator& sim_core, long paths, int threads) {
    std::vector<PathOutput> out(static_cast<std::size_t>(paths));
    const std::size_t n = out.size();
    const std::size_t batches = (n + kBatch - 1) / kBatch;
    parallel_for(batches, threads, [&](std::size_t b) {
        const std::size_t lo = b * kBatch;
        const std::size_t hi = std::min(n, lo + kBatch);
        for (std::size_t p = lo; p < hi; ++p) out[p] = sim_core.run(p);
    });
    return out;
}

template <class F>
Estimate collect(const std::vector<PathOutput>& paths, F&& field) {
    std::vector<double> v(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) v[i] = field(paths[i]);
    return estimate(v);
}

std::vector<std::vector<Estimate>> collect_compensators(const std::vector<PathOutput>& paths, int M) {
    std::vector<std::vector<Estimate>> out(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        for (int c = 0; c < kCheckpoints; ++c) {
            const auto idx = static_cast<std::size_t>(j * kCheckpoints + c);
            out[static_cast<std::size_t>(j)].push_back(collect(paths, [&](const PathOutput& p) { return p.compensators[idx]; }));
        }
    }
    return out;
}

}  // namespace

SplitMixStream::SplitMixStream(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t SplitMixStream::next_u64() { return mix64(key_ + kGolden * ++counter_); }

double SplitMixStream::next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t parse_seed(const std::string& text) {
    if (text.empty() || text.front() == '-' || text.front() == '+' || std::isspace(static_cast<unsigned char>(text.front()))) {
        throw SeedError("seed must be a non-negative 64-bit integer: '" + text + "'");
    }
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 0);
    if (errno == ERANGE || end == text.c_str() || *end != '\0') {
        throw SeedError("seed must be a non-negative 64-bit integer: '" + text + "'");
    }
    return static_cast<std::uint64_t>(v);
}

Measure parse_measure(const std::string& text) {
    if (text == "reference") return {MeasureKind::reference, 1.0};
    if (text == "worst" || text == "worst_case") return {MeasureKind::worst_case, 1.0};
    const std::string prefix = "custom:";
    if (text.rfind(prefix, 0) == 0) {
        const std::string value = text.substr(prefix.size());
        char* end = nullptr;
        const double tilt = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0' || !(tilt > 0.0) || !std::isfinite(tilt)) {
            throw ValidationError("custom tilt must be a positive number: '" + value + "'");
        }
        return {MeasureKind::custom, tilt};
    }
    throw ValidationError("unknown measure '" + text + "' (expected reference, worst or custom:<theta>)");
}

std::string to_string(const Measure& m) {
    switch (m.kind) {
        case MeasureKind::reference:
            return "reference";
        case MeasureKind::worst_case:
            return "worst";
        case MeasureKind::custom: {
            std::ostringstream os;
            os.precision(17);
            os << "custom:" << m.tilt;
            return os.str();
        }
    }
    return "unknown";
}

double Estimate::z_score(double target) const {
    const double d = mean - target;
    if (d == 0.0) return 0.0;
    return std_error > 0.0 ? d / std_error : std::copysign(INFINITY, d);
}

bool Estimate::within(double target, double n_se) const {
    return std::abs(mean - target) <= n_se * std_error;
}

Estimate estimate(const std::vector<double>& samples) {
    Estimate e;
    e.count = static_cast<long>(samples.size());
    if (samples.empty()) return e;
    const auto n = static_cast<double>(samples.size());
    e.mean = pairwise_sum(samples.data(), samples.size()) / n;
    if (samples.size() > 1) {
        std::vector<double> sq(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) sq[i] = (samples[i] - e.mean) * (samples[i] - e.mean);
        e.variance = pairwise_sum(sq.data(), sq.size()) / (n - 1.0);
        e.std_error = std::sqrt(e.variance / n);
    }
    return e;
}

SimulationSummary simulate_paths(const MarketModel& model, const SolutionTable& solution,
                                 const PolicyGrid& policy, const SimConfig& sim) {
    validate(model, sim, &policy);
    const PathSimulator core(model, &policy, policy.grid(), sim, sim.measure);
    const auto paths = run_paths(core, sim.paths, sim.threads);

    SimulationSummary s;
    s.objective = collect(paths, [](const PathOutput& p) { return p.utility + p.penalty; });
    s.terminal_utility = collect(paths, [](const PathOutput& p) { return p.utility; });
    s.penalty = collect(paths, [](const PathOutput& p) { return p.penalty; });
    s.eta = collect(paths, [](const PathOutput& p) { return std::exp(p.log_eta); });
    s.entropy = collect(paths, [](const PathOutput& p) { return p.entropy; });
    s.target = std::pow(sim.v0, model.gamma()) / model.gamma() * solution.value(sim.z0, sim.t0);
    s.min_wealth = sim.v0;
    double defaults = 0.0;
    for (const auto& p : paths) {
        s.min_wealth = std::min(s.min_wealth, p.min_wealth);
        defaults += p.defaults;
    }
    s.mean_defaults = defaults / static_cast<double>(paths.size());
    s.checkpoints = core.checkpoints();
    s.compensators = collect_compensators(paths, model.M());
    return s;
}

MartingaleReport martingale_diagnostics(const MarketModel& model, SimConfig sim, double tilt) {
    sim.measure = {MeasureKind::reference, 1.0};
    validate(model, sim, nullptr);
    if (!(tilt > 0.0)) throw ValidationError("tilt must be positive");
    const auto grid = make_grid(model, model.grid_steps());
    const PathSimulator core(model, nullptr, grid, sim, {MeasureKind::custom, tilt});
    const auto paths = run_paths(core, sim.paths, sim.threads);

    MartingaleReport r;
    r.tilt = tilt;
    r.checkpoints = core.checkpoints();
    r.compensators = collect_compensators(paths, model.M());
    r.eta = collect(paths, [](const PathOutput& p) { return std::exp(p.log_eta); });
    for (int j = 0; j < model.M(); ++j) {
        if (sim.z0.defaulted(j)) continue;
        for (std::size_t c = 0; c < r.checkpoints.size(); ++c) {
            const auto& e = r.compensators[static_cast<std::size_t>(j)][c];
            if (!e.within(0.0, 3.0)) {
                std::ostringstream os;
                os << "compensated default of obligor " << j + 1 << " at t=" << r.checkpoints[c]
                   << " has mean " << e.mean << " (z=" << e.z_score(0.0) << ")";
                r.flags.push_back(os.str());
            }
        }
    }
    if (!r.eta.within(1.0, 3.0)) {
        std::ostringstream os;
        os << "density mean " << r.eta.mean << " (z=" << r.eta.z_score(1.0) << ")";
        r.flags.push_back(os.str());
    }
    return r;
}

EntropyReport entropy_estimate(const MarketModel& model, const SimConfig& sim) {
    validate(model, sim, nullptr);
    if (sim.measure.kind != MeasureKind::custom) {
        throw ValidationError("entropy estimation needs a custom constant tilt");
    }
    const auto grid = make_grid(model, model.grid_steps());
    const PathSimulator core(model, nullptr, grid, sim, sim.measure);
    const auto paths = run_paths(core, sim.paths, sim.threads);

    EntropyReport r;
    r.direct = collect(paths, [](const PathOutput& p) { return p.entropy; });
    r.log_eta = collect(paths, [](const PathOutput& p) { return p.log_eta; });
    r.difference = collect(paths, [](const PathOutput& p) { return p.entropy - p.log_eta; });
    return r;
}

}  // namespace robustcredit

#include <robustcredit/errors.hpp>
#include <robustcredit/parallel.hpp>
#include <robustcredit/pipeline.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace robustcredit;

namespace {

struct RawFlags {
    std::string config;
    std::string out = ".";
    int grid_steps = 2000;
    std::string method = "both";
    long paths = 10000;
    std::string seed = "20240611";
    std::string measure = "worst";
    double v0 = 1.0;
    std::string state;
    double t0 = 0.0;
    std::string param;
    std::string values;
    double tie = 0.0;
};

void add_common(CLI::App* cmd, RawFlags& f) {
    cmd->add_option("--config", f.config, "Model configuration (JSON)")->required();
    cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
    cmd->add_option("--grid-steps", f.grid_steps, "Uniform steps on [0, T]")->capture_default_str();
    cmd->add_option("--method", f.method, "HJB solver: direct, fixed or both")
        ->check(CLI::IsMember({"direct", "fixed", "both"}))
        ->capture_default_str();
    cmd->add_option("--state", f.state, "Default state as a bitstring, obligor 1 first");
    cmd->add_option("--t0", f.t0, "Start or observation time")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust credit portfolio solver"};
    app.set_version_flag("--version", std::string(ROBUSTCREDIT_VERSION));
    app.require_subcommand(1);

    RawFlags f;
    const std::map<std::string, std::pair<Command, std::string>> commands = {
        {"price", {Command::price, "Pre-default bond prices on the horizon grid"}},
        {"solve", {Command::solve, "Value-function components for every default state"}},
        {"policy", {Command::policy, "Optimal fractions, exposures and worst-case tilts"}},
        {"simulate", {Command::simulate, "Monte Carlo check of the value function"}},
        {"sweep", {Command::sweep, "Comparative statics over one parameter"}},
        {"check", {Command::check, "Full invariant suite; exit 3 on failure"}},
    };
    std::map<std::string, CLI::App*> subs;
    std::map<std::string, CLI::Option*> ties;
    for (const auto& [name, entry] : commands) {
        auto* cmd = app.add_subcommand(name, entry.second);
        add_common(cmd, f);
        subs[name] = cmd;
        if (name == "simulate") {
            cmd->add_option("--paths", f.paths, "Number of simulated paths")->capture_default_str();
            cmd->add_option("--seed", f.seed, "64-bit seed")->capture_default_str();
            cmd->add_option("--measure", f.measure, "reference, worst or custom:<theta>")->capture_default_str();
            cmd->add_option("--v0", f.v0, "Initial wealth")->capture_default_str();
        }
        if (name == "sweep") {
            cmd->add_option("--param", f.param, "Parameter path, e.g. penalty_mu.00.1")->required();
            cmd->add_option("--values", f.values, "lo:hi:count")->required();
            ties[name] = cmd->add_option("--tie-risk-neutral", f.tie,
                                         "Also set the matching risk-neutral intensity to this multiple");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    RunOptions o;
    Command command = Command::check;
    CLI::App* chosen = nullptr;
    for (const auto& [name, cmd] : subs) {
        if (cmd->parsed()) {
            command = commands.at(name).first;
            chosen = cmd;
        }
    }
    try {
        o.config_path = f.config;
        o.out_dir = f.out;
        if (chosen->count("--grid-steps") > 0) o.grid_steps = f.grid_steps;
        o.method = parse_solve_method(f.method);
        o.paths = f.paths;
        o.seed = parse_seed(f.seed);
        o.measure = parse_measure(f.measure);
        o.v0 = f.v0;
        if (!f.state.empty()) o.state = f.state;
        o.t0 = f.t0;
        o.param = f.param;
        o.values = f.values;
        if (command == Command::sweep && ties.at("sweep")->count() > 0) o.tie_risk_neutral = f.tie;
        o.threads = worker_count();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return run_pipeline(command, o, std::cerr);
}

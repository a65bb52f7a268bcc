#include "robustcredit/model.hpp"

#include "robustcredit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace robustcredit {

using nlohmann::json;

StateTimeFunction::StateTimeFunction(int M) : M_(M) {
    if (M < 1 || M > kMaxObligors) {
        throw CapacityError("obligor count " + std::to_string(M) + " outside [1, " +
                            std::to_string(kMaxObligors) + "]");
    }
    table_.resize((std::size_t{1} << M) * static_cast<std::size_t>(M));
}

std::size_t StateTimeFunction::slot(int obligor, DefaultState z) const {
    if (obligor < 0 || obligor >= M_ || z.mask() >= (1u << M_)) {
        throw DomainError("obligor/state pair out of range");
    }
    return static_cast<std::size_t>(z.mask()) * static_cast<std::size_t>(M_) +
           static_cast<std::size_t>(obligor);
}

bool StateTimeFunction::has(int obligor, DefaultState z) const {
    return table_[slot(obligor, z)].has_value();
}

const PiecewiseConstant& StateTimeFunction::at(int obligor, DefaultState z) const {
    const auto& f = table_[slot(obligor, z)];
    if (!f) {
        throw DomainError("no function for obligor " + std::to_string(obligor + 1) +
                          " in state " + z.bitstring(M_));
    }
    return *f;
}

void StateTimeFunction::set(int obligor, DefaultState z, PiecewiseConstant f) {
    table_[slot(obligor, z)] = std::move(f);
}

namespace {

void validate_family(const StateTimeFunction& fam, const char* name, int M, double horizon) {
    if (fam.obligors() != M) {
        throw SchemaError(std::string(name) + " table has the wrong obligor count");
    }
    for (std::uint32_t mask = 0; mask < (1u << M); ++mask) {
        const DefaultState z(mask);
        for (int i = 0; i < M; ++i) {
            if (z.defaulted(i)) {
                if (fam.has(i, z)) {
                    throw ValidationError(std::string(name) + " given for defaulted obligor " +
                                          std::to_string(i + 1) + " in state " + z.bitstring(M));
                }
                continue;
            }
            if (!fam.has(i, z)) {
                throw SchemaError(std::string(name) + " missing for obligor " +
                                  std::to_string(i + 1) + " in state " + z.bitstring(M));
            }
            const auto& f = fam.at(i, z);
            for (double v : f.levels()) {
                if (!(v > 0.0) || !std::isfinite(v)) {
                    throw ValidationError(std::string(name) + " must be positive (obligor " +
                                          std::to_string(i + 1) + ", state " + z.bitstring(M) + ")");
                }
            }
            if (f.knots().back() >= horizon) {
                throw ValidationError(std::string(name) + " has a knot beyond the last maturity");
            }
        }
    }
}

}  // namespace

MarketModel::MarketModel(Inputs inputs) : in_(std::move(inputs)) {
    if (in_.M < 1 || in_.M > kMaxObligors) {
        throw CapacityError("obligor count " + std::to_string(in_.M) + " outside [1, " +
                            std::to_string(kMaxObligors) + "]");
    }
    if (static_cast<int>(in_.obligors.size()) != in_.M) {
        throw SchemaError("expected " + std::to_string(in_.M) + " obligors, got " +
                          std::to_string(in_.obligors.size()));
    }
    if (!(in_.gamma > 0.0 && in_.gamma < 1.0)) throw ValidationError("gamma must lie in (0, 1)");
    if (!(in_.r >= 0.0) || !std::isfinite(in_.r)) throw ValidationError("r must be nonnegative");
    if (!(in_.T > 0.0) || !std::isfinite(in_.T)) throw ValidationError("horizon T must be positive");
    if (in_.grid_steps < 1) throw ValidationError("grid_steps must be at least 1");
    for (int i = 0; i < in_.M; ++i) {
        const auto& ob = obligor(i);
        const std::string tag = "obligor " + std::to_string(i + 1);
        if (!(ob.maturity > in_.T) || !std::isfinite(ob.maturity)) {
            throw ValidationError(tag + ": horizon T must be below the maturity");
        }
        if (!(ob.recovery >= 0.0 && ob.recovery < 1.0)) {
            throw ValidationError(tag + ": recovery must lie in [0, 1)");
        }
        if (!(ob.coupon >= 0.0) || !std::isfinite(ob.coupon)) {
            throw ValidationError(tag + ": coupon must be nonnegative");
        }
        if (ob.coupon < in_.r * ob.recovery) {
            warnings_.push_back(tag + ": coupon below r * recovery, prices may fall below recovery");
        }
    }
    const double horizon = max_maturity();
    validate_family(in_.h_ref, "reference intensity", in_.M, horizon);
    validate_family(in_.h_rn, "risk-neutral intensity", in_.M, horizon);
    validate_family(in_.mu, "penalty weight", in_.M, horizon);
    for (std::uint32_t mask = 0; mask < (1u << in_.M); ++mask) {
        const DefaultState z(mask);
        for (int i = 0; i < in_.M; ++i) {
            if (z.alive(i)) {
                in_.mu.set(i, z, in_.mu.at(i, z).map_levels([](double v) {
                    return std::max(v, kMuFloor);
                }));
            }
        }
    }
}

double MarketModel::max_maturity() const {
    double m = 0.0;
    for (const auto& ob : in_.obligors) m = std::max(m, ob.maturity);
    return m;
}

double MarketModel::total_h_rn(double t, DefaultState z) const {
    double s = 0.0;
    for (int i = 0; i < in_.M; ++i) {
        if (z.alive(i)) s += h_rn(i, z)(t);
    }
    return s;
}

std::vector<double> MarketModel::all_knots() const {
    std::vector<double> knots{0.0};
    for (std::uint32_t mask = 0; mask < (1u << in_.M); ++mask) {
        const DefaultState z(mask);
        for (int i = 0; i < in_.M; ++i) {
            if (z.defaulted(i)) continue;
            for (const auto* fam : {&in_.h_ref, &in_.h_rn, &in_.mu}) {
                const auto k = fam->at(i, z).knots();
                knots.insert(knots.end(), k.begin(), k.end());
            }
        }
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    return knots;
}

TimeGrid make_grid(const MarketModel& model, int steps) {
    const TimeGrid base = TimeGrid::uniform(model.T(), steps);
    std::vector<double> nodes(base.nodes().begin(), base.nodes().end());
    const double snap = 1e-12 * std::max(1.0, model.T());
    for (double k : model.all_knots()) {
        if (k <= 0.0 || k >= model.T()) continue;
        const auto it = std::lower_bound(nodes.begin(), nodes.end(), k);
        const bool near_next = it != nodes.end() && *it - k <= snap;
        const bool near_prev = it != nodes.begin() && k - *(it - 1) <= snap;
        if (!near_next && !near_prev) nodes.insert(it, k);
    }
    return TimeGrid::from_nodes(std::move(nodes));
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw SchemaError("missing field '" + std::string(key) + "' in " + where);
    }
    return obj.at(key);
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw SchemaError(where + " must be a number");
    return v.get<double>();
}

PiecewiseConstant value_or_knots(const json& v, const std::string& where) {
    if (v.is_number()) return PiecewiseConstant::constant(v.get<double>());
    if (!v.is_object()) throw SchemaError(where + " must be a number or {knots, values}");
    const auto& knots = require(v, "knots", where);
    const auto& values = require(v, "values", where);
    if (!knots.is_array() || !values.is_array()) {
        throw SchemaError(where + ": knots and values must be arrays");
    }
    std::vector<double> k;
    std::vector<double> vals;
    for (const auto& e : knots) k.push_back(number(e, where + " knot"));
    for (const auto& e : values) vals.push_back(number(e, where + " value"));
    return {std::move(k), std::move(vals)};
}

int obligor_key(const std::string& key, int M, const std::string& where) {
    int idx = 0;
    std::size_t used = 0;
    try {
        idx = std::stoi(key, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != key.size() || idx < 1 || idx > M) {
        throw SchemaError(where + ": bad obligor key '" + key + "'");
    }
    return idx - 1;
}

StateTimeFunction parse_family(const json& spec, int M, const std::string& name) {
    StateTimeFunction fam(M);
    if (spec.is_number()) {
        const auto f = PiecewiseConstant::constant(spec.get<double>());
        for (std::uint32_t mask = 0; mask < (1u << M); ++mask) {
            for (int i = 0; i < M; ++i) {
                if (DefaultState(mask).alive(i)) fam.set(i, DefaultState(mask), f);
            }
        }
        return fam;
    }
    if (!spec.is_object()) throw SchemaError(name + " must be an object");
    if (spec.contains("per_state")) {
        const auto& per_state = spec.at("per_state");
        if (!per_state.is_object()) throw SchemaError(name + ".per_state must be an object");
        for (const auto& [bits, entries] : per_state.items()) {
            if (bits.size() != static_cast<std::size_t>(M)) {
                throw SchemaError(name + ": state '" + bits + "' must have " +
                                  std::to_string(M) + " digits");
            }
            const auto z = DefaultState::from_bitstring(bits);
            if (!entries.is_object()) throw SchemaError(name + "." + bits + " must be an object");
            for (const auto& [key, value] : entries.items()) {
                const std::string where = name + "." + bits + "." + key;
                const int i = obligor_key(key, M, where);
                if (z.defaulted(i)) {
                    throw ValidationError(where + ": obligor has already defaulted in this state");
                }
                fam.set(i, z, value_or_knots(value, where));
            }
        }
        return fam;
    }
    if (spec.contains("base")) {
        const auto& base = spec.at("base");
        const auto& mult = require(spec, "contagion_multiplier", name);
        if (!base.is_array() || base.size() != static_cast<std::size_t>(M)) {
            throw SchemaError(name + ".base must list one entry per obligor");
        }
        if (!mult.is_array() || mult.size() != static_cast<std::size_t>(M)) {
            throw SchemaError(name + ".contagion_multiplier must be an M x M array");
        }
        std::vector<std::vector<double>> c(static_cast<std::size_t>(M));
        for (int i = 0; i < M; ++i) {
            const auto& row = mult.at(static_cast<std::size_t>(i));
            if (!row.is_array() || row.size() != static_cast<std::size_t>(M)) {
                throw SchemaError(name + ".contagion_multiplier must be an M x M array");
            }
            for (const auto& e : row) c[static_cast<std::size_t>(i)].push_back(number(e, name + " multiplier"));
        }
        for (int i = 0; i < M; ++i) {
            const auto b = value_or_knots(base.at(static_cast<std::size_t>(i)),
                                          name + ".base[" + std::to_string(i) + "]");
            for (std::uint32_t mask = 0; mask < (1u << M); ++mask) {
                const DefaultState z(mask);
                if (z.defaulted(i)) continue;
                double factor = 1.0;
                for (int j = 0; j < M; ++j) {
                    if (z.defaulted(j)) factor *= c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                }
                fam.set(i, z, b.scaled(factor));
            }
        }
        return fam;
    }
    throw SchemaError(name + " needs 'per_state' or 'base' + 'contagion_multiplier'");
}

}  // namespace

MarketModel load_model(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("configuration is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("configuration must be a JSON object");

    MarketModel::Inputs in;
    const auto& m = require(doc, "M", "configuration");
    if (!m.is_number_integer()) throw SchemaError("M must be an integer");
    in.M = m.get<int>();
    if (in.M < 1 || in.M > kMaxObligors) {
        throw CapacityError("obligor count " + std::to_string(in.M) + " outside [1, " +
                            std::to_string(kMaxObligors) + "]");
    }
    in.r = number(require(doc, "r", "configuration"), "r");
    in.gamma = number(require(doc, "gamma", "configuration"), "gamma");
    in.T = number(require(doc, "T", "configuration"), "T");
    if (doc.contains("grid_steps")) {
        if (!doc.at("grid_steps").is_number_integer()) throw SchemaError("grid_steps must be an integer");
        in.grid_steps = doc.at("grid_steps").get<int>();
    }
    if (doc.contains("no_uncertainty")) {
        if (!doc.at("no_uncertainty").is_boolean()) throw SchemaError("no_uncertainty must be a boolean");
        in.no_uncertainty = doc.at("no_uncertainty").get<bool>();
    }

    const auto& obligors = require(doc, "obligors", "configuration");
    if (!obligors.is_array()) throw SchemaError("obligors must be an array");
    for (std::size_t k = 0; k < obligors.size(); ++k) {
        const std::string where = "obligors[" + std::to_string(k) + "]";
        const auto& o = obligors[k];
        ObligorSpec spec;
        spec.maturity = number(require(o, "maturity", where), where + ".maturity");
        spec.coupon = number(require(o, "coupon", where), where + ".coupon");
        const bool has_r = o.is_object() && o.contains("recovery");
        const bool has_l = o.is_object() && o.contains("loss");
        if (has_r == has_l) throw SchemaError(where + " needs exactly one of 'recovery' or 'loss'");
        spec.recovery = has_r ? number(o.at("recovery"), where + ".recovery")
                              : 1.0 - number(o.at("loss"), where + ".loss");
        in.obligors.push_back(spec);
    }

    const auto& intens = require(doc, "intensities", "configuration");
    in.h_ref = parse_family(require(intens, "reference", "intensities"), in.M, "reference");
    in.h_rn = parse_family(require(intens, "risk_neutral", "intensities"), in.M, "risk_neutral");
    in.mu = parse_family(require(intens, "penalty_mu", "intensities"), in.M, "penalty_mu");
    return MarketModel(std::move(in));
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

MarketModel load_model_file(const std::filesystem::path& path) {
    return load_model(read_text_file(path));
}

}  // namespace robustcredit

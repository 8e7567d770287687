#include "qfb/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace qfb {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string type_name(const json& v) {
    if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
    return v.type_name();
}

// Checked access to one JSON object; `path` is the dotted field prefix used
// in error messages.
class Section {
public:
    Section(const json& obj, std::string path, std::set<std::string> known)
        : obj_(obj), path_(std::move(path)), known_(std::move(known)) {
        if (!obj_.is_object()) throw ConfigError(where("") + "expected an object, got " + type_name(obj_));
        for (const auto& [key, value] : obj_.items()) {
            (void)value;
            if (!known_.count(key)) throw ConfigError(where(key) + "unknown field");
        }
    }

    bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

    const json& at(const std::string& key) const {
        if (!obj_.contains(key)) throw ConfigError(where(key) + "missing required field");
        return obj_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where(const std::string& key) const {
        return (key.empty() ? (path_.empty() ? std::string("config") : path_) : field(key)) + ": ";
    }

    double number(const std::string& key) const { return as_number(at(key), field(key)); }
    double number(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    long long integer(const std::string& key) const { return as_integer(at(key), field(key)); }
    long long integer(const std::string& key, long long fallback) const {
        return has(key) ? integer(key) : fallback;
    }
    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_boolean()) throw ConfigError(where(key) + "expected a boolean, got " + type_name(v));
        return v.get<bool>();
    }
    std::string string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError(where(key) + "expected a string, got " + type_name(v));
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) const {
        return has(key) ? string(key) : fallback;
    }

    static double as_number(const json& v, const std::string& name) {
        if (!v.is_number()) throw ConfigError(name + ": expected a number, got " + type_name(v));
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(name + ": must be finite");
        return d;
    }
    static long long as_integer(const json& v, const std::string& name) {
        if (v.is_number_unsigned()) {
            const auto u = v.get<std::uint64_t>();
            if (u > static_cast<std::uint64_t>(std::numeric_limits<long long>::max())) {
                throw ConfigError(name + ": integer out of range");
            }
            return static_cast<long long>(u);
        }
        if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer, got " + type_name(v));
        return v.get<long long>();
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> known_;
};

Vec3 read_vec3(const json& v, const std::string& name) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(name + ": expected an array of 3 numbers");
    Vec3 out{};
    for (int k = 0; k < 3; ++k) {
        out[k] = Section::as_number(v[k], name + "[" + std::to_string(k) + "]");
    }
    return out;
}

int checked_int(long long v, const std::string& name, long long lo) {
    if (v < lo || v > std::numeric_limits<int>::max()) {
        throw ConfigError(name + ": must be an integer >= " + std::to_string(lo));
    }
    return static_cast<int>(v);
}

SimParams read_params(const json& j) {
    const Section s(j, "params", {"n_atoms", "G", "g", "A", "B", "eta", "dt", "t_final", "seed"});
    SimParams p;
    p.n_atoms = checked_int(s.integer("n_atoms"), "params.n_atoms", 1);
    p.G = s.number("G");
    p.g = s.number("g", 0.0);
    p.A = s.number("A");
    p.B = s.number("B");
    p.eta = s.number("eta");
    p.dt = s.number("dt");
    p.t_final = s.number("t_final");
    if (s.has("seed")) {
        const json& v = s.at("seed");
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ConfigError("params.seed: expected a nonnegative integer");
        }
        p.seed = v.get<std::uint64_t>();
    }
    return p;
}

ControlLaw read_law(const json& j) {
    const Section s(j, "law", {"xi", "beta", "saturation"});
    ControlLaw law;
    if (s.has("xi")) law.xi = read_vec3(s.at("xi"), "law.xi");
    if (s.has("beta")) {
        const json& b = s.at("beta");
        if (!b.is_array() || b.size() != 3) throw ConfigError("law.beta: expected a 3x3 array");
        for (int k = 0; k < 3; ++k) {
            law.beta[k] = read_vec3(b[k], "law.beta[" + std::to_string(k) + "]");
        }
    }
    if (s.has("saturation")) law.saturation = s.number("saturation");
    try {
        validate_law(law);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("law: ") + e.what());
    }
    return law;
}

InitialStateSpec read_initial(const json& j) {
    const Section s(j, "initial_state", {"kind", "theta", "phi", "k", "amplitudes"});
    InitialStateSpec spec;
    const std::string kind = s.string("kind");
    auto only = [&](std::set<std::string> allowed) {
        for (const char* key : {"theta", "phi", "k", "amplitudes"}) {
            if (s.has(key) && !allowed.count(key)) {
                throw ConfigError("initial_state." + std::string(key) + ": not used by kind \"" +
                                  kind + "\"");
            }
        }
    };
    if (kind == "coherent") {
        only({"theta", "phi"});
        spec.kind = InitialStateSpec::Kind::Coherent;
        spec.theta = s.number("theta", spec.theta);
        spec.phi = s.number("phi", spec.phi);
    } else if (kind == "dicke") {
        only({"k"});
        spec.kind = InitialStateSpec::Kind::Dicke;
        spec.k = checked_int(s.integer("k"), "initial_state.k", 0);
    } else if (kind == "superposition") {
        only({"amplitudes"});
        spec.kind = InitialStateSpec::Kind::Superposition;
        const json& a = s.at("amplitudes");
        if (!a.is_array() || a.empty()) {
            throw ConfigError("initial_state.amplitudes: expected a nonempty array of [re, im] pairs");
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::string name = "initial_state.amplitudes[" + std::to_string(i) + "]";
            if (!a[i].is_array() || a[i].size() != 2) throw ConfigError(name + ": expected [re, im]");
            spec.amplitudes.emplace_back(Section::as_number(a[i][0], name + "[0]"),
                                         Section::as_number(a[i][1], name + "[1]"));
        }
    } else {
        throw ConfigError("initial_state.kind: expected \"coherent\", \"dicke\" or \"superposition\", got \"" +
                          kind + "\"");
    }
    return spec;
}

LawEntry read_entry(const json& v, const std::string& name) {
    if (!v.is_string()) throw ConfigError(name + ": expected a string such as \"beta_xz\"");
    try {
        return law_entry_from_string(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(name + ": " + e.what());
    }
}

SweepSection read_sweep(const json& j) {
    const Section s(j, "sweep", {"entry", "grid", "repetitions"});
    SweepSection out;
    out.entry = read_entry(s.at("entry"), "sweep.entry");
    const json& g = s.at("grid");
    if (!g.is_array()) throw ConfigError("sweep.grid: expected an array of numbers");
    for (std::size_t i = 0; i < g.size(); ++i) {
        out.grid.push_back(Section::as_number(g[i], "sweep.grid[" + std::to_string(i) + "]"));
    }
    if (out.grid.empty()) throw ConfigError("sweep.grid: must not be empty");
    for (std::size_t i = 1; i < out.grid.size(); ++i) {
        if (!(out.grid[i] > out.grid[i - 1])) {
            throw ConfigError("sweep.grid: must be strictly increasing");
        }
    }
    out.repetitions = checked_int(s.integer("repetitions", out.repetitions), "sweep.repetitions", 1);
    return out;
}

TuneSection read_tune(const json& j) {
    const Section s(j, "tune", {"search_space", "budget", "method", "grid_points", "repetitions"});
    TuneSection out;
    const json& space = s.at("search_space");
    if (!space.is_object() || space.empty()) {
        throw ConfigError("tune.search_space: expected a nonempty object {\"beta_xz\": [lo, hi], ...}");
    }
    for (const auto& [key, range] : space.items()) {
        const std::string name = "tune.search_space." + key;
        TuneBound b;
        b.entry = read_entry(json(key), name);
        if (!range.is_array() || range.size() != 2) throw ConfigError(name + ": expected [lo, hi]");
        b.lo = Section::as_number(range[0], name + "[0]");
        b.hi = Section::as_number(range[1], name + "[1]");
        if (!(b.lo < b.hi)) throw ConfigError(name + ": lo must be below hi");
        out.search_space.push_back(b);
    }
    out.budget = checked_int(s.integer("budget", out.budget), "tune.budget", 1);
    if (s.has("method")) {
        try {
            out.method = tune_method_from_string(s.string("method"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("tune.method: ") + e.what());
        }
    }
    out.grid_points = checked_int(s.integer("grid_points", out.grid_points), "tune.grid_points", 2);
    out.repetitions = checked_int(s.integer("repetitions", out.repetitions), "tune.repetitions", 1);
    return out;
}

CompareSection read_compare(const json& j) {
    const Section s(j, "compare", {"n_traj", "horizon", "threshold"});
    CompareSection out;
    out.n_traj = checked_int(s.integer("n_traj", out.n_traj), "compare.n_traj", 1);
    out.horizon = s.number("horizon", out.horizon);
    if (!(out.horizon > 0.0)) throw ConfigError("compare.horizon: must be positive");
    out.threshold = s.number("threshold", out.threshold);
    if (!(out.threshold > 0.0)) throw ConfigError("compare.threshold: must be positive");
    return out;
}

CollapseSection read_collapse(const json& j) {
    const Section s(j, "collapse", {"n_traj"});
    CollapseSection out;
    out.n_traj = checked_int(s.integer("n_traj", out.n_traj), "collapse.n_traj", 1);
    return out;
}

// 1-based line and column of a byte offset.
std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

RunConfig read_config(const json& doc) {
    const Section s(doc, "",
                    {"params", "engine", "law", "target", "output_dir", "sample_stride",
                     "initconds_literal_paper", "decouple_B", "feedback_delay_steps", "sme_scheme",
                     "psd_check_stride", "steady_window", "initial_state", "sweep", "tune", "compare",
                     "collapse", "provenance"});
    RunConfig cfg;
    cfg.params = read_params(s.at("params"));
    cfg.params.decouple_B = s.boolean("decouple_B", false);

    if (s.has("engine")) {
        try {
            cfg.engine = engine_from_string(s.string("engine"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("engine: ") + e.what());
        }
    }
    if (s.has("law")) cfg.law = read_law(s.at("law"));
    if (s.has("target")) {
        cfg.target = TargetSpec{read_vec3(s.at("target"), "target")};
        try {
            validate_target(*cfg.target);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("target: ") + e.what());
        }
    }
    cfg.output_dir = s.string("output_dir", cfg.output_dir);
    if (cfg.output_dir.empty()) throw ConfigError("output_dir: must not be empty");

    auto& o = cfg.options;
    o.sample_stride = checked_int(s.integer("sample_stride", 1), "sample_stride", 1);
    o.initconds_literal_paper = s.boolean("initconds_literal_paper", false);
    o.feedback_delay_steps = checked_int(s.integer("feedback_delay_steps", 0), "feedback_delay_steps", 0);
    o.psd_check_stride = checked_int(s.integer("psd_check_stride", 1), "psd_check_stride", 0);
    if (s.has("sme_scheme")) {
        try {
            o.sme_scheme = sme_scheme_from_string(s.string("sme_scheme"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("sme_scheme: ") + e.what());
        }
    }
    o.target = cfg.target;

    cfg.steady_window = s.number("steady_window", cfg.steady_window);
    if (!(cfg.steady_window > 0.0)) throw ConfigError("steady_window: must be positive");

    if (s.has("initial_state")) cfg.initial = read_initial(s.at("initial_state"));
    if (cfg.engine == Engine::Moment && !cfg.initial.is_default()) {
        throw ConfigError("initial_state: the moment engine always starts x-polarized; use engine \"sme\"");
    }
    if (s.has("sweep")) cfg.sweep = read_sweep(s.at("sweep"));
    if (s.has("tune")) cfg.tune = read_tune(s.at("tune"));
    if (s.has("compare")) cfg.compare = read_compare(s.at("compare"));
    if (s.has("collapse")) cfg.collapse = read_collapse(s.at("collapse"));

    try {
        validate_params(cfg.params);
        step_count(cfg.params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    try {
        build_initial_state(cfg.initial, cfg.params.n_atoms);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("initial_state: ") + e.what());
    }
    return cfg;
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v[0], v[1], v[2]}); }

}  // namespace

bool InitialStateSpec::is_default() const {
    return kind == Kind::Coherent && theta == M_PI / 2.0 && phi == 0.0;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is one past the offending character
        const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string msg = e.what();
        // drop the library's own "[json.exception...] parse error at line L, column C: " prefix
        const auto pos = msg.find("parse error");
        const auto colon = pos == std::string::npos ? pos : msg.find(": ", pos);
        if (colon != std::string::npos) msg = msg.substr(colon + 2);
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
    }
    return read_config(doc);
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

ordered_json law_to_json(const ControlLaw& law) {
    ordered_json beta = ordered_json::array();
    for (const auto& row : law.beta) beta.push_back(vec_json(row));
    ordered_json j = {{"xi", vec_json(law.xi)}, {"beta", beta}};
    j["saturation"] = law.saturation ? ordered_json(*law.saturation) : ordered_json();
    return j;
}

ordered_json config_to_json(const RunConfig& cfg) {
    ordered_json j;
    const auto& p = cfg.params;
    j["params"] = {{"n_atoms", p.n_atoms}, {"G", p.G},     {"g", p.g},
                   {"A", p.A},             {"B", p.B},     {"eta", p.eta},
                   {"dt", p.dt},           {"t_final", p.t_final}, {"seed", p.seed}};
    j["engine"] = to_string(cfg.engine);
    if (cfg.law) j["law"] = law_to_json(*cfg.law);
    if (cfg.target) j["target"] = vec_json(cfg.target->bloch_target);
    j["output_dir"] = cfg.output_dir;
    j["sample_stride"] = cfg.options.sample_stride;
    j["initconds_literal_paper"] = cfg.options.initconds_literal_paper;
    j["decouple_B"] = p.decouple_B;
    j["feedback_delay_steps"] = cfg.options.feedback_delay_steps;
    j["sme_scheme"] = to_string(cfg.options.sme_scheme);
    j["psd_check_stride"] = cfg.options.psd_check_stride;
    j["steady_window"] = cfg.steady_window;

    const auto& init = cfg.initial;
    switch (init.kind) {
        case InitialStateSpec::Kind::Coherent:
            j["initial_state"] = {{"kind", "coherent"}, {"theta", init.theta}, {"phi", init.phi}};
            break;
        case InitialStateSpec::Kind::Dicke:
            j["initial_state"] = {{"kind", "dicke"}, {"k", init.k}};
            break;
        case InitialStateSpec::Kind::Superposition: {
            ordered_json amps = ordered_json::array();
            for (const auto& a : init.amplitudes) amps.push_back({a.real(), a.imag()});
            j["initial_state"] = {{"kind", "superposition"}, {"amplitudes", amps}};
            break;
        }
    }
    if (cfg.sweep) {
        j["sweep"] = {{"entry", cfg.sweep->entry.name()},
                      {"grid", cfg.sweep->grid},
                      {"repetitions", cfg.sweep->repetitions}};
    }
    if (cfg.tune) {
        ordered_json space = ordered_json::object();
        for (const auto& b : cfg.tune->search_space) space[b.entry.name()] = {b.lo, b.hi};
        j["tune"] = {{"search_space", space},
                     {"budget", cfg.tune->budget},
                     {"method", to_string(cfg.tune->method)},
                     {"grid_points", cfg.tune->grid_points},
                     {"repetitions", cfg.tune->repetitions}};
    }
    if (cfg.compare) {
        j["compare"] = {{"n_traj", cfg.compare->n_traj},
                        {"horizon", cfg.compare->horizon},
                        {"threshold", cfg.compare->threshold}};
    }
    if (cfg.collapse) j["collapse"] = {{"n_traj", cfg.collapse->n_traj}};
    return j;
}

PureState build_initial_state(const InitialStateSpec& spec, int n_atoms) {
    switch (spec.kind) {
        case InitialStateSpec::Kind::Coherent:
            return spin_coherent_state(n_atoms, spec.theta, spec.phi);
        case InitialStateSpec::Kind::Dicke:
            if (spec.k > n_atoms) {
                throw std::invalid_argument("Dicke index k = " + std::to_string(spec.k) +
                                            " exceeds n_atoms");
            }
            return dicke_state(n_atoms, spec.k);
        case InitialStateSpec::Kind::Superposition: {
            CVector a(static_cast<Eigen::Index>(spec.amplitudes.size()));
            for (std::size_t i = 0; i < spec.amplitudes.size(); ++i) {
                a[static_cast<Eigen::Index>(i)] = spec.amplitudes[i];
            }
            return make_pure_state(n_atoms, a);
        }
    }
    throw std::invalid_argument("unknown initial state kind");
}

}  // namespace qfb

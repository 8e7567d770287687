#include "qfb/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "qfb/artifacts.hpp"
#include "qfb/config.hpp"
#include "qfb/harness.hpp"
#include "qfb/moment_engine.hpp"
#include "qfb/sme.hpp"

#ifndef QFB_VERSION
#define QFB_VERSION "0.0.0"
#endif

namespace qfb {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct CliFailure : std::runtime_error {
    CliFailure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

struct Invocation {
    std::string config_path;
    std::string out_dir;
    std::string check_path;
    std::optional<std::uint64_t> seed;
    bool plot = false;
};

struct Context {
    std::string subcommand;
    RunConfig cfg;
    fs::path out_dir;
    std::optional<json> expectations;
    bool plot = false;
    std::vector<std::string> artifacts;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    void write(const std::string& name, const std::string& content) {
        const fs::path path = out_dir / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!(f << content) || !f.flush()) {
            throw CliFailure(kExitConfig, "cannot write " + path.string());
        }
        artifacts.push_back(name);
    }
};

struct Outcome {
    ordered_json results;
    int code = kExitOk;
};

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v[0], v[1], v[2]}); }

ordered_json moments_json(const MomentState& m) {
    return {{"sx", m.sx},           {"sy", m.sy},           {"sz", m.sz},
            {"sx2", m.sx2},         {"sy2", m.sy2},         {"sz2", m.sz2},
            {"re_xz", m.xz.real()}, {"im_xz", m.xz.imag()}, {"re_yz", m.yz.real()},
            {"im_yz", m.yz.imag()}, {"re_xy", m.xy.real()}, {"im_xy", m.xy.imag()}};
}

ordered_json steady_json(const SteadyState& s) {
    ordered_json j = {{"mean", vec_json(s.mean)},
                      {"sigma", vec_json(s.sigma)},
                      {"transient_end", s.transient_end},
                      {"fallback", s.fallback},
                      {"samples", s.samples}};
    if (s.negative_v_drift_fraction >= 0.0) {
        j["negative_v_drift_fraction"] = s.negative_v_drift_fraction;
    }
    return j;
}

ordered_json versions() {
    return {{"qfb", QFB_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                          "." + std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION},
            {"compiler", __VERSION__}};
}

ordered_json provenance(const Context& ctx) {
    const auto& p = ctx.cfg.params;
    return {{"seed", p.seed},
            {"tau0", p.G != 0.0 ? ordered_json(1.0 / p.G) : ordered_json()},
            {"subcommand", ctx.subcommand},
            {"versions", versions()},
            {"artifacts", ctx.artifacts}};
}

// Sign of a steady mean whose magnitude clears its spread; 0 otherwise.
int resolved_sign(double mean, double sigma) {
    if (std::abs(mean) <= sigma) return 0;
    return mean > 0 ? 1 : -1;
}

Outcome do_simulate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const int n = cfg.params.n_atoms;
    std::optional<DensityMatrix> init;
    if (cfg.engine == Engine::Sme) init = to_density(build_initial_state(cfg.initial, n));
    const TrajectoryRecord rec = run_trajectory(cfg.engine, cfg.params, cfg.law, cfg.options,
                                                nullptr, init ? &*init : nullptr);

    ctx.write("trajectory.csv", trajectory_csv(rec, cfg.params.seed));

    ordered_json r;
    r["engine"] = to_string(cfg.engine);
    r["samples"] = rec.size();
    r["final"] = moments_json(rec.moments.back());

    const std::size_t late = rec.size() - std::max<std::size_t>(1, rec.size() / 10);
    Vec3 late_max{};
    for (std::size_t i = late; i < rec.size(); ++i) {
        const Vec3 b = rec.moments[i].bloch();
        for (int k = 0; k < 3; ++k) late_max[k] = std::max(late_max[k], std::abs(b[k]));
    }
    r["late_max_abs"] = vec_json(late_max);

    try {
        const SteadyState s = steady_state_estimate(rec, cfg.steady_window);
        r["steady"] = steady_json(s);
        const std::size_t start = rec.size() - s.samples;
        MomentState avg;
        for (std::size_t i = start; i < rec.size(); ++i) avg += rec.moments[i];
        avg *= 1.0 / static_cast<double>(s.samples);
        r["steady_moments"] = moments_json(avg);
        r["steady_cross_abs"] = {{"xz", std::abs(avg.xz)}, {"yz", std::abs(avg.yz)},
                                 {"xy", std::abs(avg.xy)}};
        ordered_json signs = ordered_json::array();
        for (int k = 0; k < 3; ++k) signs.push_back(resolved_sign(s.mean[k], s.sigma[k]));
        r["steady_sign_pattern"] = signs;
    } catch (const std::invalid_argument& e) {
        r["steady"] = nullptr;
        r["steady_error"] = e.what();
    }
    r["table1_expectation"] =
        format_sign_pattern(cfg.law ? table1_expectation(*cfg.law) : std::nullopt);

    if (cfg.engine == Engine::Moment) {
        double res = 0.0, casimir = 0.0;
        const double c0 = static_cast<double>(n + 2) / n;
        for (std::size_t i = 0; i < rec.size(); ++i) {
            res = std::max(res, rec.commutator_residual[i]);
            casimir = std::max(casimir, std::abs(rec.moments[i].second_moment_sum() - c0));
        }
        r["max_commutator_residual"] = res;
        r["max_casimir_drift"] = casimir;
    } else {
        r["final_purity"] = rec.purity.back();
        r["final_variance_sz"] = rec.variance_sz.back();
    }

    if (ctx.plot) {
        Chart c{"First moments (" + to_string(cfg.engine) + " engine, N = " + std::to_string(n) + ")",
                "t", "<s>", {}, cfg.params.seed};
        const char* names[] = {"sx", "sy", "sz"};
        for (int k = 0; k < 3; ++k) {
            ChartSeries s{names[k], rec.times, {}};
            for (const auto& m : rec.moments) s.y.push_back(m.bloch()[k]);
            c.series.push_back(std::move(s));
        }
        ctx.write("trajectory.svg", render_svg(c));
    }
    return {r};
}

Outcome do_sweep(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (!cfg.sweep) throw CliFailure(kExitConfig, "sweep: missing required section");
    SweepSpec spec;
    spec.law_template = cfg.law.value_or(ControlLaw{});
    spec.swept = cfg.sweep->entry;
    spec.grid = cfg.sweep->grid;
    spec.repetitions = cfg.sweep->repetitions;
    spec.engine = cfg.engine;
    spec.steady_window = cfg.steady_window;
    spec.options = cfg.options;
    const auto points = run_sweep(spec, cfg.params);

    ctx.write("sweep.csv", sweep_csv(points, spec.swept, cfg.params.seed));

    ordered_json r;
    r["entry"] = spec.swept.name();
    r["repetitions"] = spec.repetitions;
    ordered_json pts = ordered_json::array();
    for (const auto& pt : points) {
        ControlLaw law = spec.law_template;
        spec.swept.set(law, pt.gain);
        ordered_json runs = ordered_json::array();
        for (const auto& m : pt.run_means) runs.push_back(vec_json(m));
        pts.push_back({{"gain", pt.gain},
                       {"mean", vec_json(pt.mean)},
                       {"sigma", vec_json(pt.sigma)},
                       {"table1_expectation", format_sign_pattern(table1_expectation(law))},
                       {"run_means", runs},
                       {"seeds", pt.seeds}});
    }
    r["points"] = pts;

    // Grid intervals across which each mean changes sign.
    ordered_json changes = ordered_json::object();
    ordered_json counts = ordered_json::object();
    const char* names[] = {"sx", "sy", "sz"};
    for (int k = 0; k < 3; ++k) {
        ordered_json list = ordered_json::array();
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i - 1].mean[k] * points[i].mean[k] < 0.0) {
                list.push_back({points[i - 1].gain, points[i].gain});
            }
        }
        counts[names[k]] = list.size();
        changes[names[k]] = list;
    }
    r["sign_changes"] = changes;
    r["sign_change_count"] = counts;

    if (ctx.plot) {
        Chart c{"Steady state vs " + spec.swept.name(), spec.swept.name(), "steady <s>", {},
                cfg.params.seed};
        for (int k = 0; k < 3; ++k) {
            ChartSeries s{std::string("mean_") + names[k], {}, {}};
            for (const auto& pt : points) {
                s.x.push_back(pt.gain);
                s.y.push_back(pt.mean[k]);
            }
            c.series.push_back(std::move(s));
        }
        ctx.write("sweep.svg", render_svg(c));
    }
    return {r};
}

Outcome do_tune(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (!cfg.tune) throw CliFailure(kExitConfig, "tune: missing required section");
    if (!cfg.target) throw CliFailure(kExitConfig, "target: required by tune");
    TuneSpec spec;
    spec.target = *cfg.target;
    spec.search_space = cfg.tune->search_space;
    spec.base_law = cfg.law.value_or(ControlLaw{});
    spec.budget = cfg.tune->budget;
    spec.method = cfg.tune->method;
    spec.grid_points = cfg.tune->grid_points;
    spec.repetitions = cfg.tune->repetitions;
    spec.engine = cfg.engine;
    spec.steady_window = cfg.steady_window;
    spec.options = cfg.options;
    const TuneResult res = tune_gains(spec, cfg.params);
    if (!res.found) *ctx.err << "warning: every tuning candidate aborted; no gains found\n";

    ordered_json r;
    ordered_json entries = ordered_json::object();
    for (const auto& b : spec.search_space) {
        entries[b.entry.name()] = res.found ? ordered_json(b.entry.get(res.law)) : ordered_json();
    }
    r["found"] = res.found;
    r["entries"] = entries;
    r["law"] = law_to_json(res.law);
    r["steady"] = res.found ? vec_json(res.steady) : ordered_json();
    r["residual"] = std::isfinite(res.residual) ? ordered_json(res.residual) : ordered_json();
    r["evaluations"] = res.evaluations;
    r["budget_exhausted"] = res.budget_exhausted;
    ordered_json hist = ordered_json::array();
    for (const auto& h : res.history) {
        hist.push_back({{"values", h.values},
                        {"residual", std::isfinite(h.residual) ? ordered_json(h.residual)
                                                               : ordered_json()},
                        {"steady", vec_json(h.steady)}});
    }
    r["history"] = hist;

    if (ctx.plot) {
        Chart c{"Tuning residual per evaluation", "evaluation", "V", {}, cfg.params.seed};
        ChartSeries s{"residual", {}, {}};
        for (std::size_t i = 0; i < res.history.size(); ++i) {
            s.x.push_back(static_cast<double>(i));
            s.y.push_back(res.history[i].residual);
        }
        c.series.push_back(std::move(s));
        ctx.write("tune.svg", render_svg(c));
    }
    return {r};
}

Outcome do_compare(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (!cfg.compare) throw CliFailure(kExitConfig, "compare: missing required section");
    const CompareReport rep =
        compare_engines(cfg.params, cfg.law, cfg.compare->n_traj, cfg.compare->horizon, cfg.options);

    ctx.write("compare.csv", compare_csv(rep, cfg.params.seed));

    auto finite = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(); };
    ordered_json r;
    r["n_traj"] = rep.n_traj;
    r["horizon"] = rep.horizon;
    r["threshold"] = cfg.compare->threshold;
    r["max_deviation"] = {finite(rep.max_deviation[0]), finite(rep.max_deviation[1]),
                          finite(rep.max_deviation[2])};
    r["max_deviation_all"] = finite(rep.max_deviation_all);
    r["within_threshold"] = rep.max_deviation_all < cfg.compare->threshold;
    r["max_commutator_residual"] = rep.max_commutator_residual;
    r["moment_aborts"] = rep.moment_aborts;
    r["seeds"] = rep.seeds;

    if (ctx.plot) {
        Chart c{"Ensemble means: SME vs moment closure", "t", "<s>", {}, cfg.params.seed};
        const char* names[] = {"sx", "sy", "sz"};
        for (int k = 0; k < 3; ++k) {
            ChartSeries s{std::string("sme ") + names[k], rep.times, {}};
            for (const auto& m : rep.mean_sme) s.y.push_back(m[k]);
            c.series.push_back(std::move(s));
        }
        for (int k = 0; k < 3 && !rep.mean_moment.empty(); ++k) {
            ChartSeries s{std::string("moment ") + names[k], rep.times, {}};
            for (const auto& m : rep.mean_moment) s.y.push_back(m[k]);
            c.series.push_back(std::move(s));
        }
        ctx.write("compare.svg", render_svg(c));
    }
    return {r};
}

Outcome do_collapse(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (!cfg.collapse) throw CliFailure(kExitConfig, "collapse: missing required section");
    if (cfg.law && !cfg.law->is_zero()) {
        throw CliFailure(kExitConfig, "law: collapse statistics are taken without feedback");
    }
    const PureState init = build_initial_state(cfg.initial, cfg.params.n_atoms);
    const CollapseReport rep = collapse_statistics(cfg.params, init, cfg.collapse->n_traj, cfg.options);

    ctx.write("collapse.csv", collapse_csv(rep, cfg.params.seed));

    ordered_json r;
    r["n_traj"] = rep.n_traj;
    r["collapse_time_scale"] = collapse_time_scale(cfg.params, init);
    r["histogram"] = rep.histogram;
    r["eigenvalues"] = rep.eigenvalues;
    r["born"] = rep.born;
    r["tv_distance"] = rep.tv_distance;
    r["uncollapsed"] = rep.uncollapsed;
    r["uncollapsed_fraction"] = rep.uncollapsed_fraction;
    r["failed"] = rep.failed;
    r["warnings"] = rep.warnings;
    r["seeds"] = rep.seeds;
    for (const auto& w : rep.warnings) *ctx.err << "warning: " << w << "\n";

    if (ctx.plot) {
        Chart c{"Collapse outcomes vs Born rule", "S^z eigenvalue", "probability", {}, cfg.params.seed};
        ChartSeries f{"frequency", rep.eigenvalues, {}}, b{"born", rep.eigenvalues, rep.born};
        const int collapsed = rep.n_traj - rep.uncollapsed;
        for (int h : rep.histogram) {
            f.y.push_back(collapsed > 0 ? static_cast<double>(h) / collapsed : 0.0);
        }
        c.series = {f, b};
        ctx.write("collapse.svg", render_svg(c));
    }
    Outcome o{r};
    if (rep.failed) {
        *ctx.err << "collapse failed: " << rep.uncollapsed << " of " << rep.n_traj
                 << " trajectories did not reach a Dicke state\n";
        o.code = kExitAbort;
    }
    return o;
}

Context prepare(const std::string& sub, const Invocation& inv, std::ostream& out, std::ostream& err) {
    Context ctx;
    ctx.subcommand = sub;
    ctx.out = &out;
    ctx.err = &err;
    ctx.plot = inv.plot;
    ctx.cfg = load_config_file(inv.config_path);
    if (inv.seed) ctx.cfg.params.seed = *inv.seed;
    if (!inv.out_dir.empty()) ctx.cfg.output_dir = inv.out_dir;
    if (!inv.check_path.empty()) {
        std::ifstream f(inv.check_path, std::ios::binary);
        if (!f) throw CliFailure(kExitConfig, inv.check_path + ": cannot open expectation file");
        try {
            ctx.expectations = json::parse(f);
            // Validate the shape now, before any simulation time is spent.
            evaluate_checks(ordered_json::object(), *ctx.expectations);
        } catch (const json::exception& e) {
            throw CliFailure(kExitConfig, inv.check_path + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw CliFailure(kExitConfig, inv.check_path + ": " + e.what());
        }
    }
    ctx.out_dir = ctx.cfg.output_dir;
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw CliFailure(kExitConfig, "cannot create output directory " + ctx.out_dir.string());
    return ctx;
}

int run(const std::string& sub, const Invocation& inv, std::ostream& out, std::ostream& err) {
    static const std::map<std::string, std::function<Outcome(Context&)>> kBodies = {
        {"simulate", do_simulate}, {"sweep", do_sweep},       {"tune", do_tune},
        {"compare", do_compare},   {"collapse", do_collapse}};
    try {
        Context ctx = prepare(sub, inv, out, err);
        const Outcome o = kBodies.at(sub)(ctx);

        const std::string report_name = sub == "simulate" ? "summary.json" : sub + ".json";
        ctx.artifacts.push_back(report_name);
        ctx.artifacts.push_back("metadata.json");
        ordered_json report = {{"provenance", provenance(ctx)}, {"results", o.results}};
        ordered_json meta = config_to_json(ctx.cfg);
        meta["provenance"] = provenance(ctx);
        ctx.artifacts.resize(ctx.artifacts.size() - 2);
        ctx.write(report_name, report.dump(2) + "\n");
        ctx.write("metadata.json", meta.dump(2) + "\n");
        out << sub << ": wrote " << ctx.out_dir.string() << " (seed " << ctx.cfg.params.seed << ")\n";

        if (o.code != kExitOk) return o.code;
        if (ctx.expectations) {
            bool all = true;
            for (const auto& c : evaluate_checks(report, *ctx.expectations)) {
                out << (c.passed ? "PASS " : "FAIL ") << c.pointer << ' ' << c.op << ' '
                    << format_double(c.expected) << " (actual " << format_double(c.actual)
                    << (c.message.empty() ? "" : ", " + c.message) << ")\n";
                all = all && c.passed;
            }
            if (!all) return kExitCheck;
        }
        return kExitOk;
    } catch (const CliFailure& e) {
        err << "error: " << e.what() << "\n";
        return e.code;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IntegratorAbort& e) {
        err << "numerical abort: " << e.what() << "\n";
        return kExitAbort;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Continuous-measurement feedback simulator for collective atomic spins", "qfb"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", QFB_VERSION);

    const std::vector<std::pair<std::string, std::string>> subs = {
        {"simulate", "Single closed-loop trajectory"},
        {"sweep", "Steady state as a function of one gain"},
        {"tune", "Search gains that steer the steady state to the target"},
        {"compare", "Moment closure against the SME on matched noise"},
        {"collapse", "Measurement collapse histogram against the Born rule"}};
    std::map<std::string, Invocation> inv;
    for (const auto& [name, desc] : subs) {
        auto* sc = app.add_subcommand(name, desc);
        Invocation& i = inv[name];
        sc->add_option("--config", i.config_path, "JSON run configuration")->required();
        sc->add_option("--out", i.out_dir, "Output directory (overrides output_dir)");
        sc->add_option("--seed", i.seed, "Master seed (overrides params.seed)");
        sc->add_flag("--plot", i.plot, "Also write an SVG chart");
        sc->add_option("--check", i.check_path, "Expectation file; exit 4 when a check fails");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }
    for (const auto& [name, desc] : subs) {
        (void)desc;
        if (app.got_subcommand(name)) return run(name, inv[name], out, err);
    }
    return kExitConfig;
}

}  // namespace qfb

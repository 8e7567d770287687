// Acceptance run: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every failing criterion is listed in
// --known-failures, 1 otherwise. Known failures are still computed and
// printed as FAIL; the list only decides the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qfb/cli.hpp"
#include "qfb/control.hpp"
#include "qfb/harness.hpp"
#include "qfb/moment_engine.hpp"
#include "qfb/sme.hpp"
#include "qfb/spin.hpp"
#include "qfb/steady_state.hpp"

using namespace qfb;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}
std::string g3(double v) { return fmt("%.3g", v); }

// Base parameters: G=1e-4, A=B^2=0.04, eta=1.
SimParams base_params(int n, double dt, double t_final, std::uint64_t seed) {
    SimParams p;
    p.n_atoms = n;
    p.G = 1e-4;
    p.A = 0.04;
    p.B = 0.2;
    p.eta = 1.0;
    p.dt = dt;
    p.t_final = t_final;
    p.seed = seed;
    return p;
}

struct Member {
    std::optional<TrajectoryRecord> rec;
    std::string error;
};

std::vector<Member> ensemble(Engine engine, const SimParams& p, const std::optional<ControlLaw>& law,
                             const RunOptions& o, std::size_t n) {
    std::vector<Member> out(n);
    parallel_for_index(n, [&](std::size_t i) {
        SimParams pi = p;
        pi.seed = derive_seed(p.seed, i);
        try {
            out[i].rec = run_trajectory(engine, pi, law, o);
        } catch (const IntegratorAbort& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------

Verdict operator_algebra() {
    double comm = 0.0, casimir = 0.0;
    for (int n : {1, 2, 5, 20, 100}) {
        const SpinOperators o = build_spin_operators(n);
        const cplx two_i(0.0, 2.0);
        comm = std::max(comm, (o.sx * o.sy - o.sy * o.sx - two_i * o.sz).cwiseAbs().maxCoeff());
        comm = std::max(comm, (o.sy * o.sz - o.sz * o.sy - two_i * o.sx).cwiseAbs().maxCoeff());
        comm = std::max(comm, (o.sz * o.sx - o.sx * o.sz - two_i * o.sy).cwiseAbs().maxCoeff());
        const CMatrix c = o.sx * o.sx + o.sy * o.sy + o.sz * o.sz -
                          static_cast<double>(n) * (n + 2) * CMatrix::Identity(n + 1, n + 1);
        casimir = std::max(casimir, c.cwiseAbs().maxCoeff());
    }
    return {comm < 1e-10 && casimir < 1e-10,
            "max commutator error " + g3(comm) + ", max Casimir error " + g3(casimir)};
}

Verdict free_rotation() {
    SimParams p;
    p.n_atoms = 2;
    p.G = 1e-4;
    p.A = 0.0;
    p.B = 0.0;
    p.dt = 1e-3;
    p.t_final = M_PI / p.G;  // one period of cos(2 G t)
    // t_final / dt must be an integer step count
    p.t_final = std::round(p.t_final / p.dt) * p.dt;
    RunOptions o;
    o.sample_stride = 1000;
    const auto mom = simulate_moments(p, std::nullopt, nullptr, o);
    const auto sme = run_trajectory(Engine::Sme, p, std::nullopt, o);
    double err_m = 0.0, err_s = 0.0, agree = 0.0;
    for (std::size_t i = 0; i < mom.size(); ++i) {
        const double exact = std::cos(2.0 * p.G * mom.times[i]);
        err_m = std::max(err_m, std::abs(mom.moments[i].sx - exact));
        err_s = std::max(err_s, std::abs(sme.moments[i].sx - exact));
        for (int k = 0; k < 3; ++k) {
            agree = std::max(agree, std::abs(mom.moments[i].bloch()[k] - sme.moments[i].bloch()[k]));
        }
    }
    return {err_m < 1e-6 && err_s < 1e-6 && agree < 1e-6,
            "max |sx - cos 2Gt|: moment " + g3(err_m) + ", sme " + g3(err_s) +
                "; engines differ by " + g3(agree)};
}

// Worst |mean sx - e^{-2At}| in units of the standard error over the samples.
struct DecayFit {
    double worst_z = 0.0;
    double worst_t = 0.0;
    int aborts = 0;
    bool ok = false;
};

DecayFit decay_fit(const std::vector<Member>& runs, double A) {
    DecayFit f;
    std::vector<const TrajectoryRecord*> done;
    for (const auto& m : runs) {
        if (m.rec) {
            done.push_back(&*m.rec);
        } else {
            ++f.aborts;
        }
    }
    if (done.size() < 2) return f;
    const auto& times = done.front()->times;
    for (std::size_t j = 0; j < times.size(); ++j) {
        std::vector<double> sx;
        for (const auto* r : done) sx.push_back(r->moments[j].sx);
        const double diff = std::abs(mean_of(sx) - std::exp(-2.0 * A * times[j]));
        const double se = stderr_of(sx);
        // differences at round-off level (t = 0, where every run starts from the
        // same state and the standard error is ~1e-17) count as exact
        const double z = diff <= 1e-12 ? 0.0 : (se > 0.0 ? diff / se : INFINITY);
        if (z > f.worst_z) {
            f.worst_z = z;
            f.worst_t = times[j];
        }
    }
    f.ok = f.aborts == 0 && f.worst_z <= 3.0;
    return f;
}

// Checked every 5 time units. SME samples decorrelate within about one time
// unit, so a denser grid would mostly add chances for an exact integrator to
// cross 3 SE (about 24% for a 0.5 grid).
Verdict dephasing_decay(std::uint64_t seed) {
    RunOptions o;
    const SimParams pm = base_params(100, 1e-3, 50.0, seed);
    o.sample_stride = 5000;
    const DecayFit m = decay_fit(ensemble(Engine::Moment, pm, std::nullopt, o, 200), pm.A);
    const SimParams ps = base_params(30, 5e-3, 50.0, seed);
    o.sample_stride = 1000;
    const DecayFit s = decay_fit(ensemble(Engine::Sme, ps, std::nullopt, o, 200), ps.A);
    auto describe = [](const DecayFit& f) {
        return "worst " + g3(f.worst_z) + " SE at t=" + g3(f.worst_t) + ", " +
               std::to_string(f.aborts) + " aborted";
    };
    return {m.ok && s.ok, "moment (N=100): " + describe(m) + "; sme (N=30): " + describe(s)};
}

Verdict variance_collapse(std::uint64_t seed) {
    const SimParams p = base_params(20, 5e-3, 100.0, seed);
    RunOptions o;
    o.sample_stride = 200;  // one sample per unit time
    const auto runs = ensemble(Engine::Sme, p, std::nullopt, o, 200);
    std::vector<const TrajectoryRecord*> done;
    for (const auto& m : runs) {
        if (!m.rec) return {false, "SME run aborted: " + m.error};
        done.push_back(&*m.rec);
    }
    // bins of 5 time units; a violation is a rise of the binned mean by more
    // than one standard error of the paired difference
    constexpr double kBin = 5.0;
    const auto& times = done.front()->times;
    const int n_bins = static_cast<int>(std::round(p.t_final / kBin));
    std::vector<std::vector<double>> binned(done.size(), std::vector<double>(n_bins, 0.0));
    std::vector<int> counts(n_bins, 0);
    for (std::size_t j = 1; j < times.size(); ++j) {
        const int b = std::min(n_bins - 1, static_cast<int>((times[j] - 1e-9) / kBin));
        ++counts[b];
        for (std::size_t i = 0; i < done.size(); ++i) binned[i][b] += done[i]->variance_sz[j];
    }
    int violations = 0;
    double worst_rise = -INFINITY;
    for (int b = 0; b + 1 < n_bins; ++b) {
        std::vector<double> d;
        for (std::size_t i = 0; i < done.size(); ++i) {
            d.push_back(binned[i][b + 1] / counts[b + 1] - binned[i][b] / counts[b]);
        }
        const double rise = mean_of(d), se = stderr_of(d);
        worst_rise = std::max(worst_rise, se > 0 ? rise / se : (rise > 0 ? INFINITY : 0.0));
        if (rise > se) ++violations;
    }
    std::vector<double> s_end;
    int pure = 0;
    for (const auto* r : done) {
        s_end.push_back(r->variance_sz.back());
        if (r->purity.back() > 0.99) ++pure;
    }
    const double s_mean = mean_of(s_end);
    const double pure_frac = static_cast<double>(pure) / static_cast<double>(done.size());
    return {violations == 0 && s_mean < 1e-3 * p.n_atoms && pure_frac >= 0.95,
            std::to_string(violations) + " rising bins (largest rise " + g3(worst_rise) +
                " SE), terminal mean S = " + g3(s_mean) + " (bound " + g3(1e-3 * p.n_atoms) +
                "), purity > 0.99 in " + g3(100 * pure_frac) + "%"};
}

Verdict born_rule(std::uint64_t seed) {
    const SimParams p = base_params(20, 5e-3, 80.0, seed);
    RunOptions o;
    o.sample_stride = 1000;
    const auto rep = collapse_statistics(p, spin_coherent_state(20, M_PI / 2, 0.0), 500, o);
    const int collapsed = rep.n_traj - rep.uncollapsed;
    if (collapsed == 0) return {false, "no trajectory collapsed"};
    // independent binomial oracle
    double tv = 0.0;
    for (int k = 0; k <= 20; ++k) {
        const double binom = std::exp(std::lgamma(21.0) - std::lgamma(k + 1.0) -
                                      std::lgamma(21.0 - k) - 20.0 * std::log(2.0));
        tv += 0.5 * std::abs(static_cast<double>(rep.histogram[k]) / collapsed - binom);
    }
    return {tv < 0.07 && !rep.failed,
            "TV = " + g3(tv) + " over " + std::to_string(collapsed) + " collapsed, " +
                std::to_string(rep.uncollapsed) + " uncollapsed"};
}

Verdict table1_signs(std::uint64_t seed) {
    // control axis, fed-back axis, target axis, target sign for a positive gain
    struct Row {
        Axis control, signal, target;
        int sign_pos;
        const char* name;
    };
    const Row rows[] = {{kX, kZ, kY, -1, "u_x=b<sz>"},
                        {kY, kZ, kX, +1, "u_y=b<sz>"},
                        {kZ, kY, kZ, -1, "u_z=b<sy>"}};
    const SimParams p = base_params(100, 1e-4, 100.0, seed);
    RunOptions o;
    o.sample_stride = 100;
    bool all = true;
    std::string detail;
    for (const auto& row : rows) {
        for (double gain : {8.0, -8.0}) {
            const auto law = ControlLaw::single_gain(row.control, row.signal, gain);
            const int want = gain > 0 ? row.sign_pos : -row.sign_pos;
            int match = 0, aborts = 0;
            Vec3 avg{};
            int n_ok = 0;
            for (const auto& m : ensemble(Engine::Moment, p, law, o, 10)) {
                if (!m.rec) {
                    ++aborts;
                    continue;
                }
                const SteadyState s = steady_state_estimate(*m.rec);
                if ((s.mean[row.target] > 0 ? 1 : -1) == want && s.mean[row.target] != 0.0) ++match;
                for (int k = 0; k < 3; ++k) avg[k] += s.mean[k];
                ++n_ok;
            }
            bool ok = match >= 9 && n_ok > 0;
            if (n_ok > 0) {
                for (auto& v : avg) v /= n_ok;
                ok = ok && std::abs(avg[row.target]) > 0.3;
                for (int k = 0; k < 3; ++k) {
                    if (k != row.target) ok = ok && std::abs(avg[k]) < 0.15;
                }
            }
            all = all && ok;
            detail += std::string(detail.empty() ? "" : "; ") + row.name + " b=" + g3(gain) + ": " +
                      std::to_string(match) + "/10 signs, " + std::to_string(aborts) + " aborted" +
                      (n_ok > 0 ? ", mean (" + g3(avg[0]) + "," + g3(avg[1]) + "," + g3(avg[2]) + ")"
                                : "");
        }
    }
    return {all, detail};
}

Verdict toward_y(std::uint64_t seed) {
    const SimParams p = base_params(100, 1e-4, 100.0, seed);
    RunOptions o;
    o.sample_stride = 100;
    const auto law = ControlLaw::single_gain(kX, kZ, -14.5);
    TrajectoryRecord rec;
    try {
        rec = simulate_moments(p, law, nullptr, o);
    } catch (const IntegratorAbort& e) {
        return {false, std::string("moment run aborted: ") + e.what()};
    }
    const SteadyState s = steady_state_estimate(rec);
    MomentState avg;
    const std::size_t start = rec.size() - s.samples;
    for (std::size_t i = start; i < rec.size(); ++i) avg += rec.moments[i];
    avg *= 1.0 / static_cast<double>(s.samples);
    const bool ok = s.mean[kY] > 0 && std::abs(avg.xz) < 0.05 && std::abs(avg.yz) < 0.05 &&
                    std::abs(avg.xy) < 0.05 && avg.sx2 > 1e-3 && avg.sz2 > 1e-3;
    return {ok, "steady sy = " + g3(s.mean[kY]) + ", |xz| = " + g3(std::abs(avg.xz)) +
                    ", |yz| = " + g3(std::abs(avg.yz)) + ", |xy| = " + g3(std::abs(avg.xy)) +
                    ", sx2 = " + g3(avg.sx2) + ", sz2 = " + g3(avg.sz2)};
}

Verdict beta_xz_sweep(std::uint64_t seed) {
    SweepSpec spec;
    spec.swept = law_entry_from_string("beta_xz");
    for (int i = 0; i <= 10; ++i) spec.grid.push_back(-15.0 + 3.0 * i);
    spec.repetitions = 10;
    spec.options.sample_stride = 100;
    std::vector<SweepPoint> pts;
    try {
        pts = run_sweep(spec, base_params(100, 1e-4, 100.0, seed));
    } catch (const SweepDivergence& e) {
        return {false, e.what()};
    }
    int asym = 0;
    bool signs = true;
    const int pos_sign = pts.back().mean[kY] > 0 ? 1 : -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& a = pts[i];
        const auto& b = pts[pts.size() - 1 - i];
        if (std::abs(a.mean[kY] + b.mean[kY]) >
            2.0 * std::hypot(a.sigma[kY], b.sigma[kY])) {
            ++asym;
        }
        if (a.gain != 0.0) {
            const int s = a.mean[kY] > 0 ? 1 : (a.mean[kY] < 0 ? -1 : 0);
            if (s != (a.gain > 0 ? pos_sign : -pos_sign)) signs = false;
        }
    }
    std::string curve;
    for (const auto& pt : pts) curve += (curve.empty() ? "" : " ") + g3(pt.mean[kY]);
    return {asym == 0 && signs, std::to_string(asym) + " antisymmetry violations, " +
                                    (signs ? "single sign change at 0" : "extra sign changes") +
                                    "; sy: " + curve};
}

int run_cli_args(std::vector<std::string> args, std::ostream& log) {
    args.insert(args.begin(), "qfb");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), log, log);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    std::ofstream f(p, std::ios::binary);
    f << j.dump(2) << "\n";
}

nlohmann::json base_json(int n, double dt, double t_final, std::uint64_t seed) {
    return {{"n_atoms", n}, {"G", 1e-4}, {"A", 0.04}, {"B", 0.2}, {"eta", 1.0},
            {"dt", dt},     {"t_final", t_final}, {"seed", seed}};
}

Verdict closure_validation(std::uint64_t seed, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream log;
    bool ok = true;
    std::string detail;
    const nlohmann::json toward_y_law = {{"beta", {{0, 0, -14.5}, {0, 0, 0}, {0, 0, 0}}}};
    for (const bool feedback : {false, true}) {
        const std::string tag = feedback ? "toward_y_law" : "no_feedback";
        nlohmann::json cfg = {{"params", base_json(30, 5e-3, 50.0, seed)},
                              {"engine", "sme"},
                              {"sample_stride", 100},
                              {"compare", {{"n_traj", 500}, {"horizon", 50.0}, {"threshold", 0.05}}}};
        if (feedback) cfg["law"] = toward_y_law;
        write_json(dir / (tag + ".json"), cfg);
        const int code = run_cli_args({"compare", "--config", (dir / (tag + ".json")).string(),
                                       "--out", (dir / tag).string()},
                                      log);
        if (code != kExitOk) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + tag + ": exit " + std::to_string(code);
            continue;
        }
        const auto rep = nlohmann::json::parse(slurp(dir / tag / "compare.json"))["results"];
        const auto& dev = rep["max_deviation_all"];
        const double d = dev.is_null() ? INFINITY : dev.get<double>();
        ok = ok && d < 0.05;
        detail += (detail.empty() ? "" : "; ") + tag + ": max deviation " + g3(d) +
                  ", commutator residual " + g3(rep["max_commutator_residual"].get<double>()) +
                  ", " + std::to_string(rep["moment_aborts"].get<int>()) + "/500 moment runs aborted";
    }
    return {ok, detail + " (artifacts in " + dir.string() + ")"};
}

Verdict determinism(std::uint64_t seed, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream log;
    const nlohmann::json small_sme = {{"n_atoms", 6}, {"G", 1e-4}, {"A", 0.04}, {"B", 0.2},
                                      {"eta", 1.0},   {"dt", 0.01}, {"t_final", 20.0}, {"seed", seed}};
    struct Case {
        std::string sub, file;
        nlohmann::json cfg;
    };
    const std::vector<Case> cases = {
        {"simulate", "trajectory.csv",
         {{"params", base_json(100, 1e-3, 50.0, seed)}, {"sample_stride", 10}}},
        {"simulate", "trajectory.csv",
         {{"params", small_sme}, {"engine", "sme"}, {"target", {0, 1, 0}}}},
        {"sweep", "sweep.csv",
         {{"params", small_sme},
          {"engine", "sme"},
          {"sweep", {{"entry", "beta_xz"}, {"grid", {-2.0, 0.0, 2.0}}, {"repetitions", 3}}}}},
        {"tune", "tune.json",
         {{"params", small_sme},
          {"engine", "sme"},
          {"target", {0, 1, 0}},
          {"tune", {{"search_space", {{"beta_xz", {-2.0, 2.0}}}}, {"budget", 6}, {"repetitions", 2}}}}},
        {"compare", "compare.csv",
         {{"params", small_sme}, {"engine", "sme"}, {"compare", {{"n_traj", 20}, {"horizon", 10.0}}}}},
        {"collapse", "collapse.csv",
         {{"params", small_sme}, {"engine", "sme"}, {"collapse", {{"n_traj", 20}}}}}};
    int identical = 0;
    std::string bad;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& cs = cases[c];
        const fs::path cfg = dir / ("case" + std::to_string(c) + ".json");
        write_json(cfg, cs.cfg);
        std::string first;
        bool same = true;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = dir / ("case" + std::to_string(c) + "_" + std::to_string(rep));
            const int code = run_cli_args({cs.sub, "--config", cfg.string(), "--out", out.string()}, log);
            // collapse may legitimately report exit 3 on a short run; the files still exist
            if (code != kExitOk && code != kExitAbort) same = false;
            const std::string body = slurp(out / cs.file);
            if (body.empty() || body.find(std::to_string(seed)) == std::string::npos) same = false;
            if (rep == 0) {
                first = body;
            } else if (body != first) {
                same = false;
            }
        }
        if (same) {
            ++identical;
        } else {
            bad += " " + cs.sub;
        }
    }
    return {identical == static_cast<int>(cases.size()),
            std::to_string(identical) + "/" + std::to_string(cases.size()) +
                " subcommand outputs byte-identical across repeated runs" +
                (bad.empty() ? "" : "; differing:" + bad)};
}

Verdict g_invariance(std::uint64_t seed) {
    SimParams p = base_params(20, 1e-3, 10.0, seed);
    RunOptions o;
    o.sample_stride = 10;
    const auto law = ControlLaw::single_gain(kX, kZ, -14.5);
    double worst = 0.0;
    for (SmeScheme scheme : {SmeScheme::PositiveSplit, SmeScheme::EulerMaruyama}) {
        o.sme_scheme = scheme;
        o.psd_check_stride = scheme == SmeScheme::EulerMaruyama ? 0 : 1;
        std::vector<TrajectoryRecord> recs;
        for (double g : {0.0, 1.0, 10.0}) {
            p.g = g;
            recs.push_back(run_trajectory(Engine::Sme, p, law, o));
        }
        for (std::size_t r = 1; r < recs.size(); ++r) {
            for (std::size_t i = 0; i < recs[0].size(); ++i) {
                const MomentState& a = recs[0].moments[i];
                const MomentState& b = recs[r].moments[i];
                const double d[] = {a.sx - b.sx,   a.sy - b.sy,   a.sz - b.sz,
                                    a.sx2 - b.sx2, a.sy2 - b.sy2, a.sz2 - b.sz2,
                                    std::abs(a.xz - b.xz), std::abs(a.yz - b.yz),
                                    std::abs(a.xy - b.xy)};
                for (double v : d) worst = std::max(worst, std::abs(v));
            }
        }
    }
    return {worst < 1e-12, "max moment difference across g in {0,1,10}: " + g3(worst)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-11", "qfb_acceptance"};
    std::uint64_t seed = 1;
    std::vector<int> only, known;
    std::string artifacts = "acceptance_artifacts";
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--only", only, "Run only these criteria");
    app.add_option("--known-failures", known, "Criteria whose failure does not fail the run");
    std::string report;
    app.add_option("--artifacts", artifacts, "Directory for CLI artifacts");
    app.add_option("--report", report, "Also write the result lines to this file");
    CLI11_PARSE(app, argc, argv);

    const fs::path dir = artifacts;
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> all = {
        {1, "operator algebra", 1, [] { return operator_algebra(); }},
        {2, "free-rotation oracle", 10, [] { return free_rotation(); }},
        {3, "dephasing decay", 120, [&] { return dephasing_decay(seed); }},
        {4, "variance collapse", 120, [&] { return variance_collapse(seed); }},
        {5, "Born-rule histogram", 300, [&] { return born_rule(seed); }},
        {6, "sign rules", 60, [&] { return table1_signs(seed); }},
        {7, "stabilize sy", 30, [&] { return toward_y(seed); }},
        {8, "beta_xz sweep shape", 300, [&] { return beta_xz_sweep(seed); }},
        {9, "closure validation", 600, [&] { return closure_validation(seed, dir / "closure"); }},
        {10, "determinism", 60, [&] { return determinism(seed, dir / "determinism"); }},
        {11, "g-invariance", 60, [&] { return g_invariance(seed); }}};

    const std::set<int> known_set(known.begin(), known.end());
    int unexpected = 0, failed = 0;
    std::ostringstream log;
    auto emit = [&](const std::string& line) {
        std::cout << line << std::endl;
        log << line << "\n";
    };
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = v.pass && in_time;
        std::ostringstream line;
        line << "criterion " << c.id << " " << (pass ? "PASS" : "FAIL") << " [" << c.name
                  << "] " << v.detail << " (" << fmt("%.1f", secs) << " s, budget "
                  << fmt("%g", c.budget_s) << " s" << (in_time ? "" : ", over budget") << ")";
        if (!pass) {
            ++failed;
            if (known_set.count(c.id)) {
                line << " [known failure]";
            } else {
                ++unexpected;
            }
        }
        emit(line.str());
    }
    emit("summary: " + std::to_string(failed) + " failed, " + std::to_string(unexpected) +
         " unexpected");
    if (!report.empty()) {
        std::ofstream f(report);
        f << log.str();
    }
    return unexpected == 0 ? 0 : 1;
}

#include "qfb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

#include "qfb/moment_engine.hpp"
#include "qfb/sme.hpp"

namespace qfb {

void parallel_for_index(std::size_t n, const std::function<void(std::size_t)>& fn,
                        unsigned threads) {
    if (n == 0) return;
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || stop.load()) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                stop.store(true);
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

DensityMatrix default_initial_state(int n_atoms) {
    return to_density(spin_coherent_state(n_atoms, M_PI / 2.0, 0.0));
}

TrajectoryRecord run_trajectory(Engine engine, const SimParams& p,
                                const std::optional<ControlLaw>& law, const RunOptions& options,
                                const InnovationSequence* innovations,
                                const DensityMatrix* initial) {
    if (engine == Engine::Moment) return simulate_moments(p, law, innovations, options);
    if (initial != nullptr) return simulate_sme(p, law, *initial, innovations, options);
    return simulate_sme(p, law, default_initial_state(p.n_atoms), innovations, options);
}

std::vector<MemberOutcome> run_steady_ensemble(Engine engine, const SimParams& p,
                                               const std::optional<ControlLaw>& law,
                                               const RunOptions& options, std::size_t n,
                                               double window) {
    validate_params(p);
    std::vector<MemberOutcome> out(n);
    parallel_for_index(n, [&](std::size_t i) {
        SimParams pi = p;
        pi.seed = derive_seed(p.seed, i);
        out[i].seed = pi.seed;
        try {
            out[i].steady = steady_state_estimate(run_trajectory(engine, pi, law, options), window);
        } catch (const IntegratorAbort& e) {
            out[i].error = e.what();
            out[i].abort_step = e.step();
        }
    });
    return out;
}

double LawEntry::get(const ControlLaw& law) const {
    return kind == Kind::Xi ? law.xi[row] : law.beta[row][col];
}

void LawEntry::set(ControlLaw& law, double value) const {
    if (kind == Kind::Xi) {
        law.xi[row] = value;
    } else {
        law.beta[row][col] = value;
    }
}

namespace {

constexpr const char* kAxisNames = "xyz";

Axis axis_from_char(char c, const std::string& whole) {
    switch (c) {
        case 'x': return kX;
        case 'y': return kY;
        case 'z': return kZ;
        default:
            throw std::invalid_argument("law entry \"" + whole +
                                        "\": expected xi_<axis> or beta_<axis><axis>");
    }
}

}  // namespace

std::string LawEntry::name() const {
    std::string s = kind == Kind::Xi ? "xi_" : "beta_";
    s += kAxisNames[row];
    if (kind == Kind::Beta) s += kAxisNames[col];
    return s;
}

LawEntry law_entry_from_string(const std::string& s) {
    LawEntry e;
    if (s.size() == 4 && s.compare(0, 3, "xi_") == 0) {
        e.kind = LawEntry::Kind::Xi;
        e.row = axis_from_char(s[3], s);
        e.col = e.row;
        return e;
    }
    if (s.size() == 7 && s.compare(0, 5, "beta_") == 0) {
        e.kind = LawEntry::Kind::Beta;
        e.row = axis_from_char(s[5], s);
        e.col = axis_from_char(s[6], s);
        return e;
    }
    axis_from_char('?', s);
    return e;
}

void validate_sweep(const SweepSpec& spec) {
    if (spec.grid.empty()) throw std::invalid_argument("sweep.grid: must not be empty");
    for (double g : spec.grid) {
        if (!std::isfinite(g)) throw std::invalid_argument("sweep.grid: non-finite value");
    }
    if (spec.grid.size() > 1) {
        const bool up = spec.grid[1] > spec.grid[0];
        for (std::size_t i = 1; i < spec.grid.size(); ++i) {
            if (up ? !(spec.grid[i] > spec.grid[i - 1]) : !(spec.grid[i] < spec.grid[i - 1])) {
                throw std::invalid_argument("sweep.grid: must be strictly monotone");
            }
        }
    }
    if (spec.repetitions < 1) throw std::invalid_argument("sweep.repetitions: must be >= 1");
    if (!(spec.steady_window > 0.0)) {
        throw std::invalid_argument("sweep.steady_window: must be positive");
    }
    validate_law(spec.law_template);
    validate_options(spec.options);
}

namespace {

void mean_and_sigma(const std::vector<Vec3>& xs, Vec3& mean, Vec3& sigma) {
    mean = {};
    sigma = {};
    for (const auto& x : xs) {
        for (int k = 0; k < 3; ++k) mean[k] += x[k];
    }
    for (int k = 0; k < 3; ++k) mean[k] /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    for (const auto& x : xs) {
        for (int k = 0; k < 3; ++k) sigma[k] += (x[k] - mean[k]) * (x[k] - mean[k]);
    }
    for (int k = 0; k < 3; ++k) sigma[k] = std::sqrt(sigma[k] / static_cast<double>(xs.size() - 1));
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

std::vector<SweepPoint> run_sweep(const SweepSpec& spec, const SimParams& params) {
    validate_sweep(spec);
    validate_params(params);
    std::vector<SweepPoint> table;
    table.reserve(spec.grid.size());
    for (double gain : spec.grid) {
        ControlLaw law = spec.law_template;
        spec.swept.set(law, gain);
        const auto members =
            run_steady_ensemble(spec.engine, params, law, spec.options,
                                static_cast<std::size_t>(spec.repetitions), spec.steady_window);
        SweepPoint pt;
        pt.gain = gain;
        for (const auto& m : members) {
            if (!m.steady) {
                // SweepDivergence appends the step itself
                std::string detail = m.error;
                const auto suffix = detail.rfind(" (step ");
                if (suffix != std::string::npos) detail.resize(suffix);
                throw SweepDivergence("sweep diverged at " + spec.swept.name() + " = " +
                                          format_value(gain) + ": " + detail,
                                      m.abort_step, gain);
            }
            pt.run_means.push_back(m.steady->mean);
            pt.seeds.push_back(m.seed);
        }
        mean_and_sigma(pt.run_means, pt.mean, pt.sigma);
        table.push_back(std::move(pt));
    }
    return table;
}

std::string to_string(TuneSpec::Method m) {
    return m == TuneSpec::Method::Grid ? "grid" : "coordinate_descent";
}

TuneSpec::Method tune_method_from_string(const std::string& s) {
    if (s == "grid") return TuneSpec::Method::Grid;
    if (s == "coordinate_descent") return TuneSpec::Method::CoordinateDescent;
    throw std::invalid_argument("tune.method: expected \"grid\" or \"coordinate_descent\"");
}

void validate_tune(const TuneSpec& spec) {
    validate_target(spec.target);
    validate_law(spec.base_law);
    validate_options(spec.options);
    if (spec.search_space.empty()) {
        throw std::invalid_argument("tune.search_space: must not be empty");
    }
    for (const auto& b : spec.search_space) {
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi)) {
            throw std::invalid_argument("tune.search_space." + b.entry.name() +
                                        ": bounds must be finite");
        }
        if (b.lo > b.hi) {
            throw std::invalid_argument("tune.search_space." + b.entry.name() + ": lo > hi");
        }
    }
    if (spec.budget < 1) throw std::invalid_argument("tune.budget: must be >= 1");
    if (spec.grid_points < 1) throw std::invalid_argument("tune.grid_points: must be >= 1");
    if (spec.repetitions < 1) throw std::invalid_argument("tune.repetitions: must be >= 1");
    if (!(spec.steady_window > 0.0)) {
        throw std::invalid_argument("tune.steady_window: must be positive");
    }
}

namespace {

class TuneObjective {
public:
    TuneObjective(const TuneSpec& spec, const SimParams& params) : spec_(spec), params_(params) {
        options_ = spec.options;
        options_.target = spec.target;
    }

    ControlLaw law_for(const std::vector<double>& x) const {
        ControlLaw law = spec_.base_law;
        for (std::size_t k = 0; k < x.size(); ++k) spec_.search_space[k].entry.set(law, x[k]);
        return law;
    }

    // Cached; returns nullptr when the budget is spent and x is new.
    const TuneEvaluation* evaluate(const std::vector<double>& x, TuneResult& result) {
        auto it = cache_.find(x);
        if (it != cache_.end()) return &result.history[it->second];
        if (result.evaluations >= spec_.budget) {
            result.budget_exhausted = true;
            return nullptr;
        }
        ++result.evaluations;

        TuneEvaluation ev;
        ev.values = x;
        const ControlLaw law = law_for(x);
        const auto members =
            run_steady_ensemble(spec_.engine, params_, law, options_,
                                static_cast<std::size_t>(spec_.repetitions), spec_.steady_window);
        std::vector<Vec3> means;
        bool aborted = false;
        for (const auto& m : members) {
            if (m.steady) {
                means.push_back(m.steady->mean);
            } else {
                aborted = true;
            }
        }
        if (aborted) {
            ev.residual = std::numeric_limits<double>::infinity();
            ev.steady = {std::nan(""), std::nan(""), std::nan("")};
        } else {
            Vec3 sigma;
            mean_and_sigma(means, ev.steady, sigma);
            ev.residual = lyapunov_distance(ev.steady, spec_.target);
        }
        result.history.push_back(ev);
        cache_.emplace(x, result.history.size() - 1);
        return &result.history.back();
    }

private:
    const TuneSpec& spec_;
    const SimParams& params_;
    RunOptions options_;
    std::map<std::vector<double>, std::size_t> cache_;
};

double grid_value(const TuneBound& b, int i, int points) {
    if (points == 1) return 0.5 * (b.lo + b.hi);
    return b.lo + (b.hi - b.lo) * static_cast<double>(i) / static_cast<double>(points - 1);
}

}  // namespace

TuneResult tune_gains(const TuneSpec& spec, const SimParams& params) {
    validate_tune(spec);
    validate_params(params);

    TuneObjective objective(spec, params);
    TuneResult result;
    const std::size_t dims = spec.search_space.size();
    std::vector<double> best_x;
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<double>& x) {
        const TuneEvaluation* ev = objective.evaluate(x, result);
        if (ev == nullptr) return false;
        if (best_x.empty() || ev->residual < best) {
            best = ev->residual;
            best_x = x;
        }
        return true;
    };

    // Tensor grid, lexicographic in the search-space order.
    std::vector<int> idx(dims, 0);
    bool grid_done = false;
    while (!grid_done) {
        std::vector<double> x(dims);
        for (std::size_t k = 0; k < dims; ++k) {
            x[k] = grid_value(spec.search_space[k], idx[k], spec.grid_points);
        }
        if (!consider(x)) break;
        std::size_t k = dims;
        while (k > 0) {
            --k;
            if (++idx[k] < spec.grid_points) break;
            idx[k] = 0;
            if (k == 0) grid_done = true;
        }
    }

    if (spec.method == TuneSpec::Method::CoordinateDescent && !result.budget_exhausted) {
        std::vector<double> step(dims);
        for (std::size_t k = 0; k < dims; ++k) {
            const auto& b = spec.search_space[k];
            step[k] = (b.hi - b.lo) / std::max(1, spec.grid_points - 1) / 2.0;
        }
        for (;;) {
            bool improved = false;
            for (std::size_t k = 0; k < dims && !result.budget_exhausted; ++k) {
                for (double dir : {1.0, -1.0}) {
                    std::vector<double> x = best_x;
                    const auto& b = spec.search_space[k];
                    x[k] = std::clamp(x[k] + dir * step[k], b.lo, b.hi);
                    if (x[k] == best_x[k]) continue;
                    const double before = best;
                    if (!consider(x)) break;
                    if (best < before) {
                        improved = true;
                        break;
                    }
                }
            }
            if (result.budget_exhausted) break;
            if (!improved) {
                bool fine = true;
                for (std::size_t k = 0; k < dims; ++k) {
                    step[k] *= 0.5;
                    const auto& b = spec.search_space[k];
                    if (step[k] > 1e-3 * (b.hi - b.lo)) fine = false;
                }
                if (fine) break;
            }
        }
    }

    result.found = std::isfinite(best);
    if (!result.found) {
        result.law = spec.base_law;
        result.residual = best;
        return result;
    }
    result.law = objective.law_for(best_x);
    const TuneEvaluation* ev = objective.evaluate(best_x, result);
    result.steady = ev->steady;
    result.residual = ev->residual;
    return result;
}

namespace {

struct CompareMember {
    std::vector<Vec3> sme;
    std::vector<Vec3> moment;
    std::vector<double> residual;
    bool moment_aborted = false;
};

}  // namespace

CompareReport compare_engines(const SimParams& params, const std::optional<ControlLaw>& law,
                              int n_traj, double horizon, const RunOptions& options) {
    if (params.n_atoms > kMaxCompareAtoms) {
        throw std::invalid_argument("compare: n_atoms must be <= " +
                                    std::to_string(kMaxCompareAtoms) + " for the SME engine");
    }
    if (n_traj < 1) throw std::invalid_argument("compare: n_traj must be >= 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("compare: horizon must be positive");
    SimParams p = params;
    p.t_final = horizon;
    validate_params(p);
    validate_options(options);
    if (law) validate_law(*law);
    const std::size_t steps = step_count(p);
    const DensityMatrix initial = default_initial_state(p.n_atoms);

    CompareReport rep;
    rep.n_traj = n_traj;
    rep.horizon = horizon;
    std::vector<Vec3> sum_sme, sum_mom;
    std::vector<double> sum_res;
    int survivors = 0;

    // Trajectories run in fixed-size chunks and are reduced in index order.
    constexpr std::size_t kChunk = 64;
    const auto total = static_cast<std::size_t>(n_traj);
    for (std::size_t base = 0; base < total; base += kChunk) {
        const std::size_t count = std::min(kChunk, total - base);
        std::vector<CompareMember> members(count);
        std::vector<std::uint64_t> seeds(count);
        parallel_for_index(count, [&](std::size_t j) {
            const std::uint64_t seed = derive_seed(params.seed, base + j);
            seeds[j] = seed;
            const InnovationSequence inn = generate_innovations(seed, p.dt, steps);
            SimParams pj = p;
            pj.seed = seed;
            auto& m = members[j];
            const TrajectoryRecord sme = simulate_sme(pj, law, initial, &inn, options);
            if (base == 0 && j == 0) rep.times = sme.times;
            for (const auto& mo : sme.moments) m.sme.push_back(mo.bloch());
            try {
                const TrajectoryRecord mom = simulate_moments(pj, law, &inn, options);
                for (const auto& mo : mom.moments) m.moment.push_back(mo.bloch());
                m.residual = mom.commutator_residual;
            } catch (const IntegratorAbort&) {
                m.moment_aborted = true;
            }
        });
        for (std::size_t j = 0; j < count; ++j) {
            auto& m = members[j];
            rep.seeds.push_back(seeds[j]);
            if (sum_sme.empty()) sum_sme.assign(m.sme.size(), Vec3{});
            for (std::size_t i = 0; i < m.sme.size(); ++i) {
                for (int k = 0; k < 3; ++k) sum_sme[i][k] += m.sme[i][k];
            }
            if (m.moment_aborted) {
                ++rep.moment_aborts;
                continue;
            }
            ++survivors;
            if (sum_mom.empty()) {
                sum_mom.assign(m.moment.size(), Vec3{});
                sum_res.assign(m.residual.size(), 0.0);
            }
            for (std::size_t i = 0; i < m.moment.size(); ++i) {
                for (int k = 0; k < 3; ++k) sum_mom[i][k] += m.moment[i][k];
                sum_res[i] += m.residual[i];
            }
        }
    }
    if (rep.times.empty()) {
        // The first member always records times; this guards a zero-sample run.
        rep.times.assign(sum_sme.size(), 0.0);
    }

    const std::size_t ns = sum_sme.size();
    rep.mean_sme.resize(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        for (int k = 0; k < 3; ++k) rep.mean_sme[i][k] = sum_sme[i][k] / n_traj;
    }
    if (survivors == 0) {
        const double inf = std::numeric_limits<double>::infinity();
        rep.max_deviation = {inf, inf, inf};
        rep.max_deviation_all = inf;
        rep.max_commutator_residual = inf;
        return rep;
    }
    rep.mean_moment.resize(ns);
    rep.deviation.resize(ns);
    rep.mean_commutator_residual.resize(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        for (int k = 0; k < 3; ++k) {
            rep.mean_moment[i][k] = sum_mom[i][k] / survivors;
            rep.deviation[i][k] = std::abs(rep.mean_sme[i][k] - rep.mean_moment[i][k]);
            rep.max_deviation[k] = std::max(rep.max_deviation[k], rep.deviation[i][k]);
        }
        rep.mean_commutator_residual[i] = sum_res[i] / survivors;
        rep.max_commutator_residual =
            std::max(rep.max_commutator_residual, rep.mean_commutator_residual[i]);
    }
    rep.max_deviation_all =
        std::max({rep.max_deviation[0], rep.max_deviation[1], rep.max_deviation[2]});
    return rep;
}

double collapse_time_scale(const SimParams& p, const PureState& initial) {
    const SpinOperators ops = build_spin_operators(initial.n_atoms);
    const double s0 = variance_sz(to_density(initial), ops);
    const double rate = 4.0 * p.B * p.B * p.eta * s0;
    return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

CollapseReport collapse_statistics(const SimParams& params, const PureState& initial, int n_traj,
                                   const RunOptions& options) {
    validate_params(params);
    if (initial.n_atoms != params.n_atoms) {
        throw std::invalid_argument("collapse: initial state has " +
                                    std::to_string(initial.n_atoms) + " atoms, params.n_atoms = " +
                                    std::to_string(params.n_atoms));
    }
    if (n_traj < 1) throw std::invalid_argument("collapse: n_traj must be >= 1");

    CollapseReport rep;
    rep.n_traj = n_traj;
    const int dim = params.n_atoms + 1;
    rep.histogram.assign(dim, 0);
    rep.eigenvalues.resize(dim);
    rep.born.resize(dim);
    for (int k = 0; k < dim; ++k) {
        rep.eigenvalues[k] = params.n_atoms - 2.0 * k;
        rep.born[k] = std::norm(initial.amplitudes[k]);
    }
    const double tau = collapse_time_scale(params, initial);
    if (std::isfinite(tau) && params.t_final < 10.0 * tau) {
        rep.warnings.push_back("t_final = " + format_value(params.t_final) +
                               " is not much longer than the collapse time 1/(4 B^2 eta S0) = " +
                               format_value(tau));
    }

    const DensityMatrix rho0 = to_density(initial);
    const auto total = static_cast<std::size_t>(n_traj);
    std::vector<int> dominant(total, -1);
    rep.terminal_purity.resize(total);
    rep.terminal_variance.resize(total);
    rep.seeds.resize(total);
    parallel_for_index(total, [&](std::size_t i) {
        SimParams pi = params;
        pi.seed = derive_seed(params.seed, i);
        rep.seeds[i] = pi.seed;
        const SmeRun run = run_sme(pi, std::nullopt, rho0, nullptr, options);
        const auto pops = run.final_state.rho.diagonal().real();
        Eigen::Index k = 0;
        const double top = pops.maxCoeff(&k);
        if (top > kCollapseThreshold) dominant[i] = static_cast<int>(k);
        rep.terminal_purity[i] = run.record.purity.back();
        rep.terminal_variance[i] = run.record.variance_sz.back();
    });

    for (int d : dominant) {
        if (d < 0) {
            ++rep.uncollapsed;
        } else {
            ++rep.histogram[d];
        }
    }
    const int collapsed = n_traj - rep.uncollapsed;
    rep.uncollapsed_fraction = static_cast<double>(rep.uncollapsed) / n_traj;
    rep.failed = rep.uncollapsed_fraction > kMaxUncollapsedFraction;
    if (collapsed == 0) {
        rep.tv_distance = 1.0;
    } else {
        double tv = 0.0;
        for (int k = 0; k < dim; ++k) {
            tv += std::abs(static_cast<double>(rep.histogram[k]) / collapsed - rep.born[k]);
        }
        rep.tv_distance = 0.5 * tv;
    }
    return rep;
}

}  // namespace qfb

// Batch experiments over either engine: seeded ensembles, gain sweeps, gain
// tuning, engine cross-validation and collapse statistics. Every result is a
// deterministic function of the master seed and the inputs, independent of
// how many worker threads ran.

#ifndef QFB_HARNESS_HPP
#define QFB_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qfb/control.hpp"
#include "qfb/params.hpp"
#include "qfb/spin.hpp"
#include "qfb/steady_state.hpp"
#include "qfb/trajectory.hpp"

namespace qfb {

// Runs fn(i) for i in [0, n) on up to `threads` workers (0: hardware
// concurrency). If any call throws, the exception of the lowest failing index
// is rethrown after all workers stop.
void parallel_for_index(std::size_t n, const std::function<void(std::size_t)>& fn,
                        unsigned threads = 0);

// x-polarized spin coherent state, the common starting point of both engines.
DensityMatrix default_initial_state(int n_atoms);

// One trajectory on the chosen engine, starting from the x-polarized state
// (the SME engine accepts another initial state through `initial`).
TrajectoryRecord run_trajectory(Engine engine, const SimParams& p,
                                const std::optional<ControlLaw>& law, const RunOptions& options,
                                const InnovationSequence* innovations = nullptr,
                                const DensityMatrix* initial = nullptr);

// Outcome of one ensemble member: steady-state statistics, or the abort
// message when the integrator gave up.
struct MemberOutcome {
    std::uint64_t seed = 0;
    std::optional<SteadyState> steady;
    std::string error;
    std::size_t abort_step = 0;
};

// n trajectories with seeds derive_seed(params.seed, i), reduced to their
// steady states. Integrator aborts are recorded per member, not thrown.
std::vector<MemberOutcome> run_steady_ensemble(Engine engine, const SimParams& p,
                                               const std::optional<ControlLaw>& law,
                                               const RunOptions& options, std::size_t n,
                                               double window = kDefaultSteadyWindow);

// A single adjustable entry of a ControlLaw: an offset xi_k or a gain beta_kl.
struct LawEntry {
    enum class Kind { Xi, Beta };
    Kind kind = Kind::Beta;
    Axis row = kX;
    Axis col = kZ;  // ignored for Xi

    double get(const ControlLaw& law) const;
    void set(ControlLaw& law, double value) const;
    std::string name() const;  // "xi_x", "beta_xz", ...
};

// Parses "xi_x" / "beta_xz" style names; throws std::invalid_argument.
LawEntry law_entry_from_string(const std::string& s);

struct SweepSpec {
    ControlLaw law_template;
    LawEntry swept;
    std::vector<double> grid;
    int repetitions = 10;
    Engine engine = Engine::Moment;
    double steady_window = kDefaultSteadyWindow;
    RunOptions options;
};

// Throws std::invalid_argument on an empty or non-monotone grid, or
// repetitions < 1.
void validate_sweep(const SweepSpec& spec);

struct SweepPoint {
    double gain = 0.0;
    Vec3 mean{};   // mean over repetitions of the per-run steady mean
    Vec3 sigma{};  // standard deviation over repetitions
    std::vector<Vec3> run_means;
    std::vector<std::uint64_t> seeds;
};

// Raised when a sweep member aborts; names the grid value.
class SweepDivergence : public IntegratorAbort {
public:
    SweepDivergence(const std::string& what, std::size_t step, double gain)
        : IntegratorAbort(what, step), gain_(gain) {}
    double gain() const { return gain_; }

private:
    double gain_;
};

// Repetition r at every grid point uses derive_seed(params.seed, r), so the
// curve is evaluated under common random numbers.
std::vector<SweepPoint> run_sweep(const SweepSpec& spec, const SimParams& params);

struct TuneBound {
    LawEntry entry;
    double lo = 0.0;
    double hi = 0.0;
};

struct TuneSpec {
    TargetSpec target;
    std::vector<TuneBound> search_space;
    ControlLaw base_law;  // entries outside the search space keep these values
    int budget = 40;      // maximum objective evaluations
    enum class Method { Grid, CoordinateDescent } method = Method::CoordinateDescent;
    int grid_points = 5;  // per entry, for the grid (or the coarse grid of descent)
    int repetitions = 3;
    Engine engine = Engine::Moment;
    double steady_window = kDefaultSteadyWindow;
    RunOptions options;
};

void validate_tune(const TuneSpec& spec);
std::string to_string(TuneSpec::Method m);
TuneSpec::Method tune_method_from_string(const std::string& s);

struct TuneEvaluation {
    std::vector<double> values;  // one per search-space entry
    double residual = 0.0;       // +inf when any repetition aborted
    Vec3 steady{};
};

struct TuneResult {
    ControlLaw law;
    Vec3 steady{};
    double residual = 0.0;  // V(steady mean, target)
    int evaluations = 0;
    bool budget_exhausted = false;  // search stopped on the budget, not on convergence
    bool found = false;  // some candidate ran without aborting; otherwise law = base_law
    std::vector<TuneEvaluation> history;
};

// Minimizes V(mean steady Bloch vector, target). Every candidate is scored on
// the same seeds derive_seed(params.seed, r), r < repetitions.
TuneResult tune_gains(const TuneSpec& spec, const SimParams& params);

inline constexpr int kMaxCompareAtoms = 100;

struct CompareReport {
    int n_traj = 0;
    double horizon = 0.0;
    std::vector<double> times;
    std::vector<Vec3> mean_sme;
    std::vector<Vec3> mean_moment;     // over moment runs that did not abort
    std::vector<Vec3> deviation;       // |mean_sme - mean_moment| per axis
    Vec3 max_deviation{};
    double max_deviation_all = 0.0;
    std::vector<double> mean_commutator_residual;
    double max_commutator_residual = 0.0;
    int moment_aborts = 0;
    std::vector<std::uint64_t> seeds;
};

// Both engines are driven by the same innovation sequence per trajectory.
// Only SME ensemble means are reported when every moment run aborted.
// Throws std::invalid_argument when N exceeds kMaxCompareAtoms.
CompareReport compare_engines(const SimParams& params, const std::optional<ControlLaw>& law,
                              int n_traj, double horizon, const RunOptions& options = {});

inline constexpr double kCollapseThreshold = 0.99;
inline constexpr double kMaxUncollapsedFraction = 0.05;

struct CollapseReport {
    int n_traj = 0;
    std::vector<int> histogram;       // per Dicke index k (S^z eigenvalue N - 2k)
    std::vector<double> eigenvalues;  // N - 2k
    std::vector<double> born;         // |a_k|^2 of the initial state
    double tv_distance = 0.0;         // over collapsed trajectories
    int uncollapsed = 0;
    double uncollapsed_fraction = 0.0;
    bool failed = false;  // uncollapsed fraction above kMaxUncollapsedFraction
    std::vector<double> terminal_purity;
    std::vector<double> terminal_variance;
    std::vector<std::string> warnings;
    std::vector<std::uint64_t> seeds;
};

// Collapse time scale 1/(4 B^2 eta S0), S0 = Var(S^z) of the initial state;
// infinite for an eigenstate.
double collapse_time_scale(const SimParams& p, const PureState& initial);

// SME without feedback from `initial`; each terminal state is assigned to its
// dominant Dicke population when that exceeds kCollapseThreshold.
CollapseReport collapse_statistics(const SimParams& params, const PureState& initial,
                                   int n_traj, const RunOptions& options = {});

}  // namespace qfb

#endif  // QFB_HARNESS_HPP

#ifndef QFB_TRAJECTORY_HPP
#define QFB_TRAJECTORY_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qfb/control.hpp"
#include "qfb/moment_state.hpp"
#include "qfb/params.hpp"

namespace qfb {

// Stepping scheme of the SME engine.
//   PositiveSplit: exact measurement/dephasing factor for the diagonal S^z
//     channel followed by a Cayley (unitary) step of the Hamiltonian. Keeps
//     rho positive and Hermitian for any dt.
//   EulerMaruyama: the literal Euler-Maruyama update of sme_step.
enum class SmeScheme { PositiveSplit, EulerMaruyama };

std::string to_string(SmeScheme s);
SmeScheme sme_scheme_from_string(const std::string& s);

// Per-run switches that are not physical parameters.
struct RunOptions {
    int sample_stride = 1;           // record every n-th step (the final step is always kept)
    int feedback_delay_steps = 0;    // u at step n uses moments from step n - delay
    bool initconds_literal_paper = false;  // moment engine: <s^y s^z>_0 = i instead of i/N
    int psd_check_stride = 1;        // SME: check positivity every n-th sample, 0 disables
    SmeScheme sme_scheme = SmeScheme::PositiveSplit;
    std::optional<TargetSpec> target;
};

void validate_options(const RunOptions& o);

// One Wiener increment dw ~ Normal(0, dt) per integrator step.
struct InnovationSequence {
    std::vector<double> increments;
    std::uint64_t seed = 0;
    double dt = 0.0;
};

InnovationSequence generate_innovations(std::uint64_t seed, double dt, std::size_t steps);

// Stream seed for trajectory `index` of an ensemble. Distinct indices give
// statistically independent streams; the map is a pure function.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<MomentState> moments;
    std::vector<Vec3> controls;
    std::vector<double> sample_dw;    // Wiener increment accumulated since the previous sample
    std::vector<double> variance_sz;  // unnormalized Var(S^z)
    std::vector<double> lyapunov;     // empty without a target
    std::vector<double> purity;       // SME only
    std::vector<double> density_lyapunov;      // SME only, with a target
    std::vector<double> commutator_residual;   // moment engine only

    std::vector<double> innovations;  // every step
    std::vector<double> step_sz;      // unnormalized <S^z> at the start of every step

    SimParams params;
    std::optional<ControlLaw> law;
    RunOptions options;
    Engine engine = Engine::Moment;
    std::uint64_t seed = 0;

    std::size_t size() const { return times.size(); }
};

}  // namespace qfb

#endif  // QFB_TRAJECTORY_HPP

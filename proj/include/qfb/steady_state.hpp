// Steady-state statistics of a single trajectory after its transient.

#ifndef QFB_STEADY_STATE_HPP
#define QFB_STEADY_STATE_HPP

#include <cstddef>

#include "qfb/control.hpp"
#include "qfb/trajectory.hpp"

namespace qfb {

struct SteadyState {
    Vec3 mean{};
    Vec3 sigma{};             // per-axis standard deviation over the steady segment
    double transient_end = 0.0;
    bool fallback = false;    // detection failed; the final 25% of the run was used
    std::size_t samples = 0;
    // Fraction of consecutive steady-segment samples along which V decreased;
    // -1 when the record has no target.
    double negative_v_drift_fraction = -1.0;
};

inline constexpr double kDefaultSteadyWindow = 10.0;

// Transient detection: windows of length `window` are laid end to end from
// t = 0. The transient ends at the start of the first pair of adjacent
// windows whose means differ by at most twice the standard error of their
// difference. The monitored signal is V when the record carries a target,
// otherwise each first moment (all three must settle). The standard error is
// taken from ten batch means of the later window, counted twice (sqrt 2), so
// a trend inside the earlier window does not pass for noise. Differences
// below 1e-6 always count as settled. Statistics are taken from the
// transient end to the end of the run.
//
// Throws std::invalid_argument when `window` is not positive or exceeds the
// recorded time span.
SteadyState steady_state_estimate(const TrajectoryRecord& traj,
                                  double window = kDefaultSteadyWindow);

}  // namespace qfb

#endif  // QFB_STEADY_STATE_HPP

// Closed moment equations for the normalized spin s = S/N under the same
// measurement-and-feedback dynamics as the SME engine. Third-order moments
// are factorized, <s^i s^j s^k> ~ <s^i s^j><s^k>, and the second-order
// equations carry no noise term. The printed system is integrated as is.

#ifndef QFB_MOMENT_ENGINE_HPP
#define QFB_MOMENT_ENGINE_HPP

#include <optional>

#include "qfb/control.hpp"
#include "qfb/moment_state.hpp"
#include "qfb/params.hpp"
#include "qfb/trajectory.hpp"

namespace qfb {

// x-polarized coherent state: <s^x> = <s^x^2> = 1, <s^y^2> = <s^z^2> = 1/N,
// <s^y s^z> = i/N (or i with yz_equals_i).
MomentState initial_moments(int n_atoms, bool yz_equals_i = false);

// Drift per unit time of all nine moments.
MomentState moment_drift(const MomentState& m, const Vec3& u, const SimParams& p);

// Coefficients of dw in d<s^x>, d<s^y>, d<s^z>.
Vec3 moment_diffusion(const MomentState& m, const SimParams& p);

// max(|Im<s^y s^z> - <s^x>/N|, |Im<s^x s^z> + <s^y>/N|, |Im<s^x s^y> - <s^z>/N|);
// zero for any moments that come from an actual state.
double commutator_residual(const MomentState& m, int n_atoms);

// Any |moment| above this aborts the run.
inline constexpr double kDivergenceBound = 10.0;

TrajectoryRecord simulate_moments(const SimParams& p, const std::optional<ControlLaw>& law,
                                  const InnovationSequence* innovations = nullptr,
                                  const RunOptions& options = {});

}  // namespace qfb

#endif  // QFB_MOMENT_ENGINE_HPP

// Conditional stochastic master equation for a collective spin under
// continuous S^z measurement with feedback:
//
//   d rho = -i [G S^z + g N + H_f, rho] dt + A D[S^z] rho dt + sqrt(eta) B H[S^z] rho dw
//
// with H_f = u_x S^x + u_y S^y + u_z S^z.

#ifndef QFB_SME_HPP
#define QFB_SME_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include "qfb/control.hpp"
#include "qfb/params.hpp"
#include "qfb/spin.hpp"
#include "qfb/trajectory.hpp"

namespace qfb {

// D[c] rho = c rho c^+ - (c^+ c rho + rho c^+ c) / 2
CMatrix lindblad_D(const CMatrix& rho, const CMatrix& c);

// H[c] rho = c rho + rho c^+ - Tr((c + c^+) rho) rho
CMatrix stochastic_H(const CMatrix& rho, const CMatrix& c);

// G S^z + g N + u_x S^x + u_y S^y + u_z S^z, dense.
CMatrix feedback_hamiltonian(const SpinOperators& ops, const SimParams& p, const Vec3& u);

inline constexpr double kMaxTraceDrift = 0.1;
inline constexpr double kSamplePsdTolerance = 1e-6;

// One Euler-Maruyama step on dense matrices. Throws IntegratorAbort (tagged
// with step_index) when the pre-normalization trace is off by more than 0.1.
DensityMatrix sme_step(const DensityMatrix& rho, const CMatrix& hamiltonian, const SimParams& p,
                       double dw, const SpinOperators& ops, std::size_t step_index = 0);

// Positivity-preserving step for the same equation: the S^z measurement and
// dephasing factors are applied exactly (S^z is diagonal) given the record
// increment dY = dw + 2 sqrt(eta) B <S^z> dt, then the Hamiltonian
// G S^z + g N + u.S acts through its Cayley transform, which is unitary.
// First order in dt overall; used by run_sme unless EulerMaruyama is chosen.
DensityMatrix sme_step_positive(const DensityMatrix& rho, const Vec3& u, const SimParams& p,
                                double dw, const SpinOperators& ops, std::size_t step_index = 0);

struct SmeRun {
    TrajectoryRecord record;
    DensityMatrix final_state;
};

// Closed-loop simulation. When `innovations` is null the increments are drawn
// from params.seed. Identical inputs give a bit-identical record.
SmeRun run_sme(const SimParams& p, const std::optional<ControlLaw>& law,
               const DensityMatrix& initial, const InnovationSequence* innovations,
               const RunOptions& options);

TrajectoryRecord simulate_sme(const SimParams& p, const std::optional<ControlLaw>& law,
                              const DensityMatrix& initial,
                              const InnovationSequence* innovations = nullptr,
                              const RunOptions& options = {});

// Simulated homodyne photocurrent per step: dy = 2 sqrt(eta) B <S^z> dt + dw.
// eta = 0 is accepted here and yields the bare noise.
std::vector<double> measurement_record(const TrajectoryRecord& traj, const SimParams& p);

// Runs the filter on a photocurrent, recovering each innovation as
// dw = dy - 2 sqrt(eta) B <S^z> dt from the current conditional state.
SmeRun filter_measurement_record(const SimParams& p, const std::optional<ControlLaw>& law,
                                 const DensityMatrix& initial, const std::vector<double>& dy,
                                 const RunOptions& options = {});

// 1/2 Tr[(rho - rho_f)^2]
double density_lyapunov(const DensityMatrix& rho, const DensityMatrix& target);

// Coherent state pointing along the target Bloch vector (maximally mixed for
// the zero vector).
DensityMatrix target_density(int n_atoms, const TargetSpec& target);

}  // namespace qfb

#endif  // QFB_SME_HPP

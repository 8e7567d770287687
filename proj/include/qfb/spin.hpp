// Collective spin algebra on the symmetric (Dicke) subspace of N two-level atoms.
//
// Basis |k>, k = 0..N, counts the atoms in component 2, so that
//   S^z|k> = (N - 2k)|k>,   S^x = b1^+ b2 + b2^+ b1,   S^y = -i b1^+ b2 + i b2^+ b1.
// These operators are twice the usual angular momentum: [S^j, S^k] = 2i eps_jkl S^l.

#ifndef QFB_SPIN_HPP
#define QFB_SPIN_HPP

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "qfb/moment_state.hpp"

namespace qfb {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct SpinOperators {
    int n_atoms = 0;
    CMatrix sx, sy, sz;
    CMatrix number_op;

    // Products used by moment extraction, built once.
    CMatrix sx2, sy2, sz2, sxsz, sysz, sxsy;

    // sz[k] = N - 2k and off[k] = <k-1|S^x|k> = sqrt(k (N - k + 1)) (off[0] unused).
    std::vector<double> sz_diag;
    std::vector<double> ladder;

    int dim() const { return n_atoms + 1; }
};

// Throws std::invalid_argument for n_atoms < 1.
SpinOperators build_spin_operators(int n_atoms);

struct PureState {
    int n_atoms = 0;
    CVector amplitudes;
};

struct DensityMatrix {
    int n_atoms = 0;
    CMatrix rho;
};

// Binomial amplitudes C(N,k)^(1/2) cos(theta/2)^(N-k) (e^{i phi} sin(theta/2))^k.
PureState spin_coherent_state(int n_atoms, double polar_angle, double azimuth);
PureState dicke_state(int n_atoms, int k);
// Normalizes the given amplitudes; throws on zero norm or wrong length.
PureState make_pure_state(int n_atoms, const CVector& amplitudes);

DensityMatrix to_density(const PureState& psi);
DensityMatrix maximally_mixed(int n_atoms);

// Tr(op rho). Throws std::invalid_argument on dimension mismatch.
cplx expectation(const DensityMatrix& state, const CMatrix& op);

MomentState moments_from_density(const DensityMatrix& state, const SpinOperators& ops);

// Unnormalized variance of S^z; tiny negative round-off is clipped to 0.
double variance_sz(const DensityMatrix& state, const SpinOperators& ops);

double purity(const DensityMatrix& state);

struct DensityReport {
    double hermiticity_deviation = 0.0;  // max |rho - rho^+| element
    double trace_deviation = 0.0;        // |Tr rho - 1|
    double min_eigenvalue = 0.0;
    bool hermitian_ok = true;
    bool trace_ok = true;
    bool psd_ok = true;

    bool ok() const { return hermitian_ok && trace_ok && psd_ok; }
};

inline constexpr double kTolHermitian = 1e-10;
inline constexpr double kTolTrace = 1e-10;
inline constexpr double kTolPsd = 1e-8;

DensityReport validate_density(const DensityMatrix& state, double tol_psd = kTolPsd);

// Cheap test for lambda_min(rho) >= -tol via Cholesky of rho + tol*I.
bool is_psd_within(const CMatrix& rho, double tol);

}  // namespace qfb

#endif  // QFB_SPIN_HPP

#include "qfb/spin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qfb {

namespace {

void require_atoms(int n_atoms) {
    if (n_atoms < 1) {
        throw std::invalid_argument("n_atoms must be >= 1, got " + std::to_string(n_atoms));
    }
}

void require_dim(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols()) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                    "x" + std::to_string(b.cols()));
    }
}

// Tr(A B) without forming the product.
cplx trace_of_product(const CMatrix& a, const CMatrix& b) {
    return (a.transpose().cwiseProduct(b)).sum();
}

}  // namespace

SpinOperators build_spin_operators(int n_atoms) {
    require_atoms(n_atoms);
    const int n = n_atoms + 1;
    const double big_n = n_atoms;

    SpinOperators ops;
    ops.n_atoms = n_atoms;
    ops.sx = CMatrix::Zero(n, n);
    ops.sy = CMatrix::Zero(n, n);
    ops.sz = CMatrix::Zero(n, n);
    ops.number_op = CMatrix::Identity(n, n) * big_n;
    ops.sz_diag.resize(n);
    ops.ladder.assign(n, 0.0);

    for (int k = 0; k < n; ++k) {
        ops.sz_diag[k] = big_n - 2.0 * k;
        ops.sz(k, k) = ops.sz_diag[k];
    }
    // b1^+ b2 |k> = sqrt(k (N-k+1)) |k-1>
    for (int k = 1; k < n; ++k) {
        const double c = std::sqrt(static_cast<double>(k) * (big_n - k + 1.0));
        ops.ladder[k] = c;
        ops.sx(k - 1, k) = c;
        ops.sx(k, k - 1) = c;
        ops.sy(k - 1, k) = cplx(0.0, -c);
        ops.sy(k, k - 1) = cplx(0.0, c);
    }

    ops.sx2 = ops.sx * ops.sx;
    ops.sy2 = ops.sy * ops.sy;
    ops.sz2 = ops.sz * ops.sz;
    ops.sxsz = ops.sx * ops.sz;
    ops.sysz = ops.sy * ops.sz;
    ops.sxsy = ops.sx * ops.sy;
    return ops;
}

PureState spin_coherent_state(int n_atoms, double polar_angle, double azimuth) {
    require_atoms(n_atoms);
    const int n = n_atoms + 1;
    const double c = std::cos(polar_angle / 2.0);
    const double s = std::sin(polar_angle / 2.0);
    const cplx phase = std::polar(1.0, azimuth);

    PureState psi;
    psi.n_atoms = n_atoms;
    psi.amplitudes = CVector::Zero(n);
    for (int k = 0; k < n; ++k) {
        // log C(N,k) keeps large N finite
        const double log_binom =
            std::lgamma(n_atoms + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_atoms - k + 1.0);
        const double mag = std::exp(0.5 * log_binom) * std::pow(c, n_atoms - k) * std::pow(s, k);
        psi.amplitudes[k] = mag * std::pow(phase, k);
    }
    psi.amplitudes /= psi.amplitudes.norm();
    return psi;
}

PureState dicke_state(int n_atoms, int k) {
    require_atoms(n_atoms);
    if (k < 0 || k > n_atoms) {
        throw std::invalid_argument("Dicke index out of range: " + std::to_string(k));
    }
    PureState psi;
    psi.n_atoms = n_atoms;
    psi.amplitudes = CVector::Zero(n_atoms + 1);
    psi.amplitudes[k] = 1.0;
    return psi;
}

PureState make_pure_state(int n_atoms, const CVector& amplitudes) {
    require_atoms(n_atoms);
    if (amplitudes.size() != n_atoms + 1) {
        throw std::invalid_argument("amplitude vector must have length N+1");
    }
    const double norm = amplitudes.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw std::invalid_argument("amplitude vector has zero or non-finite norm");
    }
    return PureState{n_atoms, amplitudes / norm};
}

DensityMatrix to_density(const PureState& psi) {
    return DensityMatrix{psi.n_atoms, psi.amplitudes * psi.amplitudes.adjoint()};
}

DensityMatrix maximally_mixed(int n_atoms) {
    require_atoms(n_atoms);
    const int n = n_atoms + 1;
    return DensityMatrix{n_atoms, CMatrix::Identity(n, n) / static_cast<double>(n)};
}

cplx expectation(const DensityMatrix& state, const CMatrix& op) {
    require_dim(state.rho, op);
    return trace_of_product(op, state.rho);
}

MomentState moments_from_density(const DensityMatrix& state, const SpinOperators& ops) {
    require_dim(state.rho, ops.sz);
    const double n1 = 1.0 / ops.n_atoms;
    const double n2 = n1 * n1;
    const CMatrix& rho = state.rho;

    MomentState m;
    m.sx = trace_of_product(ops.sx, rho).real() * n1;
    m.sy = trace_of_product(ops.sy, rho).real() * n1;
    m.sz = trace_of_product(ops.sz, rho).real() * n1;
    m.sx2 = trace_of_product(ops.sx2, rho).real() * n2;
    m.sy2 = trace_of_product(ops.sy2, rho).real() * n2;
    m.sz2 = trace_of_product(ops.sz2, rho).real() * n2;
    m.xz = trace_of_product(ops.sxsz, rho) * n2;
    m.yz = trace_of_product(ops.sysz, rho) * n2;
    m.xy = trace_of_product(ops.sxsy, rho) * n2;
    return m;
}

double variance_sz(const DensityMatrix& state, const SpinOperators& ops) {
    if (state.rho.rows() != ops.dim()) {
        throw std::invalid_argument("dimension mismatch in variance_sz");
    }
    double mean = 0.0;
    double second = 0.0;
    for (int k = 0; k < ops.dim(); ++k) {
        const double p = state.rho(k, k).real();
        mean += p * ops.sz_diag[k];
        second += p * ops.sz_diag[k] * ops.sz_diag[k];
    }
    const double var = second - mean * mean;
    if (var < 0.0 && var > -1e-9 * std::max(1.0, second)) return 0.0;
    return var;
}

double purity(const DensityMatrix& state) { return state.rho.cwiseAbs2().sum(); }

bool is_psd_within(const CMatrix& rho, double tol) {
    const CMatrix shifted = 0.5 * (rho + rho.adjoint()) +
                            tol * CMatrix::Identity(rho.rows(), rho.cols());
    Eigen::LLT<CMatrix> llt(shifted);
    return llt.info() == Eigen::Success;
}

DensityReport validate_density(const DensityMatrix& state, double tol_psd) {
    DensityReport r;
    const CMatrix& rho = state.rho;
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
        r.hermitian_ok = r.trace_ok = r.psd_ok = false;
        r.hermiticity_deviation = r.trace_deviation = std::numeric_limits<double>::infinity();
        return r;
    }
    r.hermiticity_deviation = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    r.trace_deviation = std::abs(rho.trace() - cplx(1.0, 0.0));
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    r.hermitian_ok = r.hermiticity_deviation <= kTolHermitian;
    r.trace_ok = r.trace_deviation <= kTolTrace;
    r.psd_ok = r.min_eigenvalue >= -tol_psd;
    return r;
}

}  // namespace qfb

#include "qfb/sme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qfb {

namespace {

void require_square_pair(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
        throw std::invalid_argument("dimension mismatch between state and operator");
    }
}

// Hermitize in place from `raw`, check the trace and renormalize.
void hermitize_normalize(const CMatrix& raw, CMatrix& out, std::size_t step) {
    const Eigen::Index n = raw.rows();
    out.resize(n, n);
    double trace = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            const cplx a = 0.5 * (raw(i, j) + std::conj(raw(j, i)));
            out(i, j) = a;
            out(j, i) = std::conj(a);
        }
        out(j, j) = cplx(raw(j, j).real(), 0.0);
        trace += raw(j, j).real();
    }
    if (!std::isfinite(trace) || std::abs(trace - 1.0) > kMaxTraceDrift) {
        throw IntegratorAbort("trace drifted to " + std::to_string(trace) +
                                  " before renormalization; reduce dt",
                              step);
    }
    out /= trace;
}

double mean_sz_unnormalized(const CMatrix& rho, const SpinOperators& ops) {
    double s = 0.0;
    for (int k = 0; k < ops.dim(); ++k) s += ops.sz_diag[k] * rho(k, k).real();
    return s;
}

// Normalized <s^x>, <s^y>, <s^z> from the tridiagonal structure of S^x, S^y.
Vec3 bloch_fast(const CMatrix& rho, const SpinOperators& ops, double mean_Sz) {
    double sx = 0.0, sy = 0.0;
    for (int k = 1; k < ops.dim(); ++k) {
        const cplx r = rho(k - 1, k);
        sx += 2.0 * ops.ladder[k] * r.real();
        sy -= 2.0 * ops.ladder[k] * r.imag();
    }
    const double inv = 1.0 / ops.n_atoms;
    return {sx * inv, sy * inv, mean_Sz * inv};
}

// Same update as sme_step, exploiting that S^z is diagonal and S^x, S^y are
// tridiagonal. The g N term is applied as its own commutator so that it
// cancels exactly.
void structured_step(CMatrix& rho, CMatrix& scratch, const SpinOperators& ops,
                     const SimParams& p, const Vec3& u, double mean_Sz, double dw,
                     std::size_t step) {
    const int n = ops.dim();
    const auto& lam = ops.sz_diag;
    const auto& c = ops.ladder;
    const cplx w(u[kX], -u[kY]);
    const cplx wc = std::conj(w);
    const double gz = p.G + u[kZ];
    const double gn = p.g * ops.n_atoms;
    const double kappa = std::sqrt(p.eta) * p.B * dw;
    const double dt = p.dt;
    const cplx minus_i(0.0, -1.0);

    scratch.resize(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const cplx r = rho(i, j);
            cplx hr = (gz * lam[i]) * r;
            if (i > 0) hr += (c[i] * wc) * rho(i - 1, j);
            if (i < n - 1) hr += (c[i + 1] * w) * rho(i + 1, j);
            cplx rh = r * (gz * lam[j]);
            if (j > 0) rh += rho(i, j - 1) * (c[j] * w);
            if (j < n - 1) rh += rho(i, j + 1) * (c[j + 1] * wc);
            const cplx comm = (hr - rh) + (gn * r - r * gn);
            const double gap = lam[i] - lam[j];
            const cplx diss = (-0.5 * p.A * gap * gap) * r;
            const cplx meas = (lam[i] + lam[j] - 2.0 * mean_Sz) * r;
            scratch(i, j) = r + (minus_i * comm + diss) * dt + kappa * meas;
        }
    }
    hermitize_normalize(scratch, rho, step);
}

// Complex tridiagonal solver (Thomas algorithm). The matrices factored here
// are I + i tau H with H Hermitian, whose Hermitian part is the identity, so
// elimination without pivoting cannot break down.
class TridiagonalSolver {
public:
    void factor(const std::vector<cplx>& sub, const std::vector<cplx>& diag,
                const std::vector<cplx>& sup) {
        const std::size_t n = diag.size();
        sub_ = sub;
        inv_pivot_.resize(n);
        sup_scaled_.assign(n, cplx{});
        cplx pivot = diag[0];
        inv_pivot_[0] = 1.0 / pivot;
        for (std::size_t i = 1; i < n; ++i) {
            sup_scaled_[i - 1] = sup[i - 1] * inv_pivot_[i - 1];
            pivot = diag[i] - sub[i] * sup_scaled_[i - 1];
            inv_pivot_[i] = 1.0 / pivot;
        }
    }

    // Solves in place for one column.
    template <class Col>
    void solve(Col&& x) const {
        const std::size_t n = inv_pivot_.size();
        x[0] *= inv_pivot_[0];
        for (std::size_t i = 1; i < n; ++i) x[i] = (x[i] - sub_[i] * x[i - 1]) * inv_pivot_[i];
        for (std::size_t i = n - 1; i-- > 0;) x[i] -= sup_scaled_[i] * x[i + 1];
    }

private:
    std::vector<cplx> sub_, inv_pivot_, sup_scaled_;
};

// Holds the per-run constants and buffers of the positivity-preserving step.
class PositiveSplitStepper {
public:
    PositiveSplitStepper(const SpinOperators& ops, const SimParams& p)
        : ops_(ops), p_(p), n_(ops.dim()), a_(std::sqrt(p.eta) * p.B) {
        // exp(a(l_i+l_j)dY - a^2(l_i+l_j)^2 dt/2 - A(l_i-l_j)^2 dt/2)
        //   = e_i e_j exp((A - a^2) dt l_i l_j)
        const double c = (p.A - a_ * a_) * p.dt;
        dephase_ = Eigen::MatrixXd::Ones(n_, n_);
        if (c != 0.0) {
            for (int j = 0; j < n_; ++j) {
                for (int i = 0; i < n_; ++i) {
                    dephase_(i, j) = std::exp(c * ops.sz_diag[i] * ops.sz_diag[j]);
                }
            }
        }
        factor_.resize(n_);
        diag_phase_.resize(n_);
        work_.resize(n_, n_);
        h_diag_.resize(n_);
        h_sub_.assign(n_, cplx{});
        h_sup_.assign(n_, cplx{});
        a_sub_.resize(n_);
        a_diag_.resize(n_);
        a_sup_.resize(n_);
    }

    void step(CMatrix& rho, const Vec3& u, double mean_Sz, double dw, std::size_t step) {
        const auto& lam = ops_.sz_diag;
        const double dt = p_.dt;
        const double dY = dw + 2.0 * a_ * mean_Sz * dt;

        // Exact solution of the linear (unnormalized) filter for the S^z channel.
        double shift = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < n_; ++k) {
            factor_[k] = a_ * lam[k] * dY - 0.5 * (a_ * a_ + p_.A) * lam[k] * lam[k] * dt;
            shift = std::max(shift, factor_[k]);
        }
        for (int k = 0; k < n_; ++k) factor_[k] = std::exp(factor_[k] - shift);
        for (int j = 0; j < n_; ++j) {
            for (int i = 0; i < n_; ++i) rho(i, j) *= factor_[i] * factor_[j] * dephase_(i, j);
        }

        // Cayley step of H = (G + u_z) S^z + u_x S^x + u_y S^y; g N enters as a
        // global phase on U and U^+.
        const cplx phase = std::polar(1.0, -p_.g * ops_.n_atoms * dt);
        const cplx global = phase * std::conj(phase);
        const cplx i_tau(0.0, 0.5 * dt);
        if (u[kX] == 0.0 && u[kY] == 0.0) {
            // diagonal H: U is a diagonal of unit-modulus Cayley factors
            for (int k = 0; k < n_; ++k) {
                const cplx x = i_tau * ((p_.G + u[kZ]) * lam[k]);
                diag_phase_[k] = (1.0 - x) / (1.0 + x);
            }
            for (int j = 0; j < n_; ++j) {
                const cplx right = std::conj(diag_phase_[j]) * global;
                for (int i = 0; i < n_; ++i) work_(i, j) = diag_phase_[i] * rho(i, j) * right;
            }
            finish(rho, step);
            return;
        }

        const cplx w(u[kX], -u[kY]);
        for (int k = 0; k < n_; ++k) h_diag_[k] = (p_.G + u[kZ]) * lam[k];
        for (int k = 1; k < n_; ++k) {
            h_sup_[k - 1] = ops_.ladder[k] * w;
            h_sub_[k] = ops_.ladder[k] * std::conj(w);
        }
        for (int k = 0; k < n_; ++k) {
            a_sub_[k] = i_tau * h_sub_[k];
            a_diag_[k] = 1.0 + i_tau * h_diag_[k];
            a_sup_[k] = i_tau * h_sup_[k];
        }
        solver_.factor(a_sub_, a_diag_, a_sup_);

        apply_cayley(rho, work_);          // U rho
        adjoint_ = work_.adjoint();
        apply_cayley(adjoint_, work_);     // U rho U^+
        work_ *= global;
        finish(rho, step);
    }

private:
    // Hermitize work_ into rho and renormalize.
    void finish(CMatrix& rho, std::size_t step) {
        double trace = 0.0;
        for (int j = 0; j < n_; ++j) {
            for (int i = 0; i < j; ++i) {
                const cplx v = 0.5 * (work_(i, j) + std::conj(work_(j, i)));
                rho(i, j) = v;
                rho(j, i) = std::conj(v);
            }
            rho(j, j) = cplx(work_(j, j).real(), 0.0);
            trace += work_(j, j).real();
        }
        if (!std::isfinite(trace) || !(trace > 0.0)) {
            throw IntegratorAbort("conditional state lost its norm; reduce dt", step);
        }
        rho /= trace;
    }

    // out = (I + i dt/2 H)^{-1} (I - i dt/2 H) in
    void apply_cayley(const CMatrix& in, CMatrix& out) const {
        const cplx i_tau(0.0, 0.5 * p_.dt);
        out.resize(n_, n_);
        for (int j = 0; j < n_; ++j) {
            const cplx* x = &in(0, j);
            cplx* y = &out(0, j);
            for (int i = 0; i < n_; ++i) {
                cplx hv = h_diag_[i] * x[i];
                if (i > 0) hv += h_sub_[i] * x[i - 1];
                if (i < n_ - 1) hv += h_sup_[i] * x[i + 1];
                y[i] = x[i] - i_tau * hv;
            }
            solver_.solve(y);
        }
    }

    const SpinOperators& ops_;
    SimParams p_;
    int n_;
    double a_;
    Eigen::MatrixXd dephase_;
    std::vector<double> factor_, h_diag_;
    std::vector<cplx> diag_phase_, h_sub_, h_sup_, a_sub_, a_diag_, a_sup_;
    TridiagonalSolver solver_;
    CMatrix work_, adjoint_;
};

void check_initial(const DensityMatrix& initial, const SimParams& p) {
    if (initial.rho.rows() != p.n_atoms + 1 || initial.rho.cols() != p.n_atoms + 1) {
        throw std::invalid_argument("initial state dimension does not match params.n_atoms");
    }
    const DensityReport rep = validate_density(initial);
    if (!rep.ok()) {
        throw std::invalid_argument("initial state is not a valid density matrix");
    }
}

template <class NextDw>
SmeRun integrate(const SimParams& p, const std::optional<ControlLaw>& law,
                 const DensityMatrix& initial, const RunOptions& options, std::uint64_t seed,
                 NextDw next_dw) {
    validate_params(p);
    validate_options(options);
    if (law) validate_law(*law);
    check_initial(initial, p);

    const SpinOperators ops = build_spin_operators(p.n_atoms);
    const std::size_t n_steps = step_count(p);
    const auto stride = static_cast<std::size_t>(options.sample_stride);
    const std::size_t n_samples = n_steps / stride + 1 + (n_steps % stride ? 1 : 0);

    SmeRun run;
    TrajectoryRecord& rec = run.record;
    rec.params = p;
    rec.law = law;
    rec.options = options;
    rec.engine = Engine::Sme;
    rec.seed = seed;
    rec.times.reserve(n_samples);
    rec.moments.reserve(n_samples);
    rec.controls.reserve(n_samples);
    rec.sample_dw.reserve(n_samples);
    rec.variance_sz.reserve(n_samples);
    rec.purity.reserve(n_samples);
    rec.innovations.resize(n_steps);
    rec.step_sz.resize(n_steps);

    std::optional<DensityMatrix> rho_target;
    if (options.target) rho_target = target_density(p.n_atoms, *options.target);

    DensityMatrix state{p.n_atoms, initial.rho};
    CMatrix scratch;
    PositiveSplitStepper stepper(ops, p);
    const std::size_t delay = static_cast<std::size_t>(options.feedback_delay_steps);
    std::vector<Vec3> history(delay + 1);
    double dw_since_sample = 0.0;
    std::size_t samples_taken = 0;

    for (std::size_t step = 0;; ++step) {
        const double mean_Sz = mean_sz_unnormalized(state.rho, ops);
        const Vec3 bloch = bloch_fast(state.rho, ops, mean_Sz);
        history[step % (delay + 1)] = bloch;
        Vec3 u{};
        if (law) {
            const std::size_t src = step >= delay ? step - delay : 0;
            u = control_signal(*law, history[src % (delay + 1)]);
        }

        if (step % stride == 0 || step == n_steps) {
            const MomentState m = moments_from_density(state, ops);
            rec.times.push_back(static_cast<double>(step) * p.dt);
            rec.moments.push_back(m);
            rec.controls.push_back(u);
            rec.sample_dw.push_back(dw_since_sample);
            rec.variance_sz.push_back(variance_sz(state, ops));
            rec.purity.push_back(purity(state));
            if (options.target) {
                rec.lyapunov.push_back(lyapunov_distance(m, *options.target));
                rec.density_lyapunov.push_back(density_lyapunov(state, *rho_target));
            }
            dw_since_sample = 0.0;
            if (options.psd_check_stride > 0 &&
                samples_taken % static_cast<std::size_t>(options.psd_check_stride) == 0 &&
                !is_psd_within(state.rho, kSamplePsdTolerance)) {
                throw IntegratorAbort("density matrix lost positivity; reduce dt", step);
            }
            ++samples_taken;
        }
        if (step == n_steps) break;

        const double dw = next_dw(step, mean_Sz);
        rec.innovations[step] = dw;
        rec.step_sz[step] = mean_Sz;
        dw_since_sample += dw;
        if (options.sme_scheme == SmeScheme::PositiveSplit) {
            stepper.step(state.rho, u, mean_Sz, dw, step);
        } else {
            structured_step(state.rho, scratch, ops, p, u, mean_Sz, dw, step);
        }
    }
    run.final_state = std::move(state);
    return run;
}

}  // namespace

CMatrix lindblad_D(const CMatrix& rho, const CMatrix& c) {
    require_square_pair(rho, c);
    const CMatrix cd = c.adjoint();
    const CMatrix cdc = cd * c;
    return c * rho * cd - 0.5 * (cdc * rho + rho * cdc);
}

CMatrix stochastic_H(const CMatrix& rho, const CMatrix& c) {
    require_square_pair(rho, c);
    const CMatrix cd = c.adjoint();
    const cplx mean = ((c + cd) * rho).trace();
    return c * rho + rho * cd - mean * rho;
}

CMatrix feedback_hamiltonian(const SpinOperators& ops, const SimParams& p, const Vec3& u) {
    return (p.G + u[kZ]) * ops.sz + p.g * ops.number_op + u[kX] * ops.sx + u[kY] * ops.sy;
}

DensityMatrix sme_step(const DensityMatrix& rho, const CMatrix& hamiltonian, const SimParams& p,
                       double dw, const SpinOperators& ops, std::size_t step_index) {
    require_square_pair(rho.rho, hamiltonian);
    require_square_pair(rho.rho, ops.sz);
    const cplx minus_i(0.0, -1.0);
    const CMatrix comm = hamiltonian * rho.rho - rho.rho * hamiltonian;
    const CMatrix raw = rho.rho + (minus_i * comm + p.A * lindblad_D(rho.rho, ops.sz)) * p.dt +
                        (std::sqrt(p.eta) * p.B * dw) * stochastic_H(rho.rho, ops.sz);
    DensityMatrix out{rho.n_atoms, CMatrix()};
    hermitize_normalize(raw, out.rho, step_index);
    return out;
}

DensityMatrix sme_step_positive(const DensityMatrix& rho, const Vec3& u, const SimParams& p,
                                double dw, const SpinOperators& ops, std::size_t step_index) {
    require_square_pair(rho.rho, ops.sz);
    DensityMatrix out{rho.n_atoms, rho.rho};
    double mean_Sz = 0.0;
    for (int k = 0; k < ops.dim(); ++k) mean_Sz += ops.sz_diag[k] * rho.rho(k, k).real();
    PositiveSplitStepper stepper(ops, p);
    stepper.step(out.rho, u, mean_Sz, dw, step_index);
    return out;
}

SmeRun run_sme(const SimParams& p, const std::optional<ControlLaw>& law,
               const DensityMatrix& initial, const InnovationSequence* innovations,
               const RunOptions& options) {
    validate_params(p);
    const std::size_t n_steps = step_count(p);
    InnovationSequence generated;
    if (innovations == nullptr) {
        generated = generate_innovations(p.seed, p.dt, n_steps);
        innovations = &generated;
    } else if (innovations->increments.size() < n_steps) {
        throw std::invalid_argument("innovation sequence shorter than the number of steps");
    }
    const auto& inc = innovations->increments;
    return integrate(p, law, initial, options, innovations->seed,
                     [&inc](std::size_t step, double) { return inc[step]; });
}

TrajectoryRecord simulate_sme(const SimParams& p, const std::optional<ControlLaw>& law,
                              const DensityMatrix& initial, const InnovationSequence* innovations,
                              const RunOptions& options) {
    return run_sme(p, law, initial, innovations, options).record;
}

std::vector<double> measurement_record(const TrajectoryRecord& traj, const SimParams& p) {
    if (traj.step_sz.size() != traj.innovations.size()) {
        throw std::invalid_argument("trajectory lacks per-step <S^z>; not an SME record");
    }
    const double gain = 2.0 * std::sqrt(p.eta) * p.B * p.dt;
    std::vector<double> dy(traj.innovations.size());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        dy[i] = gain * traj.step_sz[i] + traj.innovations[i];
    }
    return dy;
}

SmeRun filter_measurement_record(const SimParams& p, const std::optional<ControlLaw>& law,
                                 const DensityMatrix& initial, const std::vector<double>& dy,
                                 const RunOptions& options) {
    validate_params(p);
    if (dy.size() < step_count(p)) {
        throw std::invalid_argument("measurement record shorter than the number of steps");
    }
    const double gain = 2.0 * std::sqrt(p.eta) * p.B * p.dt;
    return integrate(p, law, initial, options, p.seed, [&](std::size_t step, double mean_Sz) {
        return dy[step] - gain * mean_Sz;
    });
}

double density_lyapunov(const DensityMatrix& rho, const DensityMatrix& target) {
    require_square_pair(rho.rho, target.rho);
    return 0.5 * (rho.rho - target.rho).cwiseAbs2().sum();
}

DensityMatrix target_density(int n_atoms, const TargetSpec& target) {
    const auto& s = target.bloch_target;
    const double r = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
    if (r == 0.0) return maximally_mixed(n_atoms);
    const double theta = std::acos(std::clamp(s[2] / r, -1.0, 1.0));
    const double phi = std::atan2(s[1], s[0]);
    return to_density(spin_coherent_state(n_atoms, theta, phi));
}

}  // namespace qfb

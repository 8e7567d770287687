#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qfb/sme.hpp"

using namespace qfb;

namespace {

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

DensityMatrix x_state(int n) { return to_density(spin_coherent_state(n, M_PI / 2, 0.0)); }

DensityMatrix random_density(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    CMatrix m(n + 1, n + 1);
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) m(i, j) = cplx(nd(rng), nd(rng));
    }
    CMatrix rho = m * m.adjoint();
    rho /= rho.trace();
    return {n, rho};
}

SimParams small_params(int n, double t_final, double dt = 0.01) {
    SimParams p;
    p.n_atoms = n;
    p.t_final = t_final;
    p.dt = dt;
    return p;
}

double max_moment_diff(const MomentState& a, const MomentState& b) {
    return std::max({std::abs(a.sx - b.sx), std::abs(a.sy - b.sy), std::abs(a.sz - b.sz),
                     std::abs(a.sx2 - b.sx2), std::abs(a.sy2 - b.sy2), std::abs(a.sz2 - b.sz2),
                     std::abs(a.xz - b.xz), std::abs(a.yz - b.yz), std::abs(a.xy - b.xy)});
}

}  // namespace

TEST(LindbladD, DickeProjectorIsStationary) {
    const auto ops = build_spin_operators(6);
    for (int k = 0; k <= 6; ++k) {
        EXPECT_LT(max_abs(lindblad_D(to_density(dicke_state(6, k)).rho, ops.sz)), 1e-14);
    }
}

TEST(LindbladD, MatrixUnitScalesByHalfSquaredGap) {
    const int n = 5;
    const auto ops = build_spin_operators(n);
    for (int k = 0; k <= n; ++k) {
        for (int m = 0; m <= n; ++m) {
            if (k == m) continue;
            CMatrix e = CMatrix::Zero(n + 1, n + 1);
            e(k, m) = cplx(0.3, -0.7);
            const CMatrix d = lindblad_D(e, ops.sz);
            const double gap = 2.0 * (m - k);
            EXPECT_NEAR(std::abs(d(k, m) - (-0.5 * gap * gap) * e(k, m)), 0.0, 1e-12);
            EXPECT_NEAR(max_abs(d) - std::abs(d(k, m)), 0.0, 1e-12);
        }
    }
}

TEST(LindbladD, SpinHalfXProjector) {
    const auto ops = build_spin_operators(1);
    const CMatrix rho = x_state(1).rho;
    const CMatrix d = lindblad_D(rho, ops.sz);
    EXPECT_NEAR(std::abs(d(0, 1) - (-2.0) * rho(0, 1)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(d(1, 0) - (-2.0) * rho(1, 0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(d(0, 0)), 0.0, 1e-14);
}

TEST(LindbladD, TracelessAndHermitian) {
    const auto ops = build_spin_operators(7);
    for (std::uint64_t s = 0; s < 4; ++s) {
        const CMatrix rho = random_density(7, s).rho;
        for (const CMatrix* c : {&ops.sz, &ops.sx, &ops.sy}) {
            const CMatrix d = lindblad_D(rho, *c);
            EXPECT_LT(std::abs(d.trace()), 1e-10);
            EXPECT_LT(max_abs(d - d.adjoint()), 1e-10);
        }
    }
    EXPECT_THROW(lindblad_D(random_density(3, 1).rho, ops.sz), std::invalid_argument);
}

TEST(StochasticH, Examples) {
    const int n = 6;
    const auto ops = build_spin_operators(n);
    for (int k = 0; k <= n; ++k) {
        EXPECT_LT(max_abs(stochastic_H(to_density(dicke_state(n, k)).rho, ops.sz)), 1e-12);
    }
    const CMatrix mixed = maximally_mixed(n).rho;
    EXPECT_LT(max_abs(stochastic_H(mixed, ops.sz) - (ops.sz * mixed + mixed * ops.sz)), 1e-14);
    for (std::uint64_t s = 0; s < 4; ++s) {
        EXPECT_LT(std::abs(stochastic_H(random_density(n, s).rho, ops.sz).trace()), 1e-10);
    }
}

TEST(SmeStep, ZeroNoiseTinyStepIsIdentity) {
    const int n = 4;
    const auto ops = build_spin_operators(n);
    auto p = small_params(n, 1.0, 1e-12);
    const auto rho = x_state(n);
    const auto out = sme_step(rho, feedback_hamiltonian(ops, p, {0.3, 0.0, 0.1}), p, 0.0, ops);
    EXPECT_LT(max_abs(out.rho - rho.rho), 1e-9);
    EXPECT_TRUE(validate_density(out).ok());
}

TEST(SmeStep, HugeIncrementIsRejectedWithStepIndex) {
    const int n = 4;
    const auto ops = build_spin_operators(n);
    auto p = small_params(n, 1.0);
    try {
        sme_step(x_state(n), feedback_hamiltonian(ops, p, {}), p, std::nan(""), ops, 17);
        FAIL() << "expected IntegratorAbort";
    } catch (const IntegratorAbort& e) {
        EXPECT_EQ(e.step(), 17u);
    }
}

TEST(SmeStep, FreeRotationMatchesCosine) {
    const int n = 3;
    auto p = small_params(n, 1.0, 1e-3);
    p.A = 0.0;
    p.B = 0.0;
    p.G = 0.5;
    for (auto scheme : {SmeScheme::EulerMaruyama, SmeScheme::PositiveSplit}) {
        RunOptions o;
        o.sme_scheme = scheme;
        o.psd_check_stride = 0;
        // Euler inflates the rotation amplitude by about (2G)^2 dt t / 2; the
        // Cayley step is unitary with a phase error of order (2G)^3 dt^2 t.
        const double tol = scheme == SmeScheme::EulerMaruyama ? 1e-3 : 1e-6;
        const auto rec = simulate_sme(p, std::nullopt, x_state(n), nullptr, o);
        for (std::size_t i = 0; i < rec.size(); i += 100) {
            const double t = rec.times[i];
            EXPECT_NEAR(rec.moments[i].sx, std::cos(2 * p.G * t), tol) << to_string(scheme);
            EXPECT_NEAR(rec.moments[i].sy, std::sin(2 * p.G * t), tol) << to_string(scheme);
        }
    }
}

TEST(SmeStep, DenseAndStructuredEulerAgree) {
    const int n = 6;
    auto p = small_params(n, 0.5, 1e-3);
    p.g = 0.7;
    const auto ops = build_spin_operators(n);
    const auto law = ControlLaw::single_gain(kX, kZ, -3.0, 0.2);
    RunOptions o;
    o.sme_scheme = SmeScheme::EulerMaruyama;
    o.psd_check_stride = 0;
    const auto inn = generate_innovations(5, p.dt, step_count(p));
    const auto rec = simulate_sme(p, law, x_state(n), &inn, o);

    DensityMatrix rho = x_state(n);
    for (std::size_t s = 0; s < step_count(p); ++s) {
        const auto m = moments_from_density(rho, ops);
        EXPECT_LT(max_moment_diff(m, rec.moments[s]), 1e-11) << s;
        const Vec3 u = control_signal(law, m);
        rho = sme_step(rho, feedback_hamiltonian(ops, p, u), p, inn.increments[s], ops, s);
    }
    EXPECT_LT(max_moment_diff(moments_from_density(rho, ops), rec.moments.back()), 1e-11);
}

TEST(SmeStep, PositiveStepMatchesRunner) {
    const int n = 5;
    auto p = small_params(n, 0.2, 1e-2);
    const auto ops = build_spin_operators(n);
    const auto law = ControlLaw::single_gain(kY, kZ, 4.0);
    const auto inn = generate_innovations(9, p.dt, step_count(p));
    const auto rec = simulate_sme(p, law, x_state(n), &inn);
    DensityMatrix rho = x_state(n);
    for (std::size_t s = 0; s < step_count(p); ++s) {
        const Vec3 u = control_signal(law, moments_from_density(rho, ops));
        rho = sme_step_positive(rho, u, p, inn.increments[s], ops, s);
    }
    EXPECT_LT(max_moment_diff(moments_from_density(rho, ops), rec.moments.back()), 1e-12);
}

TEST(SmeStep, SplitAndEulerConvergeTogether) {
    // Same Brownian path refined by summing increments; the two schemes share
    // their strong limit, so their gap shrinks with dt.
    const int n = 4;
    const double t_final = 1.0;
    const std::size_t fine_steps = 10000;
    const auto fine = generate_innovations(3, t_final / fine_steps, fine_steps);
    const auto law = ControlLaw::single_gain(kX, kZ, -2.0);
    std::vector<double> gaps;
    for (std::size_t steps : {100u, 1000u, 10000u}) {
        auto p = small_params(n, t_final, t_final / steps);
        InnovationSequence coarse;
        coarse.dt = p.dt;
        const std::size_t r = fine_steps / steps;
        for (std::size_t i = 0; i < steps; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < r; ++j) s += fine.increments[i * r + j];
            coarse.increments.push_back(s);
        }
        RunOptions euler;
        euler.sme_scheme = SmeScheme::EulerMaruyama;
        euler.psd_check_stride = 0;
        euler.sample_stride = static_cast<int>(steps);
        RunOptions split = euler;
        split.sme_scheme = SmeScheme::PositiveSplit;
        const auto a = simulate_sme(p, law, x_state(n), &coarse, euler);
        const auto b = simulate_sme(p, law, x_state(n), &coarse, split);
        gaps.push_back(max_moment_diff(a.moments.back(), b.moments.back()));
    }
    EXPECT_LT(gaps[1], gaps[0]);
    EXPECT_LT(gaps[2], gaps[1]);
    EXPECT_LT(gaps[2], 0.02);
}

TEST(SimulateSme, StateInvariantsAlongFeedbackTrajectory) {
    const int n = 10;
    auto p = small_params(n, 5.0);
    const auto ops = build_spin_operators(n);
    const auto law = ControlLaw::single_gain(kX, kZ, -14.5);
    const auto run = run_sme(p, law, x_state(n), nullptr, {});
    for (const auto& m : run.record.moments) {
        EXPECT_NEAR(m.second_moment_sum() * n * n, n * (n + 2.0), 1e-8);
    }
    const auto rep = validate_density(run.final_state);
    EXPECT_LT(rep.hermiticity_deviation, 1e-12);
    EXPECT_LT(rep.trace_deviation, 1e-12);
    EXPECT_GE(rep.min_eigenvalue, -1e-6);
    for (double pur : run.record.purity) EXPECT_LE(pur, 1.0 + 1e-9);
}

TEST(SimulateSme, RecordShapesAndStride) {
    auto p = small_params(3, 1.0);
    RunOptions o;
    o.sample_stride = 30;
    const auto rec = simulate_sme(p, std::nullopt, x_state(3), nullptr, o);
    // samples at steps 0, 30, 60, 90 and the final step 100
    ASSERT_EQ(rec.size(), 5u);
    EXPECT_DOUBLE_EQ(rec.times.back(), 1.0);
    EXPECT_EQ(rec.innovations.size(), 100u);
    EXPECT_EQ(rec.purity.size(), rec.size());
    EXPECT_TRUE(rec.lyapunov.empty());
    double total = 0.0;
    for (double d : rec.sample_dw) total += d;
    double direct = 0.0;
    for (double d : rec.innovations) direct += d;
    EXPECT_NEAR(total, direct, 1e-12);
}

TEST(SimulateSme, DeterministicReplay) {
    auto p = small_params(8, 2.0);
    p.seed = 1234;
    const auto law = ControlLaw::single_gain(kY, kZ, 8.0, 0.01);
    const auto a = simulate_sme(p, law, x_state(8));
    const auto b = simulate_sme(p, law, x_state(8));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.moments[i].sx, b.moments[i].sx);
        EXPECT_EQ(a.moments[i].xy, b.moments[i].xy);
        EXPECT_EQ(a.purity[i], b.purity[i]);
    }
    EXPECT_EQ(a.innovations, b.innovations);
}

TEST(SimulateSme, GlobalPhaseTermIsInert) {
    for (auto scheme : {SmeScheme::PositiveSplit, SmeScheme::EulerMaruyama}) {
        auto p = small_params(6, 2.0);
        p.seed = 77;
        RunOptions o;
        o.sme_scheme = scheme;
        o.psd_check_stride = 0;
        const auto law = ControlLaw::single_gain(kX, kZ, -5.0);
        std::vector<TrajectoryRecord> recs;
        for (double g : {0.0, 1.0, 10.0}) {
            p.g = g;
            recs.push_back(simulate_sme(p, law, x_state(6), nullptr, o));
        }
        for (std::size_t r = 1; r < recs.size(); ++r) {
            for (std::size_t i = 0; i < recs[0].size(); ++i) {
                EXPECT_LE(max_moment_diff(recs[0].moments[i], recs[r].moments[i]), 1e-12);
            }
        }
    }
}

TEST(SimulateSme, DephasingDecayOfEnsembleMean) {
    const int n = 10;
    auto p = small_params(n, 10.0);
    const int n_traj = 200;
    RunOptions o;
    o.sample_stride = 100;
    std::vector<double> sum, sum2;
    for (int i = 0; i < n_traj; ++i) {
        p.seed = derive_seed(42, i);
        const auto rec = simulate_sme(p, std::nullopt, x_state(n), nullptr, o);
        if (sum.empty()) sum.assign(rec.size(), 0.0), sum2.assign(rec.size(), 0.0);
        for (std::size_t k = 0; k < rec.size(); ++k) {
            sum[k] += rec.moments[k].sx;
            sum2[k] += rec.moments[k].sx * rec.moments[k].sx;
        }
    }
    for (std::size_t k = 1; k < sum.size(); ++k) {
        const double t = k * 1.0;
        const double mean = sum[k] / n_traj;
        const double var = sum2[k] / n_traj - mean * mean;
        const double se = std::sqrt(std::max(var, 0.0) / (n_traj - 1));
        const double expected = std::exp(-2 * p.A * t) * std::cos(2 * p.G * t);
        EXPECT_LE(std::abs(mean - expected), 3 * se + 1e-3) << "t = " << t;
    }
}

TEST(SimulateSme, CollapseWithoutFeedback) {
    const int n = 20;
    auto p = small_params(n, 100.0);
    RunOptions o;
    o.sample_stride = 1000;
    for (std::uint64_t s = 0; s < 3; ++s) {
        p.seed = s;
        const auto rec = simulate_sme(p, std::nullopt, x_state(n), nullptr, o);
        EXPECT_GT(rec.purity.back(), 0.99);
        EXPECT_LT(rec.variance_sz.back(), 1e-3 * n);
        EXPECT_LT(rec.variance_sz.back(), rec.variance_sz.front());
    }
}

TEST(SimulateSme, EulerSchemeLosesPositivityAtCoarseStep) {
    auto p = small_params(20, 100.0);
    RunOptions o;
    o.sme_scheme = SmeScheme::EulerMaruyama;
    EXPECT_THROW(simulate_sme(p, std::nullopt, x_state(20), nullptr, o), IntegratorAbort);
}

TEST(SimulateSme, FeedbackDelayUsesOlderMoments) {
    auto p = small_params(5, 0.5);
    const auto law = ControlLaw::single_gain(kX, kY, 3.0, 0.5);
    RunOptions o;
    o.feedback_delay_steps = 3;
    const auto rec = simulate_sme(p, law, x_state(5), nullptr, o);
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const std::size_t src = i >= 3 ? i - 3 : 0;
        const Vec3 u = control_signal(law, rec.moments[src]);
        EXPECT_NEAR(rec.controls[i][kX], u[kX], 1e-12);
    }
    const auto undelayed = simulate_sme(p, law, x_state(5));
    EXPECT_NE(undelayed.moments.back().sy, rec.moments.back().sy);
}

TEST(SimulateSme, RejectsBadInputs) {
    auto p = small_params(4, 1.0);
    EXPECT_THROW(simulate_sme(p, std::nullopt, x_state(3)), std::invalid_argument);
    DensityMatrix bad = x_state(4);
    bad.rho *= 2.0;
    EXPECT_THROW(simulate_sme(p, std::nullopt, bad), std::invalid_argument);
    p.dt = 0.3;
    EXPECT_THROW(simulate_sme(p, std::nullopt, x_state(4)), std::invalid_argument);
    p = small_params(4, 1.0);
    const auto short_inn = generate_innovations(1, p.dt, 10);
    EXPECT_THROW(simulate_sme(p, std::nullopt, x_state(4), &short_inn), std::invalid_argument);
}

TEST(MeasurementRecord, DickeStateSignalMean) {
    const int n = 6, k = 1;
    auto p = small_params(n, 100.0);
    const auto rec = simulate_sme(p, std::nullopt, to_density(dicke_state(n, k)));
    const auto dy = measurement_record(rec, p);
    double total = 0.0;
    for (double d : dy) total += d;
    const double rate = 2.0 * std::sqrt(p.eta) * p.B * (n - 2 * k);
    // the noise part integrates to W(T) ~ Normal(0, T)
    EXPECT_NEAR(total / p.t_final, rate, 5.0 / std::sqrt(p.t_final));
    double noise = 0.0;
    for (double d : rec.innovations) noise += d;
    EXPECT_NEAR(total - noise, rate * p.t_final, 1e-9);
}

TEST(MeasurementRecord, ZeroEfficiencyIsBareNoise) {
    auto p = small_params(4, 1.0);
    const auto rec = simulate_sme(p, std::nullopt, x_state(4));
    SimParams blind = p;
    blind.eta = 0.0;
    EXPECT_EQ(measurement_record(rec, blind), rec.innovations);
}

TEST(MeasurementRecord, FilterRoundTrip) {
    auto p = small_params(8, 3.0);
    p.seed = 99;
    const auto law = ControlLaw::single_gain(kX, kZ, -8.0);
    for (auto scheme : {SmeScheme::PositiveSplit, SmeScheme::EulerMaruyama}) {
        RunOptions o;
        o.sme_scheme = scheme;
        o.psd_check_stride = 0;
        const auto rec = simulate_sme(p, law, x_state(8), nullptr, o);
        const auto dy = measurement_record(rec, p);
        const auto back = filter_measurement_record(p, law, x_state(8), dy, o).record;
        ASSERT_EQ(back.size(), rec.size());
        for (std::size_t i = 0; i < rec.innovations.size(); ++i) {
            EXPECT_NEAR(back.innovations[i], rec.innovations[i], 1e-12);
        }
        EXPECT_LT(max_moment_diff(back.moments.back(), rec.moments.back()), 1e-9);
    }
}

TEST(DensityLyapunov, TargetsAndDistance) {
    const auto tx = target_density(5, TargetSpec{{1.0, 0.0, 0.0}});
    EXPECT_NEAR(density_lyapunov(x_state(5), tx), 0.0, 1e-14);
    EXPECT_NEAR(purity(target_density(5, TargetSpec{{0.0, 0.0, 0.0}})), 1.0 / 6.0, 1e-14);
    const auto ops = build_spin_operators(5);
    const auto ty = moments_from_density(target_density(5, TargetSpec{{0.0, 0.6, 0.0}}), ops);
    EXPECT_NEAR(ty.sy, 1.0, 1e-12);
    // two orthogonal pure states: 1/2 (1 + 1) = 1
    EXPECT_NEAR(density_lyapunov(to_density(dicke_state(5, 0)), to_density(dicke_state(5, 5))), 1.0,
                1e-14);
}

TEST(SimulateSme, TargetAddsLyapunovSeries) {
    auto p = small_params(4, 1.0);
    RunOptions o;
    o.target = TargetSpec{{0.0, 1.0, 0.0}};
    const auto rec = simulate_sme(p, std::nullopt, x_state(4), nullptr, o);
    ASSERT_EQ(rec.lyapunov.size(), rec.size());
    ASSERT_EQ(rec.density_lyapunov.size(), rec.size());
    EXPECT_NEAR(rec.lyapunov.front(), 1.0, 1e-12);
    for (double v : rec.density_lyapunov) EXPECT_GE(v, 0.0);
}

// The exact filter at N = 20 collapses onto an S^z eigenstate long before
// u_x = -14.5 <s^z> can hold <s^y> away from zero, so this reproduction case
// of the closed moment system does not carry over. Kept for reference.
TEST(SimulateSme, DISABLED_XFeedbackHoldsPositiveSy) {
    auto p = small_params(20, 100.0);
    RunOptions o;
    o.sample_stride = 10;
    const auto rec = simulate_sme(p, ControlLaw::single_gain(kX, kZ, -14.5), x_state(20), nullptr, o);
    double mean = 0.0;
    const std::size_t start = rec.size() * 3 / 4;
    for (std::size_t i = start; i < rec.size(); ++i) mean += rec.moments[i].sy;
    EXPECT_GT(mean / (rec.size() - start), 0.3);
}

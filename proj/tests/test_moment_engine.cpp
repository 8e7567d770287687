#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qfb/moment_engine.hpp"
#include "qfb/sme.hpp"

using namespace qfb;

namespace {

MomentState random_moments(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MomentState m;
    m.sx = u(rng);
    m.sy = u(rng);
    m.sz = u(rng);
    m.sx2 = std::abs(u(rng));
    m.sy2 = std::abs(u(rng));
    m.sz2 = std::abs(u(rng));
    m.xz = {u(rng), u(rng)};
    m.yz = {u(rng), u(rng)};
    m.xy = {u(rng), u(rng)};
    return m;
}

}  // namespace

TEST(InitialMoments, Examples) {
    const auto m = initial_moments(100);
    EXPECT_EQ(m.sx, 1.0);
    EXPECT_EQ(m.sx2, 1.0);
    EXPECT_DOUBLE_EQ(m.sy2, 0.01);
    EXPECT_DOUBLE_EQ(m.sz2, 0.01);
    EXPECT_EQ(m.yz, std::complex<double>(0.0, 0.01));
    EXPECT_EQ(m.xz, std::complex<double>());
    EXPECT_EQ(m.xy, std::complex<double>());
    EXPECT_EQ(initial_moments(100, true).yz, std::complex<double>(0.0, 1.0));
    EXPECT_THROW(initial_moments(0), std::invalid_argument);
}

TEST(InitialMoments, AgreeWithCoherentStateDensity) {
    for (int n : {1, 2, 7, 30, 100}) {
        const auto ops = build_spin_operators(n);
        const auto d = moments_from_density(to_density(spin_coherent_state(n, M_PI / 2, 0.0)), ops);
        const auto m = initial_moments(n);
        EXPECT_NEAR(d.sx, m.sx, 1e-12);
        EXPECT_NEAR(std::abs(d.sy - m.sy) + std::abs(d.sz - m.sz), 0.0, 1e-12);
        EXPECT_NEAR(d.sx2, m.sx2, 1e-12);
        EXPECT_NEAR(d.sy2, m.sy2, 1e-12);
        EXPECT_NEAR(d.sz2, m.sz2, 1e-12);
        EXPECT_NEAR(std::abs(d.xz - m.xz), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(d.yz - m.yz), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(d.xy - m.xy), 0.0, 1e-12);
    }
}

TEST(MomentDrift, Examples) {
    SimParams p;  // A = 0.04, G = 1e-4
    const auto d = moment_drift(initial_moments(100), {}, p);
    EXPECT_DOUBLE_EQ(d.sx, -0.08);

    SimParams still = p;
    still.G = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto dm = moment_drift(random_moments(s), {}, still);
        EXPECT_NEAR(dm.sx2 + dm.sy2 + dm.sz2, 0.0, 1e-15);
    }

    const auto dz = moment_drift(initial_moments(50), {0.0, 0.0, 1.7}, p);
    EXPECT_EQ(dz.sz, 0.0);
}

TEST(MomentDrift, SecondMomentSumIsConservedForAnyInput) {
    SimParams p;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (std::uint64_t s = 0; s < 50; ++s) {
        p.G = u(rng);
        p.A = std::abs(u(rng));
        const Vec3 ctl{u(rng), u(rng), u(rng)};
        const auto dm = moment_drift(random_moments(100 + s), ctl, p);
        EXPECT_NEAR(dm.sx2 + dm.sy2 + dm.sz2, 0.0, 1e-12);
    }
}

TEST(MomentDrift, HandComputedTerms) {
    SimParams p;
    p.A = 0.3;
    p.G = 0.2;
    MomentState m = random_moments(9);
    const Vec3 u{0.5, -0.7, 1.1};
    const auto d = moment_drift(m, u, p);
    EXPECT_NEAR(d.sx, 2 * (u[1] * m.sz - u[2] * m.sy - p.A * m.sx - p.G * m.sy), 1e-15);
    EXPECT_NEAR(d.sy, 2 * (u[2] * m.sx - p.A * m.sy - u[0] * m.sz + p.G * m.sx), 1e-15);
    EXPECT_NEAR(d.sz, 2 * (u[0] * m.sy - u[1] * m.sx), 1e-15);
    const auto yx = std::conj(m.xy), zx = std::conj(m.xz);
    const auto xz_dot = 2.0 * (u[0] * m.xy + u[1] * m.sz2 - u[1] * m.sx2 - u[2] * m.yz -
                               p.A * m.xz - p.G * m.yz);
    EXPECT_NEAR(std::abs(d.xz - xz_dot), 0.0, 1e-14);
    const auto sz2_dot =
        2.0 * (u[0] * (m.yz + std::conj(m.yz)) - u[1] * (m.xz + zx));
    EXPECT_NEAR(d.sz2, sz2_dot.real(), 1e-14);
    const auto xy_dot = 2.0 * (-u[0] * m.xz + u[1] * std::conj(m.yz) + u[2] * m.sx2 -
                               u[2] * m.sy2 - 2 * p.A * yx - 2 * p.A * m.xy + p.G * m.sx2 -
                               p.G * m.sy2);
    EXPECT_NEAR(std::abs(d.xy - xy_dot), 0.0, 1e-14);
}

TEST(MomentDiffusion, Examples) {
    SimParams p;
    const auto g = moment_diffusion(initial_moments(100), p);
    EXPECT_NEAR(g[kZ], 0.4, 1e-15);
    EXPECT_EQ(g[kX], 0.0);
    MomentState m = random_moments(2);
    m.sz2 = m.sz * m.sz;
    EXPECT_EQ(moment_diffusion(m, p)[kZ], 0.0);
}

TEST(CommutatorResidual, ZeroForPhysicalMomentsOnly) {
    EXPECT_NEAR(commutator_residual(initial_moments(40), 40), 0.0, 1e-16);
    EXPECT_NEAR(commutator_residual(initial_moments(40, true), 40), 1.0 - 1.0 / 40, 1e-15);
    const auto ops = build_spin_operators(6);
    const auto m = moments_from_density(to_density(spin_coherent_state(6, 0.7, 2.0)), ops);
    EXPECT_LT(commutator_residual(m, 6), 1e-12);
}

TEST(SimulateMoments, RecordLayout) {
    SimParams p;
    p.t_final = 1.0;
    RunOptions o;
    o.sample_stride = 10;
    o.target = TargetSpec{{0.0, 1.0, 0.0}};
    const auto rec = simulate_moments(p, std::nullopt, nullptr, o);
    EXPECT_EQ(rec.size(), 11u);
    EXPECT_EQ(rec.innovations.size(), 100u);
    EXPECT_TRUE(rec.purity.empty());
    EXPECT_EQ(rec.lyapunov.size(), rec.size());
    EXPECT_EQ(rec.commutator_residual.size(), rec.size());
    EXPECT_EQ(rec.engine, Engine::Moment);
    EXPECT_DOUBLE_EQ(rec.lyapunov.front(), 1.0);
    EXPECT_DOUBLE_EQ(rec.variance_sz.front(), 100.0);
}

TEST(SimulateMoments, CasimirSumHeldAlongTrajectory) {
    SimParams p;  // dt = 0.01, t_final = 100
    RunOptions o;
    o.sample_stride = 100;
    int completed = 0;
    for (std::uint64_t s = 0; s < 6; ++s) {
        p.seed = s;
        try {
            const auto rec = simulate_moments(p, std::nullopt, nullptr, o);
            for (const auto& m : rec.moments) {
                EXPECT_NEAR(m.second_moment_sum(), 1.02, 1e-6);
            }
            ++completed;
        } catch (const IntegratorAbort&) {
        }
    }
    EXPECT_GE(completed, 3);
}

TEST(SimulateMoments, DecayWithoutFeedback) {
    // <s^x>, <s^y> decay; <s^z> is driven onto the closure's fixed points
    // +-sqrt(<s^z^2>) = +-1/sqrt(N), where its noise coefficient vanishes.
    SimParams p;
    RunOptions o;
    o.sample_stride = 100;
    int completed = 0;
    for (std::uint64_t s = 0; s < 6; ++s) {
        p.seed = s;
        try {
            const auto rec = simulate_moments(p, std::nullopt, nullptr, o);
            const auto& m = rec.moments.back();
            EXPECT_LT(std::abs(m.sx), 0.05);
            EXPECT_LT(std::abs(m.sy), 0.05);
            EXPECT_NEAR(std::abs(m.sz), 0.1, 1e-3);
            ++completed;
        } catch (const IntegratorAbort&) {
        }
    }
    EXPECT_GE(completed, 3);
}

TEST(SimulateMoments, DivergenceGuardAborts) {
    SimParams p;
    p.seed = 3;
    try {
        simulate_moments(p, ControlLaw::single_gain(kX, kZ, -14.5));
        FAIL() << "expected the divergence guard to fire";
    } catch (const IntegratorAbort& e) {
        EXPECT_GT(e.step(), 0u);
        EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
    }
}

TEST(SimulateMoments, ReducesToSmeWithoutMeasurement) {
    // A = B = 0 and constant u: both engines rotate the Bloch vector rigidly.
    // Euler inflates the radius by about |2u|^2 dt t / 2, so dt is chosen to
    // keep that below 1e-6.
    SimParams p;
    p.n_atoms = 3;
    p.A = 0.0;
    p.B = 0.0;
    p.G = 0.05;
    p.t_final = 1.0;
    p.dt = 2e-6;
    ControlLaw law;
    law.xi = {0.3, 0.1, -0.2};
    RunOptions o;
    o.sample_stride = 50000;
    const auto inn = generate_innovations(1, p.dt, step_count(p));
    const auto mom = simulate_moments(p, law, &inn, o);
    const auto sme =
        simulate_sme(p, law, to_density(spin_coherent_state(3, M_PI / 2, 0.0)), &inn, o);
    ASSERT_EQ(mom.size(), sme.size());
    for (std::size_t i = 0; i < mom.size(); ++i) {
        EXPECT_NEAR(mom.moments[i].sx, sme.moments[i].sx, 1e-6);
        EXPECT_NEAR(mom.moments[i].sy, sme.moments[i].sy, 1e-6);
        EXPECT_NEAR(mom.moments[i].sz, sme.moments[i].sz, 1e-6);
    }
}

TEST(SimulateMoments, DeterministicAndShareableInnovations) {
    SimParams p;
    p.t_final = 5.0;
    p.seed = 21;
    const auto a = simulate_moments(p, std::nullopt);
    const auto b = simulate_moments(p, std::nullopt);
    EXPECT_EQ(a.innovations, b.innovations);
    EXPECT_EQ(a.moments.back().sx, b.moments.back().sx);
    const auto inn = generate_innovations(21, p.dt, step_count(p));
    EXPECT_EQ(a.innovations, inn.increments);
    for (std::size_t i = 0; i < a.step_sz.size(); i += 50) {
        EXPECT_DOUBLE_EQ(a.step_sz[i], a.moments[i].sz * p.n_atoms);
    }
}

TEST(SimulateMoments, LiteralInitialConditionsShowResidual) {
    SimParams p;
    p.t_final = 1.0;
    RunOptions o;
    o.initconds_literal_paper = true;
    const auto rec = simulate_moments(p, std::nullopt, nullptr, o);
    EXPECT_NEAR(rec.commutator_residual.front(), 0.99, 1e-12);
    EXPECT_EQ(rec.moments.front().yz, std::complex<double>(0.0, 1.0));
}

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qfb/control.hpp"
#include "qfb/steady_state.hpp"

using namespace qfb;

TEST(ControlSignal, Examples) {
    const auto b = ControlLaw::single_gain(kX, kZ, 9.5);
    const Vec3 u = control_signal(b, Vec3{0.3, -0.1, 0.2});
    EXPECT_NEAR(u[kX], 1.9, 1e-15);
    EXPECT_EQ(u[kY], 0.0);
    EXPECT_EQ(u[kZ], 0.0);

    EXPECT_EQ(control_signal(ControlLaw{}, Vec3{0.5, 0.5, 0.5}), (Vec3{0, 0, 0}));

    const auto c = ControlLaw::single_gain(kY, kZ, 8.0, 0.01);
    EXPECT_EQ(control_signal(c, Vec3{0.7, 0.1, 0.0}), (Vec3{0.0, 0.01, 0.0}));
}

TEST(ControlSignal, LinearWithoutSaturation) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-5.0, 5.0);
    ControlLaw law;
    for (auto& row : law.beta) {
        for (auto& v : row) v = d(rng);
    }
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 m1{d(rng), d(rng), d(rng)}, m2{d(rng), d(rng), d(rng)};
        const double a = d(rng), b = d(rng);
        Vec3 mix;
        for (int k = 0; k < 3; ++k) mix[k] = a * m1[k] + b * m2[k];
        const Vec3 u = control_signal(law, mix), u1 = control_signal(law, m1),
                   u2 = control_signal(law, m2);
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(u[k], a * u1[k] + b * u2[k], 1e-12);
    }
    // offsets add once
    law.xi = {0.1, -0.2, 0.3};
    const Vec3 u0 = control_signal(law, Vec3{0, 0, 0});
    EXPECT_EQ(u0, law.xi);
}

TEST(ControlSignal, SaturationClipsSymmetrically) {
    auto law = ControlLaw::single_gain(kX, kZ, 10.0);
    law.saturation = 0.5;
    EXPECT_EQ(control_signal(law, Vec3{0, 0, 0.2})[kX], 0.5);
    EXPECT_EQ(control_signal(law, Vec3{0, 0, -0.2})[kX], -0.5);
    EXPECT_NEAR(control_signal(law, Vec3{0, 0, 0.01})[kX], 0.1, 1e-15);
}

TEST(ControlLaw, Validation) {
    ControlLaw law;
    law.beta[1][2] = std::nan("");
    EXPECT_THROW(validate_law(law), std::invalid_argument);
    law = ControlLaw{};
    law.saturation = 0.0;
    EXPECT_THROW(validate_law(law), std::invalid_argument);
    law.saturation = 1.0;
    EXPECT_NO_THROW(validate_law(law));
    EXPECT_THROW(validate_target(TargetSpec{{0.8, 0.8, 0.0}}), std::invalid_argument);
    EXPECT_NO_THROW(validate_target(TargetSpec{{0.0, 1.0, 0.0}}));
}

TEST(LyapunovDistance, Examples) {
    const TargetSpec y{{0.0, 1.0, 0.0}};
    EXPECT_EQ(lyapunov_distance(Vec3{0.0, 1.0, 0.0}, y), 0.0);
    EXPECT_DOUBLE_EQ(lyapunov_distance(Vec3{1.0, 0.0, 0.0}, y), 1.0);
    EXPECT_DOUBLE_EQ(lyapunov_distance(Vec3{0.0, 0.0, 0.0}, TargetSpec{{0.0, -1.0, 0.0}}), 0.5);
}

TEST(LyapunovDistance, NonNegativeAndZeroOnlyAtTarget) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    const TargetSpec t{{0.2, -0.3, 0.1}};
    for (int i = 0; i < 100; ++i) {
        const Vec3 b{d(rng), d(rng), d(rng)};
        EXPECT_GT(lyapunov_distance(b, t), 0.0);
    }
    EXPECT_EQ(lyapunov_distance(t.bloch_target, t), 0.0);
}

TEST(Table1, RowPatterns) {
    using P = SignPattern;
    EXPECT_EQ(table1_expectation(ControlLaw::single_gain(kX, kZ, -14.5)), (P{0, 1, 0}));
    EXPECT_EQ(table1_expectation(ControlLaw::single_gain(kY, kZ, 8.0)), (P{1, 0, 0}));
    EXPECT_EQ(table1_expectation(ControlLaw::single_gain(kZ, kY, 6.0)), (P{0, 0, -1}));
    EXPECT_EQ(format_sign_pattern(table1_expectation(ControlLaw::single_gain(kZ, kY, 6.0))),
              "(0,0,-)");
}

TEST(Table1, FlippingGainFlipsPattern) {
    const Axis rows[3][2] = {{kX, kZ}, {kY, kZ}, {kZ, kY}};
    for (const auto& r : rows) {
        for (double g : {0.5, 8.0, 15.0}) {
            const auto plus = table1_expectation(ControlLaw::single_gain(r[0], r[1], g));
            const auto minus = table1_expectation(ControlLaw::single_gain(r[0], r[1], -g));
            ASSERT_TRUE(plus && minus);
            for (int k = 0; k < 3; ++k) EXPECT_EQ((*plus)[k], -(*minus)[k]);
        }
    }
}

TEST(Table1, UncoveredLaws) {
    EXPECT_FALSE(table1_expectation(ControlLaw{}));
    EXPECT_FALSE(table1_expectation(ControlLaw::single_gain(kY, kZ, 8.0, 0.01)));
    EXPECT_FALSE(table1_expectation(ControlLaw::single_gain(kX, kY, 3.0)));
    auto two = ControlLaw::single_gain(kX, kZ, 3.0);
    two.beta[kY][kZ] = 1.0;
    EXPECT_FALSE(table1_expectation(two));
    EXPECT_EQ(format_sign_pattern(std::nullopt), "uncovered");
}

namespace {

TrajectoryRecord synthetic(const std::vector<double>& t, const std::function<Vec3(double)>& f) {
    TrajectoryRecord r;
    for (double ti : t) {
        r.times.push_back(ti);
        MomentState m;
        const Vec3 b = f(ti);
        m.sx = b[0];
        m.sy = b[1];
        m.sz = b[2];
        r.moments.push_back(m);
    }
    return r;
}

std::vector<double> grid(double t_final, double dt) {
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(std::lround(t_final / dt));
    for (std::size_t i = 0; i <= n; ++i) t.push_back(i * dt);
    return t;
}

}  // namespace

TEST(SteadyState, ConstantTrajectory) {
    const auto rec = synthetic(grid(100, 0.1), [](double) { return Vec3{0.1, 0.7, -0.2}; });
    const auto s = steady_state_estimate(rec);
    EXPECT_FALSE(s.fallback);
    EXPECT_EQ(s.transient_end, 0.0);
    EXPECT_NEAR(s.mean[1], 0.7, 1e-15);
    EXPECT_NEAR(s.mean[2], -0.2, 1e-15);
    for (double sg : s.sigma) EXPECT_NEAR(sg, 0.0, 1e-12);
}

TEST(SteadyState, SkipsDecayingTransient) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 0.01);
    std::vector<double> noise(1001);
    for (auto& v : noise) v = nd(rng);
    const auto rec = synthetic(grid(100, 0.1), [&](double t) {
        const double n = noise[static_cast<std::size_t>(std::lround(t * 10))];
        return Vec3{0.0, 0.5 + std::exp(-t / 5.0) + n, 0.0};
    });
    const auto s = steady_state_estimate(rec);
    EXPECT_FALSE(s.fallback);
    EXPECT_GE(s.transient_end, 10.0);
    EXPECT_LT(s.transient_end, 60.0);
    EXPECT_NEAR(s.mean[1], 0.5, 0.01);
    EXPECT_NEAR(s.sigma[1], 0.01, 0.005);
}

TEST(SteadyState, FallsBackToFinalQuarter) {
    // steady linear drift never settles
    const auto rec = synthetic(grid(100, 0.1), [](double t) { return Vec3{t / 100.0, 0, 0}; });
    const auto s = steady_state_estimate(rec);
    EXPECT_TRUE(s.fallback);
    EXPECT_NEAR(s.transient_end, 75.0, 1e-9);
    EXPECT_NEAR(s.mean[0], 0.875, 1e-9);
}

TEST(SteadyState, UsesLyapunovWhenTargetPresent) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 0.02);
    auto rec = synthetic(grid(50, 0.1), [&](double t) {
        return Vec3{nd(rng), 0.8 - 0.8 * std::exp(-t / 2.0) + nd(rng), 0};
    });
    const TargetSpec tgt{{0.0, 1.0, 0.0}};
    for (const auto& m : rec.moments) rec.lyapunov.push_back(lyapunov_distance(m, tgt));
    const auto s = steady_state_estimate(rec, 5.0);
    EXPECT_FALSE(s.fallback);
    EXPECT_GE(s.transient_end, 5.0);
    EXPECT_NEAR(s.mean[1], 0.8, 0.01);
    EXPECT_GT(s.negative_v_drift_fraction, 0.2);
    EXPECT_LT(s.negative_v_drift_fraction, 0.8);

    TrajectoryRecord plain = rec;
    plain.lyapunov.clear();
    EXPECT_EQ(steady_state_estimate(plain, 5.0).negative_v_drift_fraction, -1.0);
}

TEST(SteadyState, WindowLongerThanRunThrows) {
    const auto rec = synthetic(grid(5, 0.1), [](double) { return Vec3{}; });
    EXPECT_THROW(steady_state_estimate(rec, 10.0), std::invalid_argument);
    EXPECT_THROW(steady_state_estimate(rec, 0.0), std::invalid_argument);
}

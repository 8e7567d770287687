#include "qfb/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace qfb {

namespace {

constexpr int kBatches = 10;
// Window means closer than this count as settled whatever their errors.
constexpr double kSettledFloor = 1e-6;

struct WindowStats {
    double mean = 0.0;
    double se = 0.0;
};

// Mean and batch-means standard error of signal(i) for i in [lo, hi).
WindowStats window_stats(const std::function<double(std::size_t)>& signal, std::size_t lo,
                         std::size_t hi) {
    const std::size_t n = hi - lo;
    WindowStats w;
    for (std::size_t i = lo; i < hi; ++i) w.mean += signal(i);
    w.mean /= static_cast<double>(n);

    const std::size_t nb = std::min<std::size_t>(kBatches, n);
    if (nb < 2) return w;
    std::vector<double> batch(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t a = lo + b * n / nb;
        const std::size_t e = lo + (b + 1) * n / nb;
        for (std::size_t i = a; i < e; ++i) batch[b] += signal(i);
        batch[b] /= static_cast<double>(e - a);
    }
    double ss = 0.0;
    for (double v : batch) ss += (v - w.mean) * (v - w.mean);
    w.se = std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
    return w;
}

}  // namespace

SteadyState steady_state_estimate(const TrajectoryRecord& traj, double window) {
    const std::size_t n = traj.size();
    if (!(window > 0.0)) throw std::invalid_argument("steady-state window must be positive");
    if (n < 2) throw std::invalid_argument("steady-state estimate needs at least two samples");
    const double t0 = traj.times.front();
    const double t1 = traj.times.back();
    if (window > t1 - t0) {
        throw std::invalid_argument("steady-state window (" + std::to_string(window) +
                                    ") is longer than the trajectory (" +
                                    std::to_string(t1 - t0) + ")");
    }

    std::vector<std::function<double(std::size_t)>> signals;
    const bool has_target = !traj.lyapunov.empty();
    if (has_target) {
        signals.emplace_back([&](std::size_t i) { return traj.lyapunov[i]; });
    } else {
        for (int k = 0; k < 3; ++k) {
            signals.emplace_back([&, k](std::size_t i) { return traj.moments[i].bloch()[k]; });
        }
    }

    // First sample index at or after time t.
    auto index_at = [&](double t) {
        return static_cast<std::size_t>(
            std::lower_bound(traj.times.begin(), traj.times.end(), t - 1e-9 * window) -
            traj.times.begin());
    };

    SteadyState out;
    std::size_t start = n;
    for (int j = 0; t0 + (j + 2) * window <= t1 + 1e-9 * window; ++j) {
        const std::size_t a = index_at(t0 + j * window);
        const std::size_t b = index_at(t0 + (j + 1) * window);
        const std::size_t c = index_at(t0 + (j + 2) * window);
        if (b - a < 2 || c - b < 2) continue;
        bool settled = true;
        for (const auto& s : signals) {
            const WindowStats w1 = window_stats(s, a, b);
            const WindowStats w2 = window_stats(s, b, c);
            const double diff = std::abs(w2.mean - w1.mean);
            if (diff > kSettledFloor && diff > 2.0 * std::sqrt(2.0) * w2.se) {
                settled = false;
                break;
            }
        }
        if (settled) {
            start = a;
            break;
        }
    }
    if (start == n) {
        out.fallback = true;
        start = index_at(t0 + 0.75 * (t1 - t0));
        start = std::min(start, n - 1);
    }
    out.transient_end = traj.times[start];
    out.samples = n - start;

    // Accumulated relative to the first sample so a constant series is exact.
    const Vec3 ref = traj.moments[start].bloch();
    Vec3 shift{};
    for (std::size_t i = start; i < n; ++i) {
        const Vec3 b = traj.moments[i].bloch();
        for (int k = 0; k < 3; ++k) shift[k] += b[k] - ref[k];
    }
    for (int k = 0; k < 3; ++k) out.mean[k] = ref[k] + shift[k] / static_cast<double>(out.samples);
    if (out.samples > 1) {
        for (std::size_t i = start; i < n; ++i) {
            const Vec3 b = traj.moments[i].bloch();
            for (int k = 0; k < 3; ++k) out.sigma[k] += (b[k] - out.mean[k]) * (b[k] - out.mean[k]);
        }
        for (int k = 0; k < 3; ++k) {
            out.sigma[k] = std::sqrt(out.sigma[k] / static_cast<double>(out.samples - 1));
        }
    }

    if (has_target && out.samples > 1) {
        std::size_t down = 0;
        for (std::size_t i = start + 1; i < n; ++i) {
            if (traj.lyapunov[i] < traj.lyapunov[i - 1]) ++down;
        }
        out.negative_v_drift_fraction =
            static_cast<double>(down) / static_cast<double>(out.samples - 1);
    }
    return out;
}

}  // namespace qfb

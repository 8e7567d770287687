#include "qfb/moment_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace qfb {

MomentState initial_moments(int n_atoms, bool yz_equals_i) {
    if (n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
    const double inv = 1.0 / n_atoms;
    MomentState m;
    m.sx = 1.0;
    m.sx2 = 1.0;
    m.sy2 = inv;
    m.sz2 = inv;
    m.yz = yz_equals_i ? std::complex<double>(0.0, 1.0) : std::complex<double>(0.0, inv);
    return m;
}

MomentState moment_drift(const MomentState& m, const Vec3& u, const SimParams& p) {
    const double ux = u[kX], uy = u[kY], uz = u[kZ];
    const double A = p.A, G = p.G;
    const auto xz = m.xz, yz = m.yz, xy = m.xy;
    const auto zx = m.zx(), zy = m.zy(), yx = m.yx();

    MomentState d;
    d.sx = 2.0 * (uy * m.sz - uz * m.sy - A * m.sx - G * m.sy);
    d.sy = 2.0 * (uz * m.sx - A * m.sy - ux * m.sz + G * m.sx);
    d.sz = 2.0 * (ux * m.sy - uy * m.sx);

    d.xz = 2.0 * (ux * xy + uy * m.sz2 - uy * m.sx2 - uz * yz - A * xz - G * yz);
    d.yz = 2.0 * (ux * m.sy2 - ux * m.sz2 - uy * yx + uz * xz - A * yz + G * xz);
    d.xy = 2.0 * (-ux * xz + uy * zy + uz * m.sx2 - uz * m.sy2 - 2.0 * A * yx - 2.0 * A * xy +
                  G * m.sx2 - G * m.sy2);

    d.sx2 = (2.0 * (2.0 * A * m.sy2 - 2.0 * A * m.sx2 + uy * xz + uy * zx - uz * xy - uz * yx -
                    G * xy - G * yx))
                .real();
    d.sy2 = (2.0 * (2.0 * A * m.sx2 - 2.0 * A * m.sy2 - ux * yz - ux * zy + uz * xy + uz * yx +
                    G * xy + G * yx))
                .real();
    d.sz2 = (2.0 * (ux * yz + ux * zy - uy * xz - uy * zx)).real();
    return d;
}

Vec3 moment_diffusion(const MomentState& m, const SimParams& p) {
    const double c = p.B * p.n_atoms * std::sqrt(p.eta);
    return {c * (m.xz + m.zx() - 2.0 * m.sz * m.sx).real(),
            c * (m.yz + m.zy() - 2.0 * m.sz * m.sy).real(),
            2.0 * c * (m.sz2 - m.sz * m.sz)};
}

double commutator_residual(const MomentState& m, int n_atoms) {
    const double inv = 1.0 / n_atoms;
    return std::max({std::abs(m.yz.imag() - m.sx * inv), std::abs(m.xz.imag() + m.sy * inv),
                     std::abs(m.xy.imag() - m.sz * inv)});
}

TrajectoryRecord simulate_moments(const SimParams& p, const std::optional<ControlLaw>& law,
                                  const InnovationSequence* innovations,
                                  const RunOptions& options) {
    validate_params(p);
    validate_options(options);
    if (law) validate_law(*law);

    const std::size_t n_steps = step_count(p);
    InnovationSequence generated;
    if (innovations == nullptr) {
        generated = generate_innovations(p.seed, p.dt, n_steps);
        innovations = &generated;
    } else if (innovations->increments.size() < n_steps) {
        throw std::invalid_argument("innovation sequence shorter than the number of steps");
    }
    const auto& inc = innovations->increments;

    const auto stride = static_cast<std::size_t>(options.sample_stride);
    const std::size_t n_samples = n_steps / stride + 1 + (n_steps % stride ? 1 : 0);
    const double n2 = static_cast<double>(p.n_atoms) * p.n_atoms;

    TrajectoryRecord rec;
    rec.params = p;
    rec.law = law;
    rec.options = options;
    rec.engine = Engine::Moment;
    rec.seed = innovations->seed;
    rec.times.reserve(n_samples);
    rec.moments.reserve(n_samples);
    rec.controls.reserve(n_samples);
    rec.sample_dw.reserve(n_samples);
    rec.variance_sz.reserve(n_samples);
    rec.commutator_residual.reserve(n_samples);
    rec.innovations.resize(n_steps);
    rec.step_sz.resize(n_steps);

    MomentState m = initial_moments(p.n_atoms, options.initconds_literal_paper);
    const std::size_t delay = static_cast<std::size_t>(options.feedback_delay_steps);
    std::vector<Vec3> history(delay + 1);
    double dw_since_sample = 0.0;

    for (std::size_t step = 0;; ++step) {
        history[step % (delay + 1)] = m.bloch();
        Vec3 u{};
        if (law) {
            const std::size_t src = step >= delay ? step - delay : 0;
            u = control_signal(*law, history[src % (delay + 1)]);
        }

        if (step % stride == 0 || step == n_steps) {
            rec.times.push_back(static_cast<double>(step) * p.dt);
            rec.moments.push_back(m);
            rec.controls.push_back(u);
            rec.sample_dw.push_back(dw_since_sample);
            rec.variance_sz.push_back(n2 * (m.sz2 - m.sz * m.sz));
            rec.commutator_residual.push_back(commutator_residual(m, p.n_atoms));
            if (options.target) rec.lyapunov.push_back(lyapunov_distance(m, *options.target));
            dw_since_sample = 0.0;
        }
        if (step == n_steps) break;

        const double dw = inc[step];
        rec.innovations[step] = dw;
        rec.step_sz[step] = m.sz * p.n_atoms;
        dw_since_sample += dw;

        const MomentState drift = moment_drift(m, u, p);
        const Vec3 diff = moment_diffusion(m, p);
        m += p.dt * drift;
        m.sx += diff[kX] * dw;
        m.sy += diff[kY] * dw;
        m.sz += diff[kZ] * dw;

        const double peak = m.max_abs();
        if (!(peak <= kDivergenceBound)) {
            throw IntegratorAbort("moment system diverged (|moment| = " + std::to_string(peak) +
                                      " > 10); reduce dt or the feedback gains",
                                  step + 1);
        }
    }
    return rec;
}

}  // namespace qfb

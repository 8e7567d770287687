#include "qfb/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qfb {

ControlLaw ControlLaw::single_gain(Axis control, Axis signal, double gain, double offset) {
    ControlLaw law;
    law.beta[control][signal] = gain;
    law.xi[control] = offset;
    return law;
}

bool ControlLaw::is_zero() const {
    for (int k = 0; k < 3; ++k) {
        if (xi[k] != 0.0) return false;
        for (int l = 0; l < 3; ++l) {
            if (beta[k][l] != 0.0) return false;
        }
    }
    return true;
}

void validate_law(const ControlLaw& law) {
    for (int k = 0; k < 3; ++k) {
        if (!std::isfinite(law.xi[k])) throw std::invalid_argument("law.xi: non-finite entry");
        for (int l = 0; l < 3; ++l) {
            if (!std::isfinite(law.beta[k][l])) {
                throw std::invalid_argument("law.beta: non-finite entry");
            }
        }
    }
    if (law.saturation && !(*law.saturation > 0.0 && std::isfinite(*law.saturation))) {
        throw std::invalid_argument("law.saturation: must be a positive real");
    }
}

void validate_target(const TargetSpec& t) {
    double n2 = 0.0;
    for (double v : t.bloch_target) {
        if (!std::isfinite(v)) throw std::invalid_argument("target: non-finite entry");
        n2 += v * v;
    }
    if (n2 > 1.0 + 1e-12) throw std::invalid_argument("target: Bloch vector norm exceeds 1");
}

Vec3 control_signal(const ControlLaw& law, const Vec3& bloch) {
    Vec3 u{};
    for (int k = 0; k < 3; ++k) {
        u[k] = law.xi[k] + law.beta[k][0] * bloch[0] + law.beta[k][1] * bloch[1] +
               law.beta[k][2] * bloch[2];
        if (law.saturation) u[k] = std::clamp(u[k], -*law.saturation, *law.saturation);
    }
    return u;
}

double lyapunov_distance(const Vec3& bloch, const TargetSpec& target) {
    double v = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = bloch[k] - target.bloch_target[k];
        v += d * d;
    }
    return 0.5 * v;
}

std::optional<SignPattern> table1_expectation(const ControlLaw& law) {
    if (law.xi != Vec3{}) return std::nullopt;
    int nonzero = 0;
    int row = -1, col = -1;
    for (int k = 0; k < 3; ++k) {
        for (int l = 0; l < 3; ++l) {
            if (law.beta[k][l] != 0.0) {
                ++nonzero;
                row = k;
                col = l;
            }
        }
    }
    if (nonzero != 1) return std::nullopt;
    const int s = law.beta[row][col] > 0.0 ? 1 : -1;
    if (row == kX && col == kZ) return SignPattern{0, -s, 0};
    if (row == kY && col == kZ) return SignPattern{s, 0, 0};
    if (row == kZ && col == kY) return SignPattern{0, 0, -s};
    return std::nullopt;
}

std::string format_sign_pattern(const std::optional<SignPattern>& p) {
    if (!p) return "uncovered";
    std::string out = "(";
    for (int k = 0; k < 3; ++k) {
        out += (*p)[k] > 0 ? "+" : (*p)[k] < 0 ? "-" : "0";
        out += k < 2 ? "," : ")";
    }
    return out;
}

}  // namespace qfb

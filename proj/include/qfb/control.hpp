// Linear feedback laws u_k = xi_k + sum_l beta_kl <s^l> and the Bloch-vector
// Lyapunov distance they are designed to decrease.

#ifndef QFB_CONTROL_HPP
#define QFB_CONTROL_HPP

#include <array>
#include <optional>
#include <string>

#include "qfb/moment_state.hpp"

namespace qfb {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

enum Axis : int { kX = 0, kY = 1, kZ = 2 };

struct ControlLaw {
    Vec3 xi{};    // offsets
    Mat3 beta{};  // beta[k][l]: control axis k, fed-back moment l
    std::optional<double> saturation;

    static ControlLaw single_gain(Axis control, Axis signal, double gain, double offset = 0.0);
    bool is_zero() const;
};

// Throws std::invalid_argument on non-finite entries or a nonpositive saturation.
void validate_law(const ControlLaw& law);

struct TargetSpec {
    Vec3 bloch_target{};
};

// Throws when the target lies outside the unit ball.
void validate_target(const TargetSpec& t);

Vec3 control_signal(const ControlLaw& law, const Vec3& bloch);
inline Vec3 control_signal(const ControlLaw& law, const MomentState& m) {
    return control_signal(law, m.bloch());
}

double lyapunov_distance(const Vec3& bloch, const TargetSpec& target);
inline double lyapunov_distance(const MomentState& m, const TargetSpec& target) {
    return lyapunov_distance(m.bloch(), target);
}

// Expected steady-state sign pattern for the three single-gain feedback
// patterns of the stabilization table; nullopt when the law matches none.
//   u_x = +-b <s^z>  ->  (0, -+, 0)
//   u_y = +-b <s^z>  ->  (+-, 0, 0)
//   u_z = +-b <s^y>  ->  (0, 0, -+)
using SignPattern = std::array<int, 3>;
std::optional<SignPattern> table1_expectation(const ControlLaw& law);

std::string format_sign_pattern(const std::optional<SignPattern>& p);

}  // namespace qfb

#endif  // QFB_CONTROL_HPP

#ifndef QFB_MOMENT_STATE_HPP
#define QFB_MOMENT_STATE_HPP

#include <array>
#include <complex>

namespace qfb {

// Normalized spin moments, s = S/N. Cross moments are stored in the written
// operator order; the reversed products are their complex conjugates.
struct MomentState {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    double sx2 = 0.0, sy2 = 0.0, sz2 = 0.0;
    std::complex<double> xz{}, yz{}, xy{};

    std::complex<double> zx() const { return std::conj(xz); }
    std::complex<double> zy() const { return std::conj(yz); }
    std::complex<double> yx() const { return std::conj(xy); }

    std::array<double, 3> bloch() const { return {sx, sy, sz}; }
    double second_moment_sum() const { return sx2 + sy2 + sz2; }

    // Largest absolute value over all nine entries.
    double max_abs() const;

    MomentState& operator+=(const MomentState& o);
    MomentState& operator*=(double a);
};

inline MomentState operator+(MomentState a, const MomentState& b) { return a += b; }
inline MomentState operator*(double a, MomentState m) { return m *= a; }

}  // namespace qfb

#endif  // QFB_MOMENT_STATE_HPP

#include "qfb/moment_state.hpp"

#include <algorithm>
#include <cmath>

namespace qfb {

double MomentState::max_abs() const {
    return std::max({std::abs(sx), std::abs(sy), std::abs(sz), std::abs(sx2), std::abs(sy2),
                     std::abs(sz2), std::abs(xz), std::abs(yz), std::abs(xy)});
}

MomentState& MomentState::operator+=(const MomentState& o) {
    sx += o.sx;
    sy += o.sy;
    sz += o.sz;
    sx2 += o.sx2;
    sy2 += o.sy2;
    sz2 += o.sz2;
    xz += o.xz;
    yz += o.yz;
    xy += o.xy;
    return *this;
}

MomentState& MomentState::operator*=(double a) {
    sx *= a;
    sy *= a;
    sz *= a;
    sx2 *= a;
    sy2 *= a;
    sz2 *= a;
    xz *= a;
    yz *= a;
    xy *= a;
    return *this;
}

}  // namespace qfb

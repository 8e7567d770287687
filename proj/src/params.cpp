#include "qfb/params.hpp"

#include <algorithm>
#include <cmath>

namespace qfb {

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
    if (!ok) throw std::invalid_argument("params." + field + ": " + why);
}

}  // namespace

void validate_params(const SimParams& p) {
    require(p.n_atoms >= 1, "n_atoms", "must be a positive integer");
    require(std::isfinite(p.G), "G", "must be finite");
    require(std::isfinite(p.g), "g", "must be finite");
    require(std::isfinite(p.A) && p.A >= 0.0, "A", "must be a nonnegative real");
    require(std::isfinite(p.B) && p.B >= 0.0, "B", "must be a nonnegative real");
    require(p.decouple_B || std::abs(p.B * p.B - p.A) <= 1e-12, "B",
            "must satisfy B^2 = A (set decouple_B to override)");
    require(p.eta > 0.0 && p.eta <= 1.0, "eta", "must lie in (0, 1]");
    require(std::isfinite(p.dt) && p.dt > 0.0, "dt", "must be positive");
    require(std::isfinite(p.t_final) && p.t_final > 0.0, "t_final", "must be positive");
    require(p.dt < p.t_final, "dt", "must be smaller than t_final");
    step_count(p);
}

std::size_t step_count(const SimParams& p) {
    const double ratio = p.t_final / p.dt;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
        throw std::invalid_argument("params.dt: does not divide t_final");
    }
    return static_cast<std::size_t>(n);
}

std::string to_string(Engine e) { return e == Engine::Moment ? "moment" : "sme"; }

Engine engine_from_string(const std::string& s) {
    if (s == "moment") return Engine::Moment;
    if (s == "sme") return Engine::Sme;
    throw std::invalid_argument("engine: expected \"moment\" or \"sme\", got \"" + s + "\"");
}

}  // namespace qfb

#ifndef QFB_PARAMS_HPP
#define QFB_PARAMS_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qfb {

// Physical and integration parameters of one run. Times are in the units in
// which A, B, G are given (A = 0.04 etc.); 1/G is reported as tau0.
struct SimParams {
    int n_atoms = 100;
    double G = 1e-4;   // measurement-induced rotation about z
    double g = 0.0;    // global-phase coefficient of N
    double A = 0.04;   // dephasing strength
    double B = 0.2;    // noise coupling, sqrt(A) unless decouple_B
    double eta = 1.0;  // detection efficiency
    double dt = 0.01;
    double t_final = 100.0;
    std::uint64_t seed = 0;
    bool decouple_B = false;
};

// Throws std::invalid_argument naming the offending field.
void validate_params(const SimParams& p);

// round(t_final / dt); throws when dt does not divide t_final within rounding.
std::size_t step_count(const SimParams& p);

enum class Engine { Moment, Sme };

std::string to_string(Engine e);
Engine engine_from_string(const std::string& s);

// Raised when an integrator cannot continue (trace blow-up, lost positivity,
// divergence guard). Carries the step index at which it happened.
class IntegratorAbort : public std::runtime_error {
public:
    IntegratorAbort(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

}  // namespace qfb

#endif  // QFB_PARAMS_HPP

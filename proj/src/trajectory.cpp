#include "qfb/trajectory.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace qfb {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::string to_string(SmeScheme s) {
    return s == SmeScheme::PositiveSplit ? "positive_split" : "euler_maruyama";
}

SmeScheme sme_scheme_from_string(const std::string& s) {
    if (s == "positive_split") return SmeScheme::PositiveSplit;
    if (s == "euler_maruyama") return SmeScheme::EulerMaruyama;
    throw std::invalid_argument("sme_scheme: expected \"positive_split\" or \"euler_maruyama\"");
}

void validate_options(const RunOptions& o) {
    if (o.sample_stride < 1) throw std::invalid_argument("sample_stride: must be >= 1");
    if (o.feedback_delay_steps < 0) {
        throw std::invalid_argument("feedback_delay_steps: must be >= 0");
    }
    if (o.psd_check_stride < 0) throw std::invalid_argument("psd_check_stride: must be >= 0");
    if (o.target) validate_target(*o.target);
}

InnovationSequence generate_innovations(std::uint64_t seed, double dt, std::size_t steps) {
    InnovationSequence seq;
    seq.seed = seed;
    seq.dt = dt;
    seq.increments.resize(steps);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(dt);
    for (auto& dw : seq.increments) dw = sd * normal(rng);
    return seq;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace qfb

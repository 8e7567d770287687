// JSON run configuration shared by every CLI subcommand.
//
// The document is strict: unknown fields, wrong types and missing required
// fields are errors that name the offending field. A metadata file written by
// the CLI is itself a valid configuration (its "provenance" block is ignored
// on input), so re-running it reproduces the original artifacts.

#ifndef QFB_CONFIG_HPP
#define QFB_CONFIG_HPP

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfb/control.hpp"
#include "qfb/harness.hpp"
#include "qfb/params.hpp"
#include "qfb/spin.hpp"
#include "qfb/trajectory.hpp"

namespace qfb {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InitialStateSpec {
    enum class Kind { Coherent, Dicke, Superposition };
    Kind kind = Kind::Coherent;
    double theta = M_PI / 2.0;  // polar angle; the default points along +x
    double phi = 0.0;
    int k = 0;
    std::vector<std::complex<double>> amplitudes;

    bool is_default() const;
};

struct SweepSection {
    LawEntry entry;
    std::vector<double> grid;
    int repetitions = 10;
};

struct TuneSection {
    std::vector<TuneBound> search_space;
    int budget = 40;
    TuneSpec::Method method = TuneSpec::Method::CoordinateDescent;
    int grid_points = 5;
    int repetitions = 3;
};

struct CompareSection {
    int n_traj = 100;
    double horizon = 50.0;
    double threshold = 0.05;  // reported pass/fail bound on the ensemble-mean deviation
};

struct CollapseSection {
    int n_traj = 500;
};

struct RunConfig {
    SimParams params;
    Engine engine = Engine::Moment;
    std::optional<ControlLaw> law;
    std::optional<TargetSpec> target;
    std::string output_dir = "out";
    RunOptions options;  // sample stride, flags, scheme; options.target mirrors target
    double steady_window = kDefaultSteadyWindow;
    InitialStateSpec initial;
    std::optional<SweepSection> sweep;
    std::optional<TuneSection> tune;
    std::optional<CompareSection> compare;
    std::optional<CollapseSection> collapse;
};

// Parses and validates. `source` prefixes syntax-error locations
// ("<source>:<line>:<column>: ...").
RunConfig parse_config(const std::string& text, const std::string& source = "config");
RunConfig load_config_file(const std::string& path);

// Full document with every default written out.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);
nlohmann::ordered_json law_to_json(const ControlLaw& law);

PureState build_initial_state(const InitialStateSpec& spec, int n_atoms);

}  // namespace qfb

#endif  // QFB_CONFIG_HPP

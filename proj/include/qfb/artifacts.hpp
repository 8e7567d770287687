// File artifacts: CSV tables, SVG line charts and expectation checks against
// JSON reports.

#ifndef QFB_ARTIFACTS_HPP
#define QFB_ARTIFACTS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfb/harness.hpp"
#include "qfb/trajectory.hpp"

namespace qfb {

// 17 significant digits; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

// Column names of the trajectory CSV; "purity" is appended for SME records.
std::vector<std::string> trajectory_columns(const TrajectoryRecord& rec);

// Every table starts with a "# seed=<master seed>" line followed by the header.
std::string trajectory_csv(const TrajectoryRecord& rec, std::uint64_t seed);
std::string sweep_csv(const std::vector<SweepPoint>& points, const LawEntry& entry,
                      std::uint64_t seed);
std::string compare_csv(const CompareReport& report, std::uint64_t seed);
std::string collapse_csv(const CollapseReport& report, std::uint64_t seed);

struct ChartSeries {
    std::string name;
    std::vector<double> x, y;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<ChartSeries> series;
    std::uint64_t seed = 0;  // printed under the title and stored in <desc>
};

std::string render_svg(const Chart& chart);

// One expectation: the value at a JSON pointer compared with a constant.
// Ops: "<", "<=", ">", ">=", "==", "!=", "abs<" (|value| < constant).
struct CheckOutcome {
    std::string pointer;
    std::string op;
    double expected = 0.0;
    double actual = 0.0;
    bool passed = false;
    std::string message;  // set when the pointer does not resolve to a number
};

// `expectations` is {"checks": [{"pointer": ..., "op": ..., "value": ...}, ...]}.
// Throws std::invalid_argument on a malformed expectation document.
std::vector<CheckOutcome> evaluate_checks(const nlohmann::ordered_json& report,
                                          const nlohmann::json& expectations);

}  // namespace qfb

#endif  // QFB_ARTIFACTS_HPP

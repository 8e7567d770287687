#include "qfb/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace qfb {

namespace {

std::string join(const std::vector<std::string>& cols) {
    std::string out;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out += ',';
        out += cols[i];
    }
    return out;
}

std::string seed_line(std::uint64_t seed) { return "# seed=" + std::to_string(seed) + "\n"; }

std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Roughly `count` round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int count) {
    const double span = hi - lo;
    const double raw = span / count;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
        out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
    }
    return out;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> trajectory_columns(const TrajectoryRecord& rec) {
    std::vector<std::string> cols = {"t",      "sx",     "sy",     "sz",     "sx2",
                                     "sy2",    "sz2",    "re_xz",  "im_xz",  "re_yz",
                                     "im_yz",  "re_xy",  "im_xy",  "ux",     "uy",
                                     "uz",     "dw",     "V",      "S_var"};
    if (!rec.purity.empty()) cols.push_back("purity");
    return cols;
}

std::string trajectory_csv(const TrajectoryRecord& rec, std::uint64_t seed) {
    std::string out = seed_line(seed) + join(trajectory_columns(rec)) + "\n";
    const double nan = std::nan("");
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const MomentState& m = rec.moments[i];
        const Vec3& u = rec.controls[i];
        const double row[] = {rec.times[i], m.sx, m.sy, m.sz, m.sx2, m.sy2, m.sz2,
                              m.xz.real(), m.xz.imag(), m.yz.real(), m.yz.imag(),
                              m.xy.real(), m.xy.imag(), u[0], u[1], u[2], rec.sample_dw[i],
                              rec.lyapunov.empty() ? nan : rec.lyapunov[i], rec.variance_sz[i]};
        bool first = true;
        for (double v : row) {
            if (!first) out += ',';
            first = false;
            out += format_double(v);
        }
        if (!rec.purity.empty()) {
            out += ',';
            out += format_double(rec.purity[i]);
        }
        out += '\n';
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points, const LawEntry& entry,
                      std::uint64_t seed) {
    std::string out = seed_line(seed);
    out += entry.name() + ",mean_sx,sigma_sx,mean_sy,sigma_sy,mean_sz,sigma_sz\n";
    for (const auto& pt : points) {
        out += format_double(pt.gain);
        for (int k = 0; k < 3; ++k) {
            out += ',' + format_double(pt.mean[k]) + ',' + format_double(pt.sigma[k]);
        }
        out += '\n';
    }
    return out;
}

std::string compare_csv(const CompareReport& r, std::uint64_t seed) {
    std::string out = seed_line(seed);
    out += "t,sme_sx,sme_sy,sme_sz,moment_sx,moment_sy,moment_sz,dev_sx,dev_sy,dev_sz,"
           "commutator_residual\n";
    const double nan = std::nan("");
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        out += format_double(r.times[i]);
        for (int k = 0; k < 3; ++k) out += ',' + format_double(r.mean_sme[i][k]);
        for (int k = 0; k < 3; ++k) {
            out += ',' + format_double(i < r.mean_moment.size() ? r.mean_moment[i][k] : nan);
        }
        for (int k = 0; k < 3; ++k) {
            out += ',' + format_double(i < r.deviation.size() ? r.deviation[i][k] : nan);
        }
        out += ',' + format_double(i < r.mean_commutator_residual.size()
                                       ? r.mean_commutator_residual[i]
                                       : nan);
        out += '\n';
    }
    return out;
}

std::string collapse_csv(const CollapseReport& r, std::uint64_t seed) {
    std::string out = seed_line(seed) + "k,eigenvalue,count,frequency,born\n";
    const int collapsed = r.n_traj - r.uncollapsed;
    for (std::size_t k = 0; k < r.histogram.size(); ++k) {
        const double freq = collapsed > 0 ? static_cast<double>(r.histogram[k]) / collapsed : 0.0;
        out += std::to_string(k) + ',' + format_double(r.eigenvalues[k]) + ',' +
               std::to_string(r.histogram[k]) + ',' + format_double(freq) + ',' +
               format_double(r.born[k]) + '\n';
    }
    return out;
}

std::string render_svg(const Chart& chart) {
    constexpr double W = 760, H = 460, L = 80, R = 150, T = 60, B = 60;
    constexpr std::size_t kMaxPoints = 2000;

    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& s : chart.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    }
    if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    if (xhi - xlo <= 0) xlo -= 0.5, xhi += 0.5;
    if (yhi - ylo <= 0) ylo -= 0.5, yhi += 0.5;
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;

    const double pw = W - L - R, ph = H - T - B;
    auto px = [&](double x) { return L + (x - xlo) / (xhi - xlo) * pw; };
    auto py = [&](double y) { return T + (yhi - y) / (yhi - ylo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<desc>seed=" << chart.seed << "</desc>\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(chart.title) << "</text>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"42\" text-anchor=\"middle\" fill=\"#555\">seed "
      << chart.seed << "</text>\n";

    for (double t : ticks(xlo, xhi, 8)) {
        o << "<line x1=\"" << fmt_short(px(t)) << "\" y1=\"" << T << "\" x2=\"" << fmt_short(px(t))
          << "\" y2=\"" << T + ph << "\" stroke=\"#eee\"/>\n";
        o << "<text x=\"" << fmt_short(px(t)) << "\" y=\"" << T + ph + 18
          << "\" text-anchor=\"middle\">" << fmt_short(t) << "</text>\n";
    }
    for (double t : ticks(ylo, yhi, 6)) {
        o << "<line x1=\"" << L << "\" y1=\"" << fmt_short(py(t)) << "\" x2=\"" << L + pw
          << "\" y2=\"" << fmt_short(py(t)) << "\" stroke=\"#eee\"/>\n";
        o << "<text x=\"" << L - 8 << "\" y=\"" << fmt_short(py(t) + 4)
          << "\" text-anchor=\"end\">" << fmt_short(t) << "</text>\n";
    }
    if (ylo < 0 && yhi > 0) {
        o << "<line x1=\"" << L << "\" y1=\"" << fmt_short(py(0)) << "\" x2=\"" << L + pw
          << "\" y2=\"" << fmt_short(py(0)) << "\" stroke=\"#999\"/>\n";
    }
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">"
      << xml_escape(chart.x_label) << "</text>\n";
    o << "<text x=\"20\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << T + ph / 2 << ")\">" << xml_escape(chart.y_label) << "</text>\n";

    for (std::size_t si = 0; si < chart.series.size(); ++si) {
        const auto& s = chart.series[si];
        const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
        const std::size_t n = std::min(s.x.size(), s.y.size());
        const std::size_t stride = std::max<std::size_t>(1, (n + kMaxPoints - 1) / kMaxPoints);
        std::string points;
        for (std::size_t i = 0; i < n; i += stride) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            points += fmt_short(px(s.x[i])) + ',' + fmt_short(py(s.y[i])) + ' ';
        }
        if (n > 0 && (n - 1) % stride != 0 && std::isfinite(s.y[n - 1])) {
            points += fmt_short(px(s.x[n - 1])) + ',' + fmt_short(py(s.y[n - 1]));
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
          << points << "\"/>\n";
        const double ly = T + 16 + 20 * static_cast<double>(si);
        o << "<line x1=\"" << L + pw + 14 << "\" y1=\"" << ly - 4 << "\" x2=\"" << L + pw + 40
          << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << L + pw + 46 << "\" y=\"" << ly << "\">" << xml_escape(s.name)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::vector<CheckOutcome> evaluate_checks(const nlohmann::ordered_json& report,
                                          const nlohmann::json& expectations) {
    if (!expectations.is_object() || !expectations.contains("checks") ||
        !expectations.at("checks").is_array()) {
        throw std::invalid_argument("expectation file must be an object with a \"checks\" array");
    }
    static const char* const kOps[] = {"<", "<=", ">", ">=", "==", "!=", "abs<"};
    std::vector<CheckOutcome> out;
    for (const auto& c : expectations.at("checks")) {
        if (!c.is_object() || !c.contains("pointer") || !c.at("pointer").is_string() ||
            !c.contains("op") || !c.at("op").is_string() || !c.contains("value") ||
            !c.at("value").is_number()) {
            throw std::invalid_argument(
                "each check needs a string \"pointer\", a string \"op\" and a numeric \"value\"");
        }
        for (const auto& [key, v] : c.items()) {
            (void)v;
            if (key != "pointer" && key != "op" && key != "value") {
                throw std::invalid_argument("unknown check field \"" + key + "\"");
            }
        }
        CheckOutcome r;
        r.pointer = c.at("pointer").get<std::string>();
        r.op = c.at("op").get<std::string>();
        r.expected = c.at("value").get<double>();
        if (std::find(std::begin(kOps), std::end(kOps), r.op) == std::end(kOps)) {
            throw std::invalid_argument("unknown check op \"" + r.op + "\"");
        }
        nlohmann::ordered_json::json_pointer ptr;
        try {
            ptr = nlohmann::ordered_json::json_pointer(r.pointer);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("bad JSON pointer \"" + r.pointer + "\": " + e.what());
        }
        if (!report.contains(ptr)) {
            r.message = "pointer not found in report";
            out.push_back(r);
            continue;
        }
        const auto& v = report.at(ptr);
        if (v.is_boolean()) {
            r.actual = v.get<bool>() ? 1.0 : 0.0;
        } else if (v.is_number()) {
            r.actual = v.get<double>();
        } else if (v.is_null()) {
            r.actual = std::nan("");
        } else {
            r.message = "value is not a number";
            out.push_back(r);
            continue;
        }
        const double a = r.actual, e = r.expected;
        if (r.op == "<") r.passed = a < e;
        else if (r.op == "<=") r.passed = a <= e;
        else if (r.op == ">") r.passed = a > e;
        else if (r.op == ">=") r.passed = a >= e;
        else if (r.op == "==") r.passed = a == e;
        else if (r.op == "!=") r.passed = a != e;
        else r.passed = std::abs(a) < e;
        out.push_back(r);
    }
    return out;
}

}  // namespace qfb

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ettwin/harness/harness.hpp"

namespace ettwin::harness {

namespace {

std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int digits = 2) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

nlohmann::json json_value(double v) { return std::isinf(v) ? nlohmann::json(num(v)) : nlohmann::json(v); }

}  // namespace

std::string SweepReport::to_csv() const {
    std::ostringstream out;
    out << "axis,axis_value,trial,estimator,p50,p75,p95,n_frames,n_failures\n";
    const std::string axis = to_string(spec.axis);
    for (const auto& c : cells) {
        out << axis << ',' << num(c.axis_value) << ',' << c.trial << ',' << to_string(c.estimator) << ','
            << num(c.result.p50) << ',' << num(c.result.p75) << ',' << num(c.result.p95) << ','
            << c.result.n_frames << ',' << c.result.n_failures << '\n';
    }
    return out.str();
}

nlohmann::json SweepReport::summary_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : summary) {
        rows.push_back({{"axis_value", json_value(r.axis_value)},
                        {"estimator", to_string(r.estimator)},
                        {"mean_p50", r.mean_p50},
                        {"std_p50", r.std_p50},
                        {"mean_p75", r.mean_p75},
                        {"std_p75", r.std_p75},
                        {"mean_p95", r.mean_p95},
                        {"std_p95", r.std_p95}});
    }
    return {{"artifact_version", artifact_version},
            {"axis", to_string(spec.axis)},
            {"trials", spec.trials},
            {"sweep", to_json(spec)},
            {"rows", rows}};
}

std::string render_svg(std::span<const SweepReport> reports, int percentile) {
    constexpr double W = 640, H = 400, left = 60, right = 20, top = 30, bottom = 50;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    struct Series {
        std::string label;
        std::vector<double> mean, std;
    };
    std::vector<Series> series;
    std::size_t n_points = 0;
    double y_max = 0.0;
    for (const auto& rep : reports) {
        for (auto est : rep.spec.estimators) {
            Series s;
            s.label = to_string(rep.spec.axis) + " / " + to_string(est);
            for (const auto& row : rep.summary) {
                if (row.estimator != est) continue;
                const double m = percentile == 50 ? row.mean_p50 : percentile == 75 ? row.mean_p75 : row.mean_p95;
                const double d = percentile == 50 ? row.std_p50 : percentile == 75 ? row.std_p75 : row.std_p95;
                s.mean.push_back(m);
                s.std.push_back(d);
                y_max = std::max(y_max, m + d);
            }
            n_points = std::max(n_points, s.mean.size());
            series.push_back(std::move(s));
        }
    }
    if (y_max <= 0.0) y_max = 1.0;
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](std::size_t i) { return left + (n_points > 1 ? pw * double(i) / double(n_points - 1) : pw / 2); };
    auto py = [&](double v) { return top + ph * (1.0 - v / y_max); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">p" << percentile
        << " angular error (deg), mean &#177; std</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = y_max * k / 4.0;
        out << "<text x=\"" << left - 6 << "\" y=\"" << fixed(py(v) + 4, 1) << "\" text-anchor=\"end\" font-size=\"10\">"
            << fixed(v, 1) << "</text>\n";
    }
    if (!reports.empty()) {
        const auto& values = reports.front().spec.axis_values;
        for (std::size_t i = 0; i < values.size() && i < n_points; ++i)
            out << "<text x=\"" << fixed(px(i), 1) << "\" y=\"" << top + ph + 16
                << "\" text-anchor=\"middle\" font-size=\"10\">" << num(values[i]) << "</text>\n";
        out << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
            << to_string(reports.front().spec.axis) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % std::size(colors)];
        std::string points;
        for (std::size_t i = 0; i < series[s].mean.size(); ++i) {
            points += fixed(px(i), 1) + "," + fixed(py(series[s].mean[i]), 1) + " ";
            out << "<line x1=\"" << fixed(px(i), 1) << "\" y1=\"" << fixed(py(series[s].mean[i] - series[s].std[i]), 1)
                << "\" x2=\"" << fixed(px(i), 1) << "\" y2=\"" << fixed(py(series[s].mean[i] + series[s].std[i]), 1)
                << "\" stroke=\"" << color << "\"/>\n";
        }
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
        out << "<text x=\"" << left + 10 << "\" y=\"" << top + 14 + 14 * s << "\" font-size=\"11\" fill=\"" << color
            << "\">" << series[s].label << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace ettwin::harness

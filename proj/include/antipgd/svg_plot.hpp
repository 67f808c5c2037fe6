#ifndef ANTIPGD_SVG_PLOT_HPP
#define ANTIPGD_SVG_PLOT_HPP

#include "antipgd/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace antipgd {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> mean;
    /// Same length as mean; nullopt where no spread is available.
    std::vector<std::optional<double>> std;
};

struct PanelStyle {
    std::string title;
    std::string y_label;
    bool log_y = false;
    int width = 640;
    int height = 400;
};

/// Reads series for `column` from an aggregate CSV (config, step, <column>_mean, <column>_std).
inline std::vector<Series> series_from_aggregate(const CsvTable& table, const std::string& column,
                                                 const std::vector<std::string>& configs = {}) {
    const std::size_t c_config = table.column("config");
    const std::size_t c_step = table.column("step");
    const std::size_t c_mean = table.column(column + "_mean");
    const std::size_t c_std = table.column(column + "_std");
    std::vector<Series> out;
    std::map<std::string, std::size_t> index;
    for (const auto& row : table.rows) {
        const std::string& name = row[c_config];
        if (!configs.empty() && std::find(configs.begin(), configs.end(), name) == configs.end()) {
            continue;
        }
        const auto mean = parse_optional(row[c_mean]);
        if (!mean) {
            continue;
        }
        auto [it, inserted] = index.try_emplace(name, out.size());
        if (inserted) {
            out.push_back(Series{.label = name, .x = {}, .mean = {}, .std = {}});
        }
        Series& s = out[it->second];
        s.x.push_back(parse_double(row[c_step]));
        s.mean.push_back(*mean);
        s.std.push_back(parse_optional(row[c_std]));
    }
    return out;
}

namespace svg_detail {

inline std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

inline std::string tick_label(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace svg_detail

/**
 * One panel: a mean line per series and, where std is present, a shaded
 * mean +/- std band. With log_y, values <= 0 are dropped from lines and band
 * edges are clipped to the smallest positive value on the panel.
 */
inline std::string render_panel(const std::vector<Series>& series, const PanelStyle& style) {
    using namespace svg_detail;
    const double left = 70.0;
    const double right = 150.0;
    const double top = 30.0;
    const double bottom = 45.0;
    const double pw = style.width - left - right;
    const double ph = style.height - top - bottom;

    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    double min_positive = x_lo;
    auto include_y = [&](double y) {
        if (!std::isfinite(y) || (style.log_y && y <= 0.0)) {
            return;
        }
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
        if (y > 0.0) {
            min_positive = std::min(min_positive, y);
        }
    };
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            include_y(s.mean[i]);
            if (s.std[i]) {
                include_y(s.mean[i] + *s.std[i]);
                include_y(s.mean[i] - *s.std[i]);
            }
        }
    }
    if (!std::isfinite(x_lo)) {
        x_lo = 0.0;
        x_hi = 1.0;
    }
    if (!std::isfinite(y_lo)) {
        y_lo = style.log_y ? 1.0 : 0.0;
        y_hi = style.log_y ? 10.0 : 1.0;
    }
    if (x_hi == x_lo) {
        x_hi = x_lo + 1.0;
    }
    auto ty = [&](double y) { return style.log_y ? std::log10(y) : y; };
    double ly_lo = ty(y_lo);
    double ly_hi = ty(y_hi);
    if (ly_hi == ly_lo) {
        ly_lo -= 0.5;
        ly_hi += 0.5;
    }
    auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double y) { return top + (1.0 - (ty(y) - ly_lo) / (ly_hi - ly_lo)) * ph; };
    auto clip = [&](double y) { return style.log_y ? std::max(y, min_positive) : y; };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(style.width) +
                      "\" height=\"" + std::to_string(style.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + num(left + pw / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" +
           escape(style.title) + "</text>\n";
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double fx = x_lo + (x_hi - x_lo) * i / 4.0;
        svg += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(top + ph + 15) + "\" text-anchor=\"middle\">" +
               tick_label(fx) + "</text>\n";
        const double fy = ly_lo + (ly_hi - ly_lo) * i / 4.0;
        const double value = style.log_y ? std::pow(10.0, fy) : fy;
        const double y = top + (1.0 - i / 4.0) * ph;
        svg += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left) + "\" y2=\"" + num(y) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + tick_label(value) +
               "</text>\n";
    }
    svg += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(style.height - 8.0) +
           "\" text-anchor=\"middle\">step</text>\n";
    svg += "<text transform=\"translate(14 " + num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape(style.y_label) + (style.log_y ? " (log)" : "") + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const Series& s = series[k];
        const std::string color = kPalette[k % std::size(kPalette)];
        std::string upper;
        std::string lower;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (s.std[i]) {
                upper += num(px(s.x[i])) + "," + num(py(clip(s.mean[i] + *s.std[i]))) + " ";
            }
        }
        for (std::size_t i = s.x.size(); i-- > 0;) {
            if (s.std[i]) {
                lower += num(px(s.x[i])) + "," + num(py(clip(s.mean[i] - *s.std[i]))) + " ";
            }
        }
        if (!upper.empty()) {
            svg += "<polygon class=\"band\" points=\"" + upper + lower + "\" fill=\"" + color +
                   "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        }
        std::string line;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.mean[i]) && !(style.log_y && s.mean[i] <= 0.0)) {
                line += num(px(s.x[i])) + "," + num(py(s.mean[i])) + " ";
            }
        }
        svg += "<polyline class=\"mean\" points=\"" + line + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        const double ly = top + 12.0 + 16.0 * static_cast<double>(k);
        svg += "<line x1=\"" + num(left + pw + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(left + pw + 30) +
               "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + num(left + pw + 34) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace antipgd

#endif  // ANTIPGD_SVG_PLOT_HPP

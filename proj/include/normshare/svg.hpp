// Self-contained SVG line/scatter charts for the experiment reports. Plots are
// a convenience; the CSVs next to them carry the same data.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/results.hpp"

namespace normshare {

struct ChartSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // x, y
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline const char* series_color(size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % 8];
}

}  // namespace detail

// Line chart with an optionally log-scaled x axis. y defaults to [0,100]
// unless the data leaves that range.
inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::string& y_label, const std::vector<ChartSeries>& series,
                                     bool log_x) {
    const double width = 640, height = 420;
    const double ml = 64, mr = 170, mt = 40, mb = 48;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = 100.0;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            const double xv = log_x ? std::log10(x) : x;
            xmin = std::min(xmin, xv);
            xmax = std::max(xmax, xv);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (xmax - xmin < 1e-9) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    const double yspan = ymax - ymin < 1e-9 ? 1.0 : ymax - ymin;
    ymin -= 0.05 * yspan;
    ymax += 0.05 * yspan;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::string out;
    out += cat("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"", width, "\" height=\"", height, "\">\n");
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += cat("<text x=\"", detail::svg_num(ml + pw / 2), "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">",
               title, "</text>\n");
    out += cat("<rect x=\"", detail::svg_num(ml), "\" y=\"", detail::svg_num(mt), "\" width=\"", detail::svg_num(pw),
               "\" height=\"", detail::svg_num(ph), "\" fill=\"none\" stroke=\"#333\"/>\n");

    // x ticks: decades when log-scaled, else 5 evenly spaced
    std::vector<double> xticks;
    if (log_x) {
        for (int d = static_cast<int>(std::floor(xmin)); d <= static_cast<int>(std::ceil(xmax)); ++d)
            if (d >= xmin - 1e-9 && d <= xmax + 1e-9) xticks.push_back(d);
    } else {
        for (int i = 0; i <= 4; ++i) xticks.push_back(xmin + (xmax - xmin) * i / 4);
    }
    for (double t : xticks) {
        const double x = px(t);
        out += cat("<line x1=\"", detail::svg_num(x), "\" y1=\"", detail::svg_num(mt + ph), "\" x2=\"",
                   detail::svg_num(x), "\" y2=\"", detail::svg_num(mt + ph + 5), "\" stroke=\"#333\"/>\n");
        const double label = log_x ? std::pow(10.0, t) : t;
        char buf[32];
        if (log_x)
            std::snprintf(buf, sizeof buf, "%g", label);
        else
            std::snprintf(buf, sizeof buf, "%.0f", label);
        out += cat("<text x=\"", detail::svg_num(x), "\" y=\"", detail::svg_num(mt + ph + 18),
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">", buf, "</text>\n");
    }
    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4;
        const double y = py(yv);
        out += cat("<line x1=\"", detail::svg_num(ml - 5), "\" y1=\"", detail::svg_num(y), "\" x2=\"",
                   detail::svg_num(ml), "\" y2=\"", detail::svg_num(y), "\" stroke=\"#333\"/>\n");
        out += cat("<text x=\"", detail::svg_num(ml - 8), "\" y=\"", detail::svg_num(y + 4),
                   "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">", detail::svg_num(yv),
                   "</text>\n");
    }
    out += cat("<text x=\"", detail::svg_num(ml + pw / 2), "\" y=\"", detail::svg_num(height - 10),
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">", x_label, "</text>\n");
    out += cat("<text x=\"16\" y=\"", detail::svg_num(mt + ph / 2),
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 ",
               detail::svg_num(mt + ph / 2), ")\">", y_label, "</text>\n");

    for (size_t s = 0; s < series.size(); ++s) {
        const char* color = detail::series_color(s);
        std::string poly;
        for (const auto& [x, y] : series[s].points) {
            const double xv = log_x ? std::log10(x) : x;
            poly += cat(detail::svg_num(px(xv)), ",", detail::svg_num(py(y)), " ");
        }
        if (series[s].points.size() > 1)
            out += cat("<polyline points=\"", poly, "\" fill=\"none\" stroke=\"", color, "\" stroke-width=\"1.8\"/>\n");
        for (const auto& [x, y] : series[s].points) {
            const double xv = log_x ? std::log10(x) : x;
            out += cat("<circle cx=\"", detail::svg_num(px(xv)), "\" cy=\"", detail::svg_num(py(y)),
                       "\" r=\"2.6\" fill=\"", color, "\"/>\n");
        }
        const double ly = mt + 14 + 18 * static_cast<double>(s);
        out += cat("<line x1=\"", detail::svg_num(ml + pw + 10), "\" y1=\"", detail::svg_num(ly - 4), "\" x2=\"",
                   detail::svg_num(ml + pw + 30), "\" y2=\"", detail::svg_num(ly - 4), "\" stroke=\"", color,
                   "\" stroke-width=\"2\"/>\n");
        out += cat("<text x=\"", detail::svg_num(ml + pw + 34), "\" y=\"", detail::svg_num(ly),
                   "\" font-family=\"sans-serif\" font-size=\"11\">", series[s].label, "</text>\n");
    }
    out += "</svg>\n";
    return out;
}

inline void write_line_chart(const std::string& path, const std::string& title, const std::string& x_label,
                             const std::string& y_label, const std::vector<ChartSeries>& series, bool log_x) {
    write_file_atomic(path, render_line_chart(title, x_label, y_label, series, log_x));
}

struct ScatterPoint {
    double x = 0, y = 0;
    std::string label;
};

// Scatter with point labels; used by the correlation reports.
inline void write_scatter_chart(const std::string& path, const std::string& title, const std::string& x_label,
                                const std::string& y_label, const std::vector<ScatterPoint>& points) {
    std::vector<ChartSeries> series;
    ChartSeries s;
    s.label = "datasets";
    for (const auto& p : points) s.points.push_back({p.x, p.y});
    series.push_back(std::move(s));
    std::string svg = render_line_chart(title, x_label, y_label, series, /*log_x=*/false);
    // Append labels before the closing tag.
    const std::string closing = "</svg>\n";
    svg.erase(svg.size() - closing.size());
    // Recompute the plot transform exactly as render_line_chart does.
    double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = 100.0;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (xmax - xmin < 1e-9) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    const double yspan = ymax - ymin < 1e-9 ? 1.0 : ymax - ymin;
    ymin -= 0.05 * yspan;
    ymax += 0.05 * yspan;
    const double ml = 64, mt = 40, pw = 640 - 64 - 170, ph = 420 - 40 - 48;
    for (const auto& p : points) {
        const double x = ml + (p.x - xmin) / (xmax - xmin) * pw;
        const double y = mt + ph - (p.y - ymin) / (ymax - ymin) * ph;
        svg += cat("<text x=\"", detail::svg_num(x + 4), "\" y=\"", detail::svg_num(y - 4),
                   "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555\">", p.label, "</text>\n");
    }
    svg += closing;
    write_file_atomic(path, svg);
}

}  // namespace normshare

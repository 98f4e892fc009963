#include "finrl_dapo/svg_chart.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace finrl_dapo::chart {

namespace {

constexpr double kWidth = 960.0;
constexpr double kHeight = 540.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 30.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 60.0;

const std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v;
    return s.str();
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_line_chart(const std::vector<Series>& series,
                              const std::vector<std::string>& x_labels,
                              const std::string& title, const std::string& y_label) {
    double lo = 0.0;
    double hi = 0.0;
    bool any = false;
    std::size_t max_len = 1;
    for (const auto& s : series) {
        max_len = std::max(max_len, s.values.size());
        for (double v : s.values) {
            if (!any) {
                lo = hi = v;
                any = true;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (!any) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const double x_step = max_len > 1 ? plot_w / static_cast<double>(max_len - 1) : 0.0;
    auto x_at = [&](std::size_t i) { return kLeft + x_step * static_cast<double>(i); };
    auto y_at = [&](double v) { return kTop + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"18\">" << escape(title) << "</text>\n";
    svg << "<text x=\"18\" y=\"" << kTop + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 18 " << kTop + plot_h / 2 << ")\">" << escape(y_label)
        << "</text>\n";
    svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";

    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        const double y = y_at(v);
        svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + plot_w
            << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v)
            << "</text>\n";
    }
    if (!x_labels.empty()) {
        const std::size_t ticks = std::min<std::size_t>(6, x_labels.size());
        for (std::size_t t = 0; t < ticks; ++t) {
            const std::size_t i =
                ticks == 1 ? 0 : t * (x_labels.size() - 1) / (ticks - 1);
            svg << "<text x=\"" << x_at(i) << "\" y=\"" << kTop + plot_h + 20
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
                << escape(x_labels[i]) << "</text>\n";
        }
    }

    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& values = series[s].values;
        if (values.empty()) continue;
        svg << "<polyline fill=\"none\" stroke=\"" << kPalette[s % kPalette.size()]
            << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < values.size(); ++i)
            svg << fmt(x_at(i)) << "," << fmt(y_at(values[i])) << " ";
        svg << "\"/>\n";
    }

    double legend_y = kTop + 14.0;
    for (std::size_t s = 0; s < series.size(); ++s) {
        svg << "<rect x=\"" << kLeft + 12 << "\" y=\"" << legend_y - 9
            << "\" width=\"14\" height=\"4\" fill=\"" << kPalette[s % kPalette.size()]
            << "\"/>\n";
        svg << "<text x=\"" << kLeft + 32 << "\" y=\"" << legend_y
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(series[s].label)
            << "</text>\n";
        legend_y += 16.0;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace finrl_dapo::chart

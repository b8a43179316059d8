#include "genagent/render_svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "genagent/numeric_format.hpp"

namespace genagent::render {

namespace {

constexpr double kCellSize = 56.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;
constexpr double kMarginRight = 120.0;

std::string esc(const std::string& s) {
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

// Diverging blue-white-red scale; t in [-1, 1] with 0 at the midpoint color.
std::string diverging_color(double t) {
    t = std::clamp(t, -1.0, 1.0);
    int r, g, b;
    if (t >= 0) {
        // red side: white (244,244,243) -> (215,48,39)
        r = static_cast<int>(std::lround(244 + (215 - 244) * t));
        g = static_cast<int>(std::lround(244 + (48 - 244) * t));
        b = static_cast<int>(std::lround(243 + (39 - 243) * t));
    } else {
        const double u = -t;  // blue side: white -> (69,117,180)
        r = static_cast<int>(std::lround(244 + (69 - 244) * u));
        g = static_cast<int>(std::lround(244 + (117 - 244) * u));
        b = static_cast<int>(std::lround(243 + (180 - 243) * u));
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

std::string cell_label(double v) { return format_value(v, 2); }

}  // namespace

void render_heatmap_svg(std::ostream& out, const experiments::GridTable& table,
                        const HeatmapOptions& options) {
    const size_t n_gaps = table.gaps.size();
    const size_t n_trends = table.trends.size();
    const double plot_w = kCellSize * static_cast<double>(n_trends);
    const double plot_h = kCellSize * static_cast<double>(n_gaps);
    const double width = kMarginLeft + plot_w + kMarginRight;
    const double height = kMarginTop + plot_h + kMarginBottom;

    double spread = 0.0;
    for (const auto& v : table.values)
        if (v) spread = std::max(spread, std::fabs(*v - options.midpoint));
    if (spread == 0.0) spread = 1.0;

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_number(width)
        << "\" height=\"" << format_number(height) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!options.title.empty())
        out << "<text x=\"" << format_number(kMarginLeft + plot_w / 2)
            << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << esc(options.title)
            << "</text>\n";

    for (size_t gi = 0; gi < n_gaps; ++gi) {
        // gap values increase upward
        const double y = kMarginTop + kCellSize * static_cast<double>(n_gaps - 1 - gi);
        for (size_t ti = 0; ti < n_trends; ++ti) {
            const double x = kMarginLeft + kCellSize * static_cast<double>(ti);
            const auto& v = table.at(gi, ti);
            out << "<rect class=\"cell\" x=\"" << format_number(x) << "\" y=\""
                << format_number(y) << "\" width=\"" << format_number(kCellSize)
                << "\" height=\"" << format_number(kCellSize) << "\" fill=\""
                << (v ? diverging_color((*v - options.midpoint) / spread) : std::string("white"))
                << "\" stroke=\"#999\"/>\n";
            if (v)
                out << "<text x=\"" << format_number(x + kCellSize / 2) << "\" y=\""
                    << format_number(y + kCellSize / 2 + 4)
                    << "\" text-anchor=\"middle\" font-size=\"11\">" << cell_label(*v)
                    << "</text>\n";
        }
        out << "<text x=\"" << format_number(kMarginLeft - 8) << "\" y=\""
            << format_number(y + kCellSize / 2 + 4)
            << "\" text-anchor=\"end\" font-size=\"11\">" << format_number(table.gaps[gi])
            << "</text>\n";
    }
    for (size_t ti = 0; ti < n_trends; ++ti) {
        const double x = kMarginLeft + kCellSize * (static_cast<double>(ti) + 0.5);
        out << "<text x=\"" << format_number(x) << "\" y=\""
            << format_number(kMarginTop + plot_h + 18)
            << "\" text-anchor=\"middle\" font-size=\"11\">" << format_number(table.trends[ti])
            << "</text>\n";
    }
    out << "<text x=\"" << format_number(kMarginLeft + plot_w / 2) << "\" y=\""
        << format_number(kMarginTop + plot_h + 38)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << esc(options.x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << format_number(kMarginTop + plot_h / 2)
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
        << format_number(kMarginTop + plot_h / 2) << ")\">" << esc(options.y_label)
        << "</text>\n";

    // Legend: low / midpoint / high swatches.
    const double lx = kMarginLeft + plot_w + 20;
    const double low = options.midpoint - spread;
    const double high = options.midpoint + spread;
    const struct {
        double t;
        double value;
    } stops[] = {{1.0, high}, {0.0, options.midpoint}, {-1.0, low}};
    for (int i = 0; i < 3; ++i) {
        const double ly = kMarginTop + 20 + 26 * i;
        out << "<rect x=\"" << format_number(lx) << "\" y=\"" << format_number(ly)
            << "\" width=\"18\" height=\"18\" fill=\"" << diverging_color(stops[i].t)
            << "\" stroke=\"#999\"/>\n";
        out << "<text x=\"" << format_number(lx + 24) << "\" y=\"" << format_number(ly + 13)
            << "\" font-size=\"11\">" << cell_label(stops[i].value) << "</text>\n";
    }
    out << "</svg>\n";
}

namespace {

struct Scale {
    double lo, hi, pix_lo, pix_hi;
    double operator()(double v) const {
        if (hi == lo) return (pix_lo + pix_hi) / 2;
        return pix_lo + (v - lo) / (hi - lo) * (pix_hi - pix_lo);
    }
};

}  // namespace

void render_series_svg(std::ostream& out, const std::vector<experiments::TimeSeriesRow>& rows,
                       const SeriesOptions& options) {
    const double width = 960, height = 420;
    const double left = 70, right = 60, top = 40, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double lo = 1e300, hi = -1e300;
    for (const auto& r : rows) {
        lo = std::min({lo, r.price, r.fundamental});
        hi = std::max({hi, r.price, r.fundamental});
    }
    if (rows.empty()) {
        lo = 0;
        hi = 1;
    }
    const Scale x{0, static_cast<double>(rows.empty() ? 1 : rows.size() - 1), left,
                  left + plot_w};
    const Scale y_price{lo, hi, top + plot_h, top};
    const Scale y_prob{0, 1, top + plot_h, top};

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_number(width)
        << "\" height=\"" << format_number(height) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!options.title.empty())
        out << "<text x=\"" << format_number(left + plot_w / 2)
            << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << esc(options.title)
            << "</text>\n";
    out << "<rect x=\"" << format_number(left) << "\" y=\"" << format_number(top)
        << "\" width=\"" << format_number(plot_w) << "\" height=\"" << format_number(plot_h)
        << "\" fill=\"none\" stroke=\"#333\"/>\n";

    auto polyline = [&](auto value_of, const char* stroke, const char* dash) {
        std::string points;
        for (size_t i = 0; i < rows.size(); ++i) {
            const auto v = value_of(rows[i]);
            if (!v) {
                if (!points.empty()) {
                    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\"" << dash
                        << " points=\"" << points << "\"/>\n";
                    points.clear();
                }
                continue;
            }
            points += format_number(x(static_cast<double>(i))) + "," + format_number(*v) + " ";
        }
        if (!points.empty())
            out << "<polyline fill=\"none\" stroke=\"" << stroke << "\"" << dash
                << " points=\"" << points << "\"/>\n";
    };

    polyline([&](const auto& r) { return std::optional<double>(y_price(r.price)); }, "#1f77b4",
             "");
    polyline([&](const auto& r) { return std::optional<double>(y_price(r.fundamental)); },
             "#ff7f0e", "");
    polyline(
        [&](const auto& r) -> std::optional<double> {
            if (!r.w_fund_ma) return std::nullopt;
            return y_prob(*r.w_fund_ma);
        },
        "#d62728", " stroke-dasharray=\"6 4\"");

    for (size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].mean_w_fund) continue;
        out << "<circle class=\"wf\" cx=\"" << format_number(x(static_cast<double>(i)))
            << "\" cy=\"" << format_number(y_prob(*rows[i].mean_w_fund))
            << "\" r=\"2\" fill=\"#2ca02c\"/>\n";
    }

    // Axis annotations: ends of the date range and both value scales.
    if (!rows.empty()) {
        out << "<text x=\"" << format_number(left) << "\" y=\""
            << format_number(top + plot_h + 18) << "\" font-size=\"11\">"
            << rows.front().date.str() << "</text>\n";
        out << "<text x=\"" << format_number(left + plot_w) << "\" y=\""
            << format_number(top + plot_h + 18) << "\" text-anchor=\"end\" font-size=\"11\">"
            << rows.back().date.str() << "</text>\n";
    }
    out << "<text x=\"" << format_number(left - 6) << "\" y=\"" << format_number(top + 12)
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_value(hi) << "</text>\n";
    out << "<text x=\"" << format_number(left - 6) << "\" y=\"" << format_number(top + plot_h)
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_value(lo) << "</text>\n";
    out << "<text x=\"" << format_number(left + plot_w + 6) << "\" y=\""
        << format_number(top + 12) << "\" font-size=\"11\">1</text>\n";
    out << "<text x=\"" << format_number(left + plot_w + 6) << "\" y=\""
        << format_number(top + plot_h) << "\" font-size=\"11\">0</text>\n";
    out << "</svg>\n";
}

}  // namespace genagent::render

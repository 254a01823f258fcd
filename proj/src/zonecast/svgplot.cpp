#include <zonecast/svgplot.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <zonecast/csv.hpp>
#include <zonecast/errors.hpp>

namespace zonecast::plot {
namespace {

constexpr double kWidth = 960.0;
constexpr double kHeight = 540.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;  // room for the legend
constexpr double kTop = 50.0;
constexpr double kBottom = 55.0;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string esc(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
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

std::string num(double v) { return csv::fmt_double(v, 6); }

struct Range {
    double lo = 0.0;
    double hi = 1.0;
    double span() const { return hi - lo; }
};

Range pad_range(double lo, double hi) {
    if (!(lo < hi)) {
        const double bump = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        return {lo - bump, hi + bump};
    }
    const double pad = (hi - lo) * 0.05;
    return {lo - pad, hi + pad};
}

/// Round tick step: largest of {1, 2, 5} * 10^k giving 4-8 ticks.
double tick_step(double span) {
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    if (frac >= 5.0)
        return 5.0 * mag;
    if (frac >= 2.0)
        return 2.0 * mag;
    return mag;
}

void validate(const std::vector<Series>& series, std::size_t npoints) {
    if (series.empty())
        throw ConfigurationError("chart needs at least one series");
    if (npoints == 0)
        throw ConfigurationError("chart needs at least one point");
    for (const Series& s : series) {
        if (s.y.size() != npoints)
            throw ConfigurationError("chart series " + s.label + " has " +
                                     std::to_string(s.y.size()) + " points, expected " +
                                     std::to_string(npoints));
        if (!s.ci.empty() && s.ci.size() != npoints)
            throw ConfigurationError("chart series " + s.label +
                                     " has a mismatched interval vector");
    }
}

Range value_range(const std::vector<Series>& series, bool include_zero) {
    double lo = include_zero ? 0.0 : std::numeric_limits<double>::infinity();
    double hi = include_zero ? 0.0 : -std::numeric_limits<double>::infinity();
    for (const Series& s : series) {
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            const double half = s.ci.empty() ? 0.0 : s.ci[i];
            lo = std::min(lo, s.y[i] - half);
            hi = std::max(hi, s.y[i] + half);
        }
    }
    return pad_range(lo, hi);
}

class SvgFile {
public:
    SvgFile(const std::string& path, const std::string& meta_line) : out_(path) {
        if (!out_)
            throw FormatError("cannot open chart file for writing: " + path);
        out_ << "<!-- " << esc(meta_line) << " -->\n";
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth)
             << "\" height=\"" << num(kHeight) << "\" viewBox=\"0 0 " << num(kWidth) << ' '
             << num(kHeight) << "\" font-family=\"sans-serif\">\n";
        out_ << "<rect width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
             << "\" fill=\"white\"/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& attrs) {
        out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" " << attrs << '>' << esc(s)
             << "</text>\n";
    }
    void line(double x1, double y1, double x2, double y2, const std::string& attrs) {
        out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
             << "\" y2=\"" << num(y2) << "\" " << attrs << "/>\n";
    }
    void raw(const std::string& s) { out_ << s; }
    void finish(const std::string& path) {
        out_ << "</svg>\n";
        out_.flush();
        if (!out_)
            throw FormatError("failed while writing chart file: " + path);
    }

private:
    std::ofstream out_;
};

void draw_frame(SvgFile& svg, const std::string& title, const std::string& x_label,
                const std::string& y_label, const Range& yr) {
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom;
    const double y1 = kTop;
    svg.text(kWidth / 2.0, kTop - 20.0, title,
             "text-anchor=\"middle\" font-size=\"16\" fill=\"#222\"");
    svg.line(x0, y0, x1, y0, "stroke=\"#444\" stroke-width=\"1\"");
    svg.line(x0, y0, x0, y1, "stroke=\"#444\" stroke-width=\"1\"");
    svg.text((x0 + x1) / 2.0, kHeight - 12.0, x_label,
             "text-anchor=\"middle\" font-size=\"13\" fill=\"#222\"");
    svg.text(16.0, (y0 + y1) / 2.0, y_label,
             "text-anchor=\"middle\" font-size=\"13\" fill=\"#222\" transform=\"rotate(-90 16 " +
                 num((y0 + y1) / 2.0) + ")\"");
    const double step = tick_step(yr.span());
    const double first = std::ceil(yr.lo / step) * step;
    for (double v = first; v <= yr.hi + step * 1e-9; v += step) {
        const double py = y0 - (v - yr.lo) / yr.span() * (y0 - y1);
        svg.line(x0, py, x1, py, "stroke=\"#ddd\" stroke-width=\"1\"");
        svg.text(x0 - 8.0, py + 4.0, csv::fmt_double(v, 6),
                 "text-anchor=\"end\" font-size=\"11\" fill=\"#444\"");
    }
}

void draw_legend(SvgFile& svg, const std::vector<Series>& series) {
    const double lx = kWidth - kRight + 18.0;
    double ly = kTop + 10.0;
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % kPaletteSize];
        svg.raw("<rect x=\"" + num(lx) + "\" y=\"" + num(ly - 9.0) +
                "\" width=\"14\" height=\"14\" fill=\"" + color + "\"/>\n");
        svg.text(lx + 20.0, ly + 2.0, series[s].label, "font-size=\"12\" fill=\"#222\"");
        ly += 22.0;
    }
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& meta_line,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<double>& x,
                      const std::vector<Series>& series) {
    validate(series, x.size());
    const Range yr = value_range(series, false);
    double xlo = x.front();
    double xhi = x.back();
    for (const double v : x) {
        xlo = std::min(xlo, v);
        xhi = std::max(xhi, v);
    }
    const Range xr = xlo == xhi ? pad_range(xlo, xhi) : Range{xlo, xhi};
    const double px0 = kLeft;
    const double px1 = kWidth - kRight;
    const double py0 = kHeight - kBottom;
    const double py1 = kTop;
    const auto map_x = [&](double v) { return px0 + (v - xr.lo) / xr.span() * (px1 - px0); };
    const auto map_y = [&](double v) { return py0 - (v - yr.lo) / yr.span() * (py0 - py1); };

    SvgFile svg(path, meta_line);
    draw_frame(svg, title, x_label, y_label, yr);
    const double xstep = tick_step(xr.span());
    const double xfirst = std::ceil(xr.lo / xstep) * xstep;
    for (double v = xfirst; v <= xr.hi + xstep * 1e-9; v += xstep)
        svg.text(map_x(v), py0 + 18.0, csv::fmt_double(v, 6),
                 "text-anchor=\"middle\" font-size=\"11\" fill=\"#444\"");

    for (std::size_t s = 0; s < series.size(); ++s) {
        const Series& ser = series[s];
        const char* color = kPalette[s % kPaletteSize];
        if (!ser.ci.empty()) {
            std::string pts;
            for (std::size_t i = 0; i < x.size(); ++i)
                pts += num(map_x(x[i])) + "," + num(map_y(ser.y[i] + ser.ci[i])) + " ";
            for (std::size_t i = x.size(); i-- > 0;)
                pts += num(map_x(x[i])) + "," + num(map_y(ser.y[i] - ser.ci[i])) + " ";
            svg.raw("<polygon points=\"" + pts + "\" fill=\"" + color +
                    "\" opacity=\"0.15\"/>\n");
        }
        std::string pts;
        for (std::size_t i = 0; i < x.size(); ++i)
            pts += num(map_x(x[i])) + "," + num(map_y(ser.y[i])) + " ";
        svg.raw("<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
                "\" stroke-width=\"1.6\"/>\n");
    }
    draw_legend(svg, series);
    svg.finish(path);
}

void write_bar_chart(const std::string& path, const std::string& meta_line,
                     const std::string& title, const std::string& y_label,
                     const std::vector<std::string>& categories,
                     const std::vector<Series>& series) {
    validate(series, categories.size());
    const Range yr = value_range(series, true);
    const double px0 = kLeft;
    const double px1 = kWidth - kRight;
    const double py0 = kHeight - kBottom;
    const double py1 = kTop;
    const auto map_y = [&](double v) { return py0 - (v - yr.lo) / yr.span() * (py0 - py1); };
    const std::size_t ncat = categories.size();
    const std::size_t nser = series.size();
    const double group_w = (px1 - px0) / static_cast<double>(ncat);
    const double bar_w = group_w * 0.8 / static_cast<double>(nser);

    SvgFile svg(path, meta_line);
    draw_frame(svg, title, "", y_label, yr);
    for (std::size_t c = 0; c < ncat; ++c) {
        const double cx = px0 + (static_cast<double>(c) + 0.5) * group_w;
        svg.raw("<text x=\"" + num(cx) + "\" y=\"" + num(py0 + 14.0) +
                "\" text-anchor=\"end\" font-size=\"10\" fill=\"#444\" transform=\"rotate(-45 " +
                num(cx) + " " + num(py0 + 14.0) + ")\">" + esc(categories[c]) + "</text>\n");
        for (std::size_t s = 0; s < nser; ++s) {
            const Series& ser = series[s];
            const char* color = kPalette[s % kPaletteSize];
            const double bx =
                cx - group_w * 0.4 + static_cast<double>(s) * bar_w;
            const double zero = map_y(std::max(yr.lo, std::min(0.0, yr.hi)));
            const double vy = map_y(ser.y[c]);
            const double top = std::min(zero, vy);
            const double h = std::abs(zero - vy);
            svg.raw("<rect x=\"" + num(bx) + "\" y=\"" + num(top) + "\" width=\"" +
                    num(bar_w * 0.92) + "\" height=\"" + num(h) + "\" fill=\"" + color +
                    "\"/>\n");
            if (!ser.ci.empty() && ser.ci[c] > 0.0) {
                const double mx = bx + bar_w * 0.46;
                svg.line(mx, map_y(ser.y[c] - ser.ci[c]), mx, map_y(ser.y[c] + ser.ci[c]),
                         "stroke=\"#222\" stroke-width=\"1\"");
            }
        }
    }
    draw_legend(svg, series);
    svg.finish(path);
}

}  // namespace zonecast::plot

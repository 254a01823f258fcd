#pragma once

#include <string>
#include <vector>

namespace zonecast::plot {

/// One plotted series: y values over the shared x axis, with optional
/// symmetric error half-widths (drawn as a band on line charts and as error
/// bars on bar charts).
struct Series {
    std::string label;
    std::vector<double> y;
    std::vector<double> ci;  // empty = no interval
};

void write_line_chart(const std::string& path, const std::string& meta_line,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<double>& x,
                      const std::vector<Series>& series);

void write_bar_chart(const std::string& path, const std::string& meta_line,
                     const std::string& title, const std::string& y_label,
                     const std::vector<std::string>& categories,
                     const std::vector<Series>& series);

}  // namespace zonecast::plot

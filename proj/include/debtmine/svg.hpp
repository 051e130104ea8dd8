#pragma once

#include <ostream>
#include <string>
#include <vector>

// Minimal deterministic SVG charts: fixed canvas, fixed number formatting.
namespace debtmine::svg {

struct Point {
    double x = 0.0;
    double y = 0.0;
    std::string label;
    bool highlight = false;
};

void scatter(std::ostream& out, const std::string& title, const std::vector<Point>& points,
             const std::string& x_label, const std::string& y_label);

struct Series {
    std::string name;
    std::vector<double> values; ///< plotted at x = 1, 2, ...
};

void line_chart(std::ostream& out, const std::string& title, const std::vector<Series>& series,
                const std::string& x_label, const std::string& y_label);

struct BarGroup {
    std::string label;
    std::vector<double> values; ///< one per series
};

void grouped_bars(std::ostream& out, const std::string& title, const std::vector<std::string>& series_names,
                  const std::vector<BarGroup>& groups, const std::string& y_label);

} // namespace debtmine::svg

#include "debtmine/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace debtmine::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 70.0, kRight = 170.0, kTop = 50.0, kBottom = 60.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void pad(double& lo, double& hi) {
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
}

void open(std::ostream& out, const std::string& title) {
    out << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
                       "font-family=\"sans-serif\" font-size=\"11\">\n",
                       kWidth, kHeight);
    out << fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", kWidth, kHeight);
    out << fmt::format("<text x=\"{:.1f}\" y=\"28\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
                       kWidth / 2.0, xml(title));
}

void axes(std::ostream& out, const Frame& f, const std::string& x_label, const std::string& y_label) {
    const double left = kLeft, right = kWidth - kRight, top = kTop, bottom = kHeight - kBottom;
    out << fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" "
                       "stroke=\"#444\"/>\n",
                       left, top, right - left, bottom - top);
    for (int i = 0; i <= 4; ++i) {
        const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
        out << fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", left - 6,
                           f.py(yv) + 4, yv);
        const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
        out << fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.2f}</text>\n", f.px(xv),
                           bottom + 16, xv);
    }
    out << fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", (left + right) / 2.0,
                       kHeight - 18, xml(x_label));
    out << fmt::format("<text x=\"18\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1f})\">{}</text>\n",
                       (top + bottom) / 2.0, (top + bottom) / 2.0, xml(y_label));
}

void legend(std::ostream& out, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = kTop + 10 + 18.0 * static_cast<double>(i);
        out << fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
                           kWidth - kRight + 12, y - 10, kPalette[i % 6]);
        out << fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", kWidth - kRight + 30, y, xml(names[i]));
    }
}

} // namespace

void scatter(std::ostream& out, const std::string& title, const std::vector<Point>& points,
             const std::string& x_label, const std::string& y_label) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& p : points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    if (points.empty()) x0 = y0 = -1.0, x1 = y1 = 1.0;
    pad(x0, x1);
    pad(y0, y1);
    const Frame f{x0, x1, y0, y1};
    open(out, title);
    axes(out, f, x_label, y_label);
    if (x0 < 0 && x1 > 0)
        out << fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#bbb\"/>\n",
                           f.px(0), f.py(y0), f.py(y1));
    if (y0 < 0 && y1 > 0)
        out << fmt::format("<line x1=\"{0:.1f}\" y1=\"{2:.1f}\" x2=\"{1:.1f}\" y2=\"{2:.1f}\" stroke=\"#bbb\"/>\n",
                           f.px(x0), f.px(x1), f.py(0));
    for (const auto& p : points) {
        const char* colour = p.highlight ? kPalette[1] : kPalette[0];
        out << fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3.5\" fill=\"{}\"/>\n", f.px(p.x), f.py(p.y),
                           colour);
        out << fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"8\" fill=\"{}\">{}</text>\n", f.px(p.x) + 5,
                           f.py(p.y) - 3, colour, xml(p.label));
    }
    legend(out, {"category", "uncertain answer"});
    out << "</svg>\n";
}

void line_chart(std::ostream& out, const std::string& title, const std::vector<Series>& series,
                const std::string& x_label, const std::string& y_label) {
    double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
    std::size_t count = 1;
    for (const auto& s : series) {
        count = std::max(count, s.values.size());
        for (double v : s.values) {
            y0 = std::min(y0, v);
            y1 = std::max(y1, v);
        }
    }
    if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
    y0 = std::min(y0, 0.0);
    pad(y0, y1);
    const Frame f{0.5, static_cast<double>(count) + 0.5, y0, y1};
    open(out, title);
    axes(out, f, x_label, y_label);
    std::vector<std::string> names;
    for (std::size_t s = 0; s < series.size(); ++s) {
        names.push_back(series[s].name);
        std::string path;
        for (std::size_t i = 0; i < series[s].values.size(); ++i) {
            path += fmt::format("{}{:.1f},{:.1f}", i ? " L" : "M", f.px(static_cast<double>(i + 1)),
                                f.py(series[s].values[i]));
            out << fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"2.5\" fill=\"{}\"/>\n",
                               f.px(static_cast<double>(i + 1)), f.py(series[s].values[i]), kPalette[s % 6]);
        }
        out << fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", path,
                           kPalette[s % 6]);
    }
    legend(out, names);
    out << "</svg>\n";
}

void grouped_bars(std::ostream& out, const std::string& title, const std::vector<std::string>& series_names,
                  const std::vector<BarGroup>& groups, const std::string& y_label) {
    double y1 = 0.0;
    for (const auto& g : groups)
        for (double v : g.values)
            if (std::isfinite(v)) y1 = std::max(y1, v);
    if (y1 <= 0.0) y1 = 1.0;
    const Frame f{0.0, static_cast<double>(std::max<std::size_t>(groups.size(), 1)), 0.0, y1 * 1.05};
    open(out, title);
    const double left = kLeft, right = kWidth - kRight, top = kTop, bottom = kHeight - kBottom;
    out << fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" "
                       "stroke=\"#444\"/>\n",
                       left, top, right - left, bottom - top);
    for (int i = 0; i <= 4; ++i) {
        const double yv = f.y1 * i / 4.0;
        out << fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", left - 6,
                           f.py(yv) + 4, yv);
    }
    const double slot = (f.px(1.0) - f.px(0.0));
    const double bar = slot * 0.8 / static_cast<double>(std::max<std::size_t>(series_names.size(), 1));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double gx = f.px(static_cast<double>(g)) + slot * 0.1;
        for (std::size_t s = 0; s < groups[g].values.size(); ++s) {
            const double v = std::isfinite(groups[g].values[s]) ? groups[g].values[s] : 0.0;
            out << fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n",
                               gx + bar * static_cast<double>(s), f.py(v), bar, f.py(0.0) - f.py(v), kPalette[s % 6]);
        }
        out << fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", gx + slot * 0.4,
                           bottom + 16, xml(groups[g].label));
    }
    out << fmt::format("<text x=\"18\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1f})\">{}</text>\n",
                       (top + bottom) / 2.0, (top + bottom) / 2.0, xml(y_label));
    legend(out, series_names);
    out << "</svg>\n";
}

} // namespace debtmine::svg

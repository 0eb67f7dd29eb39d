#include "distress/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "distress/error.hpp"

namespace distress {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 60.0;

std::string num(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.2f", value);
    return buffer;
}

std::string tick_label(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.4g", value);
    return buffer;
}

void open_svg(std::ofstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
        << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2
        << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">"
        << title << "</text>\n";
}

}  // namespace

void write_line_plot(const std::string& path, const std::vector<double>& xs,
                     const std::vector<double>& ys, const std::string& title,
                     const std::string& x_label, const std::string& y_label) {
    require(xs.size() == ys.size() && !xs.empty(), "BadConfig",
            "line plot needs matching nonempty series");
    std::ofstream out(path);
    require(out.good(), "IoError", "cannot write " + path);

    const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
    const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
    double xmin = *xmin_it, xmax = *xmax_it;
    double ymin = *ymin_it, ymax = *ymax_it;
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto sx = [&](double x) {
        return kMarginLeft + (x - xmin) / (xmax - xmin) * plot_w;
    };
    auto sy = [&](double y) {
        return kHeight - kMarginBottom - (y - ymin) / (ymax - ymin) * plot_h;
    };

    open_svg(out, title);
    out << "<rect x=\"" << num(kMarginLeft) << "\" y=\"" << num(kMarginTop)
        << "\" width=\"" << num(plot_w) << "\" height=\"" << num(plot_h)
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double fx = xmin + (xmax - xmin) * tick / 4.0;
        const double fy = ymin + (ymax - ymin) * tick / 4.0;
        out << "<text x=\"" << num(sx(fx)) << "\" y=\""
            << num(kHeight - kMarginBottom + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << tick_label(fx) << "</text>\n";
        out << "<text x=\"" << num(kMarginLeft - 8) << "\" y=\"" << num(sy(fy) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << tick_label(fy) << "</text>\n";
    }
    out << "<text x=\"" << num(kMarginLeft + plot_w / 2) << "\" y=\""
        << num(kHeight - 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << num(kMarginTop + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18 "
        << num(kMarginTop + plot_h / 2) << ")\">" << y_label << "</text>\n";

    out << "<polyline fill=\"none\" stroke=\"#b22222\" stroke-width=\"1.5\" "
           "points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i)
        out << num(sx(xs[i])) << ',' << num(sy(ys[i])) << ' ';
    out << "\"/>\n";
    out << "</svg>\n";
}

void write_bar_plot(const std::string& path, const std::vector<std::string>& labels,
                    const std::vector<double>& values, const std::string& title) {
    require(labels.size() == values.size() && !labels.empty(), "BadConfig",
            "bar plot needs matching nonempty series");
    std::ofstream out(path);
    require(out.good(), "IoError", "cannot write " + path);

    double vmax = 0.0, vmin = 0.0;
    for (const double v : values) {
        vmax = std::max(vmax, v);
        vmin = std::min(vmin, v);
    }
    if (vmax == vmin) vmax = vmin + 1.0;
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto sy = [&](double v) {
        return kHeight - kMarginBottom - (v - vmin) / (vmax - vmin) * plot_h;
    };

    open_svg(out, title);
    const double slot = plot_w / static_cast<double>(labels.size());
    const double bar = slot * 0.7;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double x = kMarginLeft + slot * static_cast<double>(i) +
                         (slot - bar) / 2.0;
        const double y0 = sy(std::max(0.0, vmin));
        const double y1 = sy(values[i]);
        out << "<rect x=\"" << num(x) << "\" y=\"" << num(std::min(y0, y1))
            << "\" width=\"" << num(bar) << "\" height=\""
            << num(std::abs(y0 - y1)) << "\" fill=\"#4682b4\"/>\n";
        out << "<text x=\"" << num(x + bar / 2) << "\" y=\""
            << num(kHeight - kMarginBottom + 14)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"9\" "
               "transform=\"rotate(-45 "
            << num(x + bar / 2) << ' ' << num(kHeight - kMarginBottom + 14)
            << ")\">" << labels[i] << "</text>\n";
    }
    out << "<line x1=\"" << num(kMarginLeft) << "\" y1=\"" << num(sy(0.0))
        << "\" x2=\"" << num(kMarginLeft + plot_w) << "\" y2=\"" << num(sy(0.0))
        << "\" stroke=\"#444\"/>\n";
    out << "</svg>\n";
}

}  // namespace distress

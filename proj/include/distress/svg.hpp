#pragma once

#include <string>
#include <vector>

namespace distress {

// Minimal static SVG output; formatting is fixed-precision so identical data
// produces identical bytes.
void write_line_plot(const std::string& path, const std::vector<double>& xs,
                     const std::vector<double>& ys, const std::string& title,
                     const std::string& x_label, const std::string& y_label);

void write_bar_plot(const std::string& path, const std::vector<std::string>& labels,
                    const std::vector<double>& values, const std::string& title);

}  // namespace distress

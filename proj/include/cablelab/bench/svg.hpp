#pragma once

#include <string>
#include <vector>

namespace cablelab::bench {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

// Minimal static line chart; log_y uses a log10 vertical axis (zeros and
// negatives are clamped to the smallest positive value).
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series, bool log_y = false);

}  // namespace cablelab::bench

#include "cablelab/bench/svg.hpp"

#include "cablelab/io/jsonl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cablelab::bench {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series, bool log_y) {
  constexpr double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  double ypos_min = xmin;  // smallest positive, for the log axis
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
      if (s.y[i] > 0.0) ypos_min = std::min(ypos_min, s.y[i]);
    }
  }
  if (!std::isfinite(xmin) || !std::isfinite(ymin)) throw std::invalid_argument("empty chart data");
  if (log_y) {
    if (!std::isfinite(ypos_min)) ypos_min = 1e-12;
    ymin = std::log10(ypos_min);
    ymax = std::log10(std::max(ymax, ypos_min));
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;

  const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  const auto py = [&](double y) {
    if (log_y) y = std::log10(std::max(y, std::pow(10.0, ymin)));
    return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
  };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << w / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";

  // Axes with 5 ticks each.
  svg << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4;
    const double fy = ymin + (ymax - ymin) * i / 4;
    svg << "<text x='" << px(fx) << "' y='" << h - mb + 18
        << "' text-anchor='middle' font-size='11'>" << num(fx) << "</text>\n";
    const std::string ylab = log_y ? "1e" + num(fy) : num(fy);
    svg << "<text x='" << ml - 8 << "' y='" << h - mb - (h - mt - mb) * i / 4 + 4
        << "' text-anchor='end' font-size='11'>" << ylab << "</text>\n";
  }
  svg << "<text x='" << w / 2 << "' y='" << h - 12 << "' text-anchor='middle' font-size='12'>"
      << x_label << "</text>\n";
  svg << "<text x='16' y='" << h / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
      << h / 2 << ")'>" << y_label << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kColors[k % 6];
    svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.8' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
    svg << "'/>\n";
    svg << "<text x='" << w - mr - 8 << "' y='" << mt + 16 * (k + 1)
        << "' text-anchor='end' font-size='12' fill='" << color << "'>" << s.name << "</text>\n";
  }
  svg << "</svg>\n";
  io::atomic_write_text(path, svg.str());
}

}  // namespace cablelab::bench

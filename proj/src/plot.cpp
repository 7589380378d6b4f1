#include "sigdistill/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <sstream>

#include "sigdistill/error.hpp"
#include "sigdistill/spectral.hpp"

namespace sigdistill {

namespace {

constexpr double kPanelW = 260, kPanelH = 150, kGap = 20, kTitleH = 26, kMargin = 30;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(5);
  os << v;
  return os.str();
}

void panel(std::ostringstream& svg, double x0, double y0, const std::string& label,
           std::span<const float> values, const char* colour) {
  svg << "<g transform=\"translate(" << num(x0) << "," << num(y0) << ")\">\n";
  svg << "<rect width=\"" << kPanelW << "\" height=\"" << kPanelH
      << "\" fill=\"none\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
  svg << "<text x=\"4\" y=\"12\" font-size=\"10\" font-family=\"sans-serif\">" << escape(label) << "</text>\n";

  double lo = 0.0, hi = 0.0;
  for (float v : values) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  // A flat signal still gets a visible, centred line.
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 16.0;
  const double h = kPanelH - 2 * pad;
  const auto ypos = [&](double v) { return pad + h * (hi - v) / (hi - lo); };
  const double step = values.size() > 1 ? kPanelW / static_cast<double>(values.size() - 1) : 0.0;

  svg << "<line x1=\"0\" x2=\"" << kPanelW << "\" y1=\"" << num(ypos(0.0)) << "\" y2=\"" << num(ypos(0.0))
      << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) svg << ' ';
    svg << num(step * static_cast<double>(i)) << ',' << num(ypos(values[i]));
  }
  svg << "\"/>\n";
  svg << "<text x=\"" << kPanelW - 4 << "\" y=\"12\" font-size=\"9\" text-anchor=\"end\" fill=\"#666\" "
      << "font-family=\"sans-serif\">[" << num(lo) << ", " << num(hi) << "]</text>\n";
  svg << "</g>\n";
}

}  // namespace

std::string render_signal_figure(const std::vector<PlotRow>& rows) {
  if (rows.empty()) throw ValidationError("plot: no records to draw");
  const double width = 2 * kMargin + 4 * kPanelW + 3 * kGap;
  const double row_h = kTitleH + kPanelH + kGap;
  const double height = 2 * kMargin + row_h * static_cast<double>(rows.size());

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& rec = rows[r].record;
    const auto freq = to_frequency(rec);
    const double y = kMargin + row_h * static_cast<double>(r);
    svg << "<text x=\"" << kMargin << "\" y=\"" << num(y + 16)
        << "\" font-size=\"13\" font-family=\"sans-serif\">" << escape(rows[r].title) << "</text>\n";
    const std::array<std::span<const float>, 4> data{rec.i_channel, rec.q_channel, freq.i_mag, freq.q_mag};
    const std::array<const char*, 4> labels{"I(n)", "Q(n)", "|I(k)|", "|Q(k)|"};
    const std::array<const char*, 4> colours{"#1f77b4", "#d62728", "#1f77b4", "#d62728"};
    for (std::size_t p = 0; p < 4; ++p)
      panel(svg, kMargin + static_cast<double>(p) * (kPanelW + kGap), y + kTitleH, labels[p], data[p], colours[p]);
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace sigdistill

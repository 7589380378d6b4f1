#pragma once

// Static SVG figures of I/Q records: for every record a row of four panels,
// I(n), Q(n), |I(k)| and |Q(k)|.

#include <string>
#include <vector>

#include "sigdistill/dataio.hpp"

namespace sigdistill {

struct PlotRow {
  std::string title;
  SignalRecord record;
};

// Self-contained SVG document; rows are stacked top to bottom in order.
std::string render_signal_figure(const std::vector<PlotRow>& rows);

}  // namespace sigdistill

#pragma once

#include <string>
#include <vector>

namespace sdpg::plot {

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Reads epoch / mean_nominal_return columns from a metrics.csv. Throws with
// the offending row number on malformed input; a header-only file yields an
// empty curve.
Curve read_metrics_curve(const std::string& path);

// One SVG with a return-vs-epoch polyline per curve, axes, and a legend.
void write_learning_curves(const std::vector<Curve>& curves, const std::string& out_path);

}  // namespace sdpg::plot

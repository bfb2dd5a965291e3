#include "sdpg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sdpg::plot {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

Curve read_metrics_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = split_csv(line);
  int x_col = -1, y_col = -1;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "epoch") x_col = static_cast<int>(i);
    if (header[i] == "mean_nominal_return") y_col = static_cast<int>(i);
  }
  if (x_col < 0 || y_col < 0) {
    throw std::runtime_error(path + ": missing epoch/mean_nominal_return columns");
  }
  Curve c;
  c.label = std::filesystem::path(path).stem().string();
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) <= std::max(x_col, y_col)) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has too few fields");
    }
    try {
      size_t pos = 0;
      const double x = std::stod(fields[x_col], &pos);
      const double y = std::stod(fields[y_col]);
      (void)pos;
      c.x.push_back(x);
      c.y.push_back(y);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + " is malformed");
    }
  }
  return c;
}

void write_learning_curves(const std::vector<Curve>& curves, const std::string& out_path) {
  constexpr int kW = 760, kH = 480;
  constexpr int kL = 70, kR = 20, kT = 24, kB = 50;
  const double plot_w = kW - kL - kR;
  const double plot_h = kH - kT - kB;

  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool any = false;
  for (const auto& c : curves) {
    for (size_t i = 0; i < c.x.size(); ++i) {
      if (!any) {
        x_lo = x_hi = c.x[i];
        y_lo = y_hi = c.y[i];
        any = true;
      }
      x_lo = std::min(x_lo, c.x[i]);
      x_hi = std::max(x_hi, c.x[i]);
      y_lo = std::min(y_lo, c.y[i]);
      y_hi = std::max(y_hi, c.y[i]);
    }
  }
  if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
  if (y_hi - y_lo < 1e-12) y_hi = y_lo + 1.0;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  auto sx = [&](double x) { return kL + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto sy = [&](double y) { return kT + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  out << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";

  // Axes with ticks.
  char buf[160];
  out << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  std::snprintf(buf, sizeof(buf), "<line x1=\"%d\" y1=\"%f\" x2=\"%f\" y2=\"%f\"/>\n", kL,
                kT + plot_h, kL + plot_w, kT + plot_h);
  out << buf;
  std::snprintf(buf, sizeof(buf), "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%f\"/>\n", kL, kT, kL,
                kT + plot_h);
  out << buf;
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / kTicks;
    const double yv = y_lo + (y_hi - y_lo) * i / kTicks;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%f\" y1=\"%f\" x2=\"%f\" y2=\"%f\" stroke=\"#333\"/>", sx(xv),
                  kT + plot_h, sx(xv), kT + plot_h + 4);
    out << buf << "\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%f\" y=\"%f\" text-anchor=\"middle\">%.4g</text>", sx(xv),
                  kT + plot_h + 16, xv);
    out << buf << "\n";
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%f\" x2=\"%d\" y2=\"%f\" stroke=\"#333\"/>", kL - 4,
                  sy(yv), kL, sy(yv));
    out << buf << "\n";
    std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%f\" text-anchor=\"end\">%.4g</text>",
                  kL - 8, sy(yv) + 4, yv);
    out << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%f\" y=\"%d\" text-anchor=\"middle\" font-size=\"13\">epoch</text>",
                kL + plot_w / 2, kH - 12);
  out << buf << "\n";
  std::snprintf(buf, sizeof(buf),
                "<text x=\"16\" y=\"%f\" text-anchor=\"middle\" font-size=\"13\" "
                "transform=\"rotate(-90 16 %f)\">mean nominal return</text>",
                kT + plot_h / 2, kT + plot_h / 2);
  out << buf << "\n";
  out << "</g>\n";

  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    if (c.x.empty()) continue;
    const char* color = kPalette[ci % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < c.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(c.x[i]), sy(c.y[i]));
      out << buf;
    }
    out << "\"/>\n";
  }

  // Legend.
  out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const char* color = kPalette[ci % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const double ly = kT + 14 + 16.0 * ci;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%f\" y1=\"%f\" x2=\"%f\" y2=\"%f\" stroke=\"%s\" "
                  "stroke-width=\"2\"/>",
                  kL + plot_w - 150, ly - 4, kL + plot_w - 126, ly - 4, color);
    out << buf << "\n";
    std::snprintf(buf, sizeof(buf), "<text x=\"%f\" y=\"%f\">%s</text>", kL + plot_w - 120, ly,
                  curves[ci].label.c_str());
    out << buf << "\n";
  }
  out << "</g>\n";
  out << "</svg>\n";
}

}  // namespace sdpg::plot

#include "hoiscope/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hoiscope {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Categorical palette: evenly spaced hues at two lightness levels, so up to
// ~40 clusters stay distinguishable.
std::string cluster_color(int index, int k) {
  int hue = (k > 0) ? (360 * index) / std::max(k, 1) : 0;
  int light = (index % 2 == 0) ? 45 : 65;
  std::ostringstream os;
  os << "hsl(" << hue << ",70%," << light << "%)";
  return os.str();
}

// Sequential ramp (dark blue -> yellow), v in [0,1].
std::string ramp_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  int r = static_cast<int>(std::lround(255.0 * std::min(1.0, 0.1 + 1.2 * v)));
  int g = static_cast<int>(std::lround(255.0 * (0.05 + 0.85 * v)));
  int b = static_cast<int>(std::lround(255.0 * (0.45 - 0.35 * v)));
  std::ostringstream os;
  os << "rgb(" << std::clamp(r, 0, 255) << ',' << std::clamp(g, 0, 255) << ','
     << std::clamp(b, 0, 255) << ")";
  return os.str();
}

struct Extent {
  double xmin, xmax, ymin, ymax;
};

Extent coords_extent(const Matrix& coords) {
  Extent e{coords.col(0).minCoeff(), coords.col(0).maxCoeff(),
           coords.col(1).minCoeff(), coords.col(1).maxCoeff()};
  if (e.xmax - e.xmin < 1e-12) e.xmax = e.xmin + 1.0;
  if (e.ymax - e.ymin < 1e-12) e.ymax = e.ymin + 1.0;
  return e;
}

void check_scatter_input(const Embedding& embedding, std::size_t n_values) {
  if (embedding.coords.cols() < 2)
    throw ConfigError("scatter requires a 2-D embedding");
  if (static_cast<std::size_t>(embedding.coords.rows()) != n_values)
    throw DataError("value count does not match embedding rows");
}

constexpr int kPlotSize = 640;
constexpr int kMargin = 40;

double sx(double x, const Extent& e) {
  return kMargin + (x - e.xmin) / (e.xmax - e.xmin) * (kPlotSize - 2 * kMargin);
}

double sy(double y, const Extent& e) {
  return kPlotSize - kMargin -
         (y - e.ymin) / (e.ymax - e.ymin) * (kPlotSize - 2 * kMargin);
}

}  // namespace

std::string svg_scatter_clusters(const Embedding& embedding,
                                 const std::vector<int>& labels, int k) {
  check_scatter_input(embedding, labels.size());
  if (k < 1) throw ConfigError("cluster count must be positive");
  Extent e = coords_extent(embedding.coords);
  const int legend_w = 140;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << kPlotSize + legend_w << "\" height=\"" << kPlotSize << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Index i = 0; i < embedding.coords.rows(); ++i) {
    int l = labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= k) throw DataError("label out of range in scatter");
    svg << "<circle cx=\"" << num(sx(embedding.coords(i, 0), e)) << "\" cy=\""
        << num(sy(embedding.coords(i, 1), e))
        << "\" r=\"2.2\" fill=\"" << cluster_color(l, k)
        << "\" fill-opacity=\"0.8\"/>\n";
  }
  for (int c = 0; c < k; ++c) {
    double y = 20 + 16.0 * c;
    svg << "<rect x=\"" << kPlotSize + 8 << "\" y=\"" << num(y - 9)
        << "\" width=\"11\" height=\"11\" fill=\"" << cluster_color(c, k)
        << "\"/>\n"
        << "<text x=\"" << kPlotSize + 24 << "\" y=\"" << num(y)
        << "\" font-size=\"12\" font-family=\"sans-serif\">cluster " << c
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string svg_scatter_feature(const Embedding& embedding,
                                const Vector& values,
                                const std::string& value_name) {
  check_scatter_input(embedding, static_cast<std::size_t>(values.size()));
  Extent e = coords_extent(embedding.coords);
  double vmin = values.minCoeff();
  double vmax = values.maxCoeff();
  double span = (vmax - vmin < 1e-12) ? 1.0 : vmax - vmin;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPlotSize + 150
      << "\" height=\"" << kPlotSize << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Index i = 0; i < embedding.coords.rows(); ++i)
    svg << "<circle cx=\"" << num(sx(embedding.coords(i, 0), e)) << "\" cy=\""
        << num(sy(embedding.coords(i, 1), e)) << "\" r=\"2.2\" fill=\""
        << ramp_color((values(i) - vmin) / span) << "\" fill-opacity=\"0.85\"/>\n";
  // Color bar.
  const int bar_h = kPlotSize - 2 * kMargin;
  for (int s = 0; s < 64; ++s) {
    double frac = double(s) / 63.0;
    svg << "<rect x=\"" << kPlotSize + 10 << "\" y=\""
        << num(kPlotSize - kMargin - (s + 1) * (bar_h / 64.0))
        << "\" width=\"16\" height=\"" << num(bar_h / 64.0 + 0.5)
        << "\" fill=\"" << ramp_color(frac) << "\"/>\n";
  }
  svg << "<text x=\"" << kPlotSize + 32 << "\" y=\"" << kMargin + 4
      << "\" font-size=\"11\" font-family=\"sans-serif\">" << num(vmax)
      << "</text>\n"
      << "<text x=\"" << kPlotSize + 32 << "\" y=\"" << kPlotSize - kMargin
      << "\" font-size=\"11\" font-family=\"sans-serif\">" << num(vmin)
      << "</text>\n"
      << "<text x=\"" << kPlotSize + 10 << "\" y=\"" << kMargin - 14
      << "\" font-size=\"12\" font-family=\"sans-serif\">" << value_name
      << "</text>\n</svg>\n";
  return svg.str();
}

std::string svg_mi_heatmap(const FactorReport& report, int height, int width,
                           int top_m) {
  const Index p = report.mi.cols();
  if (height < 1 || width < 1) throw ConfigError("heatmap shape must be positive");
  if (static_cast<Index>(height) * width != p)
    throw ConfigError("shape mismatch: " + std::to_string(height) + "x" +
                      std::to_string(width) + " != " + std::to_string(p) +
                      " features");
  const int m = static_cast<int>(report.tc.size());
  const int take = std::min(std::max(top_m, 1), m);
  const double cell = std::max(2.0, 220.0 / std::max(height, width));
  const double panel_w = width * cell;
  const double panel_h = height * cell;
  const double label_h = 18.0;
  const double gap = 12.0;

  // Shared scale across panels: sqrt-MI against the global max.
  double max_sqrt = 0.0;
  for (int rank = 0; rank < take; ++rank) {
    int f = report.order[static_cast<std::size_t>(rank)];
    for (Index i = 0; i < p; ++i)
      max_sqrt = std::max(max_sqrt, std::sqrt(std::max(report.mi(f, i), 0.0)));
  }
  if (max_sqrt <= 0.0) max_sqrt = 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << num(take * (panel_w + gap) + gap) << "\" height=\""
      << num(panel_h + label_h + 2 * gap) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int rank = 0; rank < take; ++rank) {
    int f = report.order[static_cast<std::size_t>(rank)];
    double x0 = gap + rank * (panel_w + gap);
    svg << "<text x=\"" << num(x0) << "\" y=\"" << num(label_h - 4)
        << "\" font-size=\"12\" font-family=\"sans-serif\">factor " << f
        << "</text>\n";
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        double v =
            std::sqrt(std::max(report.mi(f, static_cast<Index>(r) * width + c),
                               0.0)) /
            max_sqrt;
        svg << "<rect x=\"" << num(x0 + c * cell) << "\" y=\""
            << num(label_h + gap + r * cell) << "\" width=\"" << num(cell)
            << "\" height=\"" << num(cell) << "\" fill=\"" << ramp_color(v)
            << "\"/>\n";
      }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string svg_tc_bar(const FactorReport& report) {
  const int m = static_cast<int>(report.tc.size());
  if (m < 1) throw ConfigError("factor report has no factors");
  double max_tc = 1e-12;
  for (double v : report.tc) max_tc = std::max(max_tc, v);
  const double bar_w = 26.0, gap = 10.0, plot_h = 240.0, base = 270.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << num(m * (bar_w + gap) + 2 * gap) << "\" height=\"300\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int rank = 0; rank < m; ++rank) {
    int f = report.order[static_cast<std::size_t>(rank)];
    double v = std::max(report.tc[static_cast<std::size_t>(f)], 0.0);
    double h = plot_h * v / max_tc;
    double x = gap + rank * (bar_w + gap);
    svg << "<rect x=\"" << num(x) << "\" y=\"" << num(base - h) << "\" width=\""
        << num(bar_w) << "\" height=\"" << num(h)
        << "\" fill=\"hsl(210,60%,50%)\"/>\n"
        << "<text x=\"" << num(x + 3) << "\" y=\"288\" font-size=\"11\" "
           "font-family=\"sans-serif\">z" << f << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_text_file(const std::string& content, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace hoiscope

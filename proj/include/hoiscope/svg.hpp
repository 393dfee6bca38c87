#pragma once

#include <string>
#include <vector>

#include "hoiscope/cluster.hpp"
#include "hoiscope/corex.hpp"
#include "hoiscope/embed.hpp"

namespace hoiscope {

// Self-contained SVG documents with fixed, deterministic color ramps.

// 2-D scatter colored by integer cluster label, with a legend.
std::string svg_scatter_clusters(const Embedding& embedding,
                                 const std::vector<int>& labels, int k);

// 2-D scatter colored by a continuous per-point value (sequential ramp).
std::string svg_scatter_feature(const Embedding& embedding,
                                const Vector& values,
                                const std::string& value_name);

// Square-rooted MI of the top factors, each reshaped to height x width.
// height * width must equal the feature count.
std::string svg_mi_heatmap(const FactorReport& report, int height, int width,
                           int top_m);

// TC explained per factor, descending.
std::string svg_tc_bar(const FactorReport& report);

void write_text_file(const std::string& content, const std::string& path);

}  // namespace hoiscope

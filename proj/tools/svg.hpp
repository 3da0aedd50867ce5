#pragma once

#include <string>
#include <vector>

#include "probekit/types.hpp"

namespace probekit::cli {

struct VizItem {
  std::string label;
  int gold_rank = 0;
  Vector point;  // length d, d in {2, 3}
};

struct VizInstance {
  std::string id;
  std::vector<VizItem> items;
};

// Static scatter: items colored by gold rank, the anchor as a gold diamond and
// the probe vector as a gold line from the origin. d = 3 renders the xy and xz
// orthographic projections side by side.
std::string render_scatter_svg(const std::vector<VizInstance>& instances, const Vector& anchor);

}  // namespace probekit::cli

#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace probekit::cli {
namespace {

constexpr double kPanel = 360.0;
constexpr double kPad = 30.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string rank_color(int rank, int max_rank) {
  const double t = max_rank > 1 ? static_cast<double>(rank - 1) / (max_rank - 1) : 0.0;
  const int r = static_cast<int>(std::lround(40 + t * 200));
  const int b = static_cast<int>(std::lround(220 - t * 180));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, 70, b);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_scatter_svg(const std::vector<VizInstance>& instances, const Vector& anchor) {
  const int d = static_cast<int>(anchor.size());
  const std::vector<std::pair<int, int>> axes =
      d >= 3 ? std::vector<std::pair<int, int>>{{0, 1}, {0, 2}} : std::vector<std::pair<int, int>>{{0, 1}};

  int max_rank = 1;
  for (const auto& inst : instances) {
    for (const auto& item : inst.items) max_rank = std::max(max_rank, item.gold_rank);
  }

  std::ostringstream svg;
  const double width = kPanel * static_cast<double>(axes.size());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(kPanel)
      << "\" viewBox=\"0 0 " << num(width) << ' ' << num(kPanel) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t panel = 0; panel < axes.size(); ++panel) {
    const auto [ax, ay] = axes[panel];
    double lo_x = std::min(0.0, anchor(ax)), hi_x = std::max(0.0, anchor(ax));
    double lo_y = std::min(0.0, anchor(ay)), hi_y = std::max(0.0, anchor(ay));
    for (const auto& inst : instances) {
      for (const auto& item : inst.items) {
        lo_x = std::min(lo_x, item.point(ax));
        hi_x = std::max(hi_x, item.point(ax));
        lo_y = std::min(lo_y, item.point(ay));
        hi_y = std::max(hi_y, item.point(ay));
      }
    }
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
    const double scale = (kPanel - 2 * kPad) / span;
    const double x0 = kPanel * static_cast<double>(panel);
    auto sx = [&](double v) { return x0 + kPad + (v - lo_x) * scale; };
    auto sy = [&](double v) { return kPanel - kPad - (v - lo_y) * scale; };

    svg << "<g id=\"panel-" << panel << "\">\n";
    svg << "<text x=\"" << num(x0 + kPad) << "\" y=\"18\" font-size=\"12\" font-family=\"sans-serif\">axes "
        << ax << ',' << ay << "</text>\n";
    svg << "<line x1=\"" << num(sx(0.0)) << "\" y1=\"" << num(sy(0.0)) << "\" x2=\"" << num(sx(anchor(ax)))
        << "\" y2=\"" << num(sy(anchor(ay))) << "\" stroke=\"#d4a017\" stroke-width=\"2\"/>\n";
    for (const auto& inst : instances) {
      for (const auto& item : inst.items) {
        svg << "<circle class=\"item\" cx=\"" << num(sx(item.point(ax))) << "\" cy=\"" << num(sy(item.point(ay)))
            << "\" r=\"4\" fill=\"" << rank_color(item.gold_rank, max_rank) << "\"><title>" << escape(inst.id)
            << ' ' << escape(item.label) << " rank " << item.gold_rank << "</title></circle>\n";
      }
    }
    const double cx = sx(anchor(ax));
    const double cy = sy(anchor(ay));
    svg << "<polygon class=\"anchor\" points=\"" << num(cx) << ',' << num(cy - 7) << ' ' << num(cx + 7) << ','
        << num(cy) << ' ' << num(cx) << ',' << num(cy + 7) << ' ' << num(cx - 7) << ',' << num(cy)
        << "\" fill=\"#d4a017\" stroke=\"black\"/>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace probekit::cli

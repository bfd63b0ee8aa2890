#include "echostrain/geometry.hpp"

#include <cmath>
#include <limits>

#include "echostrain/errors.hpp"

namespace echostrain::geom {
namespace {

double dist(const Point2D& a, const Point2D& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Cumulative arc length from points[first] to every vertex of [first, last].
std::vector<double> cumulative_arc(const std::vector<Point2D>& points, int first, int last) {
  std::vector<double> cum(static_cast<size_t>(last - first + 1), 0.0);
  for (int i = first + 1; i <= last; ++i) {
    cum[static_cast<size_t>(i - first)] =
        cum[static_cast<size_t>(i - first - 1)] +
        dist(points[static_cast<size_t>(i - 1)], points[static_cast<size_t>(i)]);
  }
  return cum;
}

// Boundary pair (b1 < b2) of one wall, as offsets into cum. Minimizes the
// summed distance to the 1/3 and 2/3 cumulative-arc marks; ties go to the
// lower pair so the result does not depend on scan order.
std::pair<int, int> wall_boundaries(const std::vector<double>& cum) {
  const int last = static_cast<int>(cum.size()) - 1;
  const double total = cum[static_cast<size_t>(last)];
  const double t1 = total / 3.0;
  const double t2 = 2.0 * total / 3.0;
  double best = std::numeric_limits<double>::infinity();
  int b1 = -1;
  int b2 = -1;
  for (int i = 1; i <= last - 2; ++i) {
    for (int j = i + 1; j <= last - 1; ++j) {
      const double cost = std::abs(cum[static_cast<size_t>(i)] - t1) +
                          std::abs(cum[static_cast<size_t>(j)] - t2);
      if (cost < best) {
        best = cost;
        b1 = i;
        b2 = j;
      }
    }
  }
  return {b1, b2};
}

struct WallNames {
  std::string_view left;
  std::string_view right;
};

WallNames wall_names(View view) {
  switch (view) {
    case View::FourChamber:
      return {"septal", "lateral"};
    case View::TwoChamber:
      return {"inferior", "anterior"};
    case View::LongAxis:
      return {"anteroseptal", "inferolateral"};
  }
  throw ValidationError("unknown view");
}

std::string seg_label(std::string_view level, std::string_view wall) {
  return std::string(level) + "_" + std::string(wall);
}

}  // namespace

std::string_view view_name(View view) {
  switch (view) {
    case View::FourChamber:
      return "4C";
    case View::TwoChamber:
      return "2C";
    case View::LongAxis:
      return "LAX";
  }
  throw ValidationError("unknown view");
}

View parse_view(std::string_view name) {
  if (name == "4C") return View::FourChamber;
  if (name == "2C") return View::TwoChamber;
  if (name == "LAX") return View::LongAxis;
  throw ValidationError("unknown view '" + std::string(name) + "' (expected 4C, 2C, or LAX)");
}

void validate_contour(const Contour& contour, std::string_view what) {
  const auto& pts = contour.points;
  const std::string name(what);
  if (pts.size() < 7) {
    throw GeometryError(name + ": contour needs at least 7 points, got " +
                        std::to_string(pts.size()));
  }
  for (const Point2D& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw GeometryError(name + ": contour contains a non-finite coordinate");
    }
  }
  for (size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].x == pts[i - 1].x && pts[i].y == pts[i - 1].y) {
      throw GeometryError(name + ": consecutive contour points " + std::to_string(i - 1) +
                          " and " + std::to_string(i) + " coincide");
    }
  }
  if (pts.front().x == pts.back().x && pts.front().y == pts.back().y) {
    throw GeometryError(name + ": contour must be an open polyline");
  }
}

void validate_mesh(const MyocardialMesh& mesh) {
  validate_contour(mesh.endo, "endo");
  validate_contour(mesh.epi, "epi");
  if (mesh.endo.points.size() != mesh.epi.points.size()) {
    throw StructuralError("endo has " + std::to_string(mesh.endo.points.size()) +
                          " points but epi has " + std::to_string(mesh.epi.points.size()));
  }
  const int last = static_cast<int>(mesh.endo.points.size()) - 1;
  if (mesh.apex_index <= 0 || mesh.apex_index >= last) {
    throw StructuralError("apex_index " + std::to_string(mesh.apex_index) +
                          " must be strictly inside [0, " + std::to_string(last) + "]");
  }
}

void validate_layout(const SegmentLayout& layout, int n_points) {
  if (layout.segments.size() != 6) {
    throw StructuralError("layout must have 6 segments, got " +
                          std::to_string(layout.segments.size()));
  }
  if (layout.segments.front().start_index != 0 ||
      layout.segments.back().end_index != n_points - 1) {
    throw StructuralError("layout does not span the midline");
  }
  for (size_t k = 0; k < layout.segments.size(); ++k) {
    const Segment& seg = layout.segments[k];
    if (seg.start_index >= seg.end_index || seg.start_index < 0 || seg.end_index >= n_points) {
      throw StructuralError("segment '" + seg.label + "' has an invalid span");
    }
    if (k > 0 && seg.start_index != layout.segments[k - 1].end_index) {
      throw StructuralError("segments '" + layout.segments[k - 1].label + "' and '" + seg.label +
                            "' do not share a boundary vertex");
    }
    for (size_t j = 0; j < k; ++j) {
      if (layout.segments[j].label == seg.label) {
        throw StructuralError("duplicate segment label '" + seg.label + "'");
      }
    }
  }
}

Contour compute_midline(const MyocardialMesh& mesh) {
  validate_mesh(mesh);
  Contour midline;
  midline.points.reserve(mesh.endo.points.size());
  for (size_t i = 0; i < mesh.endo.points.size(); ++i) {
    const Point2D& a = mesh.endo.points[i];
    const Point2D& b = mesh.epi.points[i];
    midline.points.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
  }
  validate_contour(midline, "midline");
  return midline;
}

double arc_length(const Contour& contour, int start_index, int end_index) {
  const int n = static_cast<int>(contour.points.size());
  if (start_index < 0 || end_index >= n || start_index >= end_index) {
    throw BoundsError("arc_length indices [" + std::to_string(start_index) + ", " +
                      std::to_string(end_index) + "] invalid for contour of " + std::to_string(n) +
                      " points");
  }
  double length = 0.0;
  for (int i = start_index + 1; i <= end_index; ++i) {
    length += dist(contour.points[static_cast<size_t>(i - 1)],
                   contour.points[static_cast<size_t>(i)]);
  }
  return length;
}

double total_arc_length(const Contour& contour) {
  return arc_length(contour, 0, static_cast<int>(contour.points.size()) - 1);
}

SegmentLayout build_segment_layout(const Contour& midline, int apex_index, View view) {
  validate_contour(midline, "midline");
  const int last = static_cast<int>(midline.points.size()) - 1;
  if (apex_index <= 0 || apex_index >= last) {
    throw GeometryError("apex_index " + std::to_string(apex_index) +
                        " does not split the midline into two walls");
  }
  // Three segments per wall need two interior boundary vertices.
  if (apex_index < 3 || last - apex_index < 3) {
    throw GeometryError("wall too short to host 3 segments (apex_index " +
                        std::to_string(apex_index) + ", " + std::to_string(last + 1) +
                        " midline points)");
  }

  const std::vector<double> left_cum = cumulative_arc(midline.points, 0, apex_index);
  const auto [l1, l2] = wall_boundaries(left_cum);

  // The right wall is measured from the apex outward, so its first third is
  // the apical segment, mirroring the left wall.
  const std::vector<double> right_cum = cumulative_arc(midline.points, apex_index, last);
  const auto [ra, rb] = wall_boundaries(right_cum);
  const int r1 = apex_index + ra;  // apical|mid boundary
  const int r2 = apex_index + rb;  // mid|basal boundary

  const WallNames names = wall_names(view);
  SegmentLayout layout;
  layout.view = view;
  layout.segments = {
      {seg_label("basal", names.left), 0, l1},
      {seg_label("mid", names.left), l1, l2},
      {seg_label("apical", names.left), l2, apex_index},
      {seg_label("apical", names.right), apex_index, r1},
      {seg_label("mid", names.right), r1, r2},
      {seg_label("basal", names.right), r2, last},
  };
  return layout;
}

const Segment& segment_by_label(const SegmentLayout& layout, std::string_view label) {
  for (const Segment& seg : layout.segments) {
    if (seg.label == label) {
      return seg;
    }
  }
  throw ValidationError("no segment labeled '" + std::string(label) + "' in this layout");
}

}  // namespace echostrain::geom

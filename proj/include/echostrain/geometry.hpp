#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace echostrain::geom {

// Coordinates are millimeters: x lateral, y axial (grows with depth).
struct Point2D {
  double x = 0.0;
  double y = 0.0;
};

// Open polyline ordered basal-left, apex, basal-right. At least 7 points,
// consecutive points distinct, endpoints distinct.
struct Contour {
  std::vector<Point2D> points;
};

// Paired endocardial/epicardial borders of one frame. Vertices correspond
// across the wall index by index; apex_index addresses the midline.
struct MyocardialMesh {
  Contour endo;
  Contour epi;
  int apex_index = 0;
  int frame_index = 0;
};

enum class View { FourChamber, TwoChamber, LongAxis };

std::string_view view_name(View view);     // "4C", "2C", "LAX"
View parse_view(std::string_view name);

// Inclusive vertex span [start_index, end_index] on the midline.
struct Segment {
  std::string label;
  int start_index = 0;
  int end_index = 0;
};

// Six segments tiling the midline: basal/mid/apical on the left wall, then
// apical/mid/basal on the right wall. Adjacent segments share their boundary
// vertex; the two apical segments meet at the apex.
struct SegmentLayout {
  View view = View::FourChamber;
  std::vector<Segment> segments;
};

void validate_contour(const Contour& contour, std::string_view what);
void validate_mesh(const MyocardialMesh& mesh);

// Checks the six-segment tiling of a midline with n_points vertices.
void validate_layout(const SegmentLayout& layout, int n_points);

// midline[i] = midpoint of endo[i] and epi[i].
Contour compute_midline(const MyocardialMesh& mesh);

// Polyline length over [start_index, end_index]; requires start < end.
double arc_length(const Contour& contour, int start_index, int end_index);
double total_arc_length(const Contour& contour);

// Splits each wall into thirds by cumulative arc length. Boundary vertices
// are the pair minimizing total distance to the 1/3 and 2/3 marks of the
// wall (ties resolve to lower indices), so they sit at the vertices nearest
// those marks whenever the two choices do not collide.
SegmentLayout build_segment_layout(const Contour& midline, int apex_index, View view);

const Segment& segment_by_label(const SegmentLayout& layout, std::string_view label);

}  // namespace echostrain::geom

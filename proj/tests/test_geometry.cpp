#include <cmath>
#include <vector>

#include "doctest.h"
#include "echostrain/errors.hpp"
#include "echostrain/geometry.hpp"
#include "echostrain/rng.hpp"

using namespace echostrain;
using geom::Contour;
using geom::MyocardialMesh;
using geom::Point2D;

namespace {

Contour straight_line(int n, double spacing) {
  Contour c;
  for (int i = 0; i < n; ++i) {
    c.points.push_back({i * spacing, 0.0});
  }
  return c;
}

// Random open polyline with strictly positive step lengths.
Contour random_contour(rng::Stream& rs, int n) {
  Contour c;
  double x = 0.0;
  double y = 0.0;
  for (int i = 0; i < n; ++i) {
    c.points.push_back({x, y});
    x += rs.uniform(0.2, 3.0);
    y += rs.uniform(-1.0, 1.0);
  }
  return c;
}

Point2D rotate_translate(const Point2D& p, double angle, double tx, double ty) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x - s * p.y + tx, s * p.x + c * p.y + ty};
}

Contour rigid(const Contour& in, double angle, double tx, double ty) {
  Contour out;
  for (const Point2D& p : in.points) {
    out.points.push_back(rotate_translate(p, angle, tx, ty));
  }
  return out;
}

double cum_at(const Contour& c, int first, int idx) {
  return idx == first ? 0.0 : geom::arc_length(c, first, idx);
}

// Exhaustive reference for wall boundary placement: scan every admissible
// (b1, b2) pair and keep the cost-minimal one, lower pair on ties.
std::pair<int, int> brute_force_boundaries(const Contour& c, int first, int last) {
  const double total = geom::arc_length(c, first, last);
  double best = 1e300;
  std::pair<int, int> arg{-1, -1};
  for (int i = first + 1; i <= last - 2; ++i) {
    for (int j = i + 1; j <= last - 1; ++j) {
      const double cost = std::abs(cum_at(c, first, i) - total / 3.0) +
                          std::abs(cum_at(c, first, j) - 2.0 * total / 3.0);
      if (cost < best - 1e-15) {
        best = cost;
        arg = {i, j};
      }
    }
  }
  return arg;
}

}  // namespace

TEST_CASE("compute_midline averages paired vertices") {
  MyocardialMesh mesh;
  rng::Stream rs(11);
  mesh.endo = random_contour(rs, 9);
  for (const Point2D& p : mesh.endo.points) {
    mesh.epi.points.push_back({p.x + 0.5, p.y + 2.0});
  }
  mesh.apex_index = 4;
  const Contour mid = geom::compute_midline(mesh);
  REQUIRE(mid.points.size() == 9);
  for (size_t i = 0; i < 9; ++i) {
    CHECK(mid.points[i].x == 0.5 * (mesh.endo.points[i].x + mesh.epi.points[i].x));
    CHECK(mid.points[i].y == 0.5 * (mesh.endo.points[i].y + mesh.epi.points[i].y));
  }
}

TEST_CASE("compute_midline with endo == epi returns endo") {
  MyocardialMesh mesh;
  rng::Stream rs(12);
  mesh.endo = random_contour(rs, 8);
  mesh.epi = mesh.endo;
  mesh.apex_index = 3;
  const Contour mid = geom::compute_midline(mesh);
  for (size_t i = 0; i < mid.points.size(); ++i) {
    CHECK(mid.points[i].x == mesh.endo.points[i].x);
    CHECK(mid.points[i].y == mesh.endo.points[i].y);
  }
}

TEST_CASE("compute_midline halves a constant-offset wall") {
  MyocardialMesh mesh;
  for (int i = 0; i < 7; ++i) {
    mesh.endo.points.push_back({static_cast<double>(i), 0.0});
    mesh.epi.points.push_back({static_cast<double>(i), 2.0});
  }
  mesh.apex_index = 3;
  const Contour mid = geom::compute_midline(mesh);
  for (const Point2D& p : mid.points) {
    CHECK(p.y == 1.0);
  }
}

TEST_CASE("compute_midline rejects mismatched contours") {
  MyocardialMesh mesh;
  rng::Stream rs(13);
  mesh.endo = random_contour(rs, 9);
  mesh.epi = random_contour(rs, 8);
  mesh.apex_index = 4;
  CHECK_THROWS_AS(geom::compute_midline(mesh), StructuralError);
}

TEST_CASE("compute_midline commutes with rigid transforms") {
  rng::Stream rs(14);
  MyocardialMesh mesh;
  mesh.endo = random_contour(rs, 15);
  for (const Point2D& p : mesh.endo.points) {
    mesh.epi.points.push_back({p.x + 0.3, p.y + 1.7});
  }
  mesh.apex_index = 7;

  const double angle = 0.83;
  const double tx = 12.5;
  const double ty = -3.25;
  MyocardialMesh moved;
  moved.endo = rigid(mesh.endo, angle, tx, ty);
  moved.epi = rigid(mesh.epi, angle, tx, ty);
  moved.apex_index = 7;

  const Contour mid_then_move = rigid(geom::compute_midline(mesh), angle, tx, ty);
  const Contour move_then_mid = geom::compute_midline(moved);
  for (size_t i = 0; i < mid_then_move.points.size(); ++i) {
    CHECK(mid_then_move.points[i].x ==
          doctest::Approx(move_then_mid.points[i].x).epsilon(1e-12));
    CHECK(mid_then_move.points[i].y ==
          doctest::Approx(move_then_mid.points[i].y).epsilon(1e-12));
  }
}

TEST_CASE("arc_length sums Euclidean steps") {
  Contour c;
  c.points = {{0, 0}, {3, 4}, {6, 8}, {9, 12}, {12, 16}, {15, 20}, {18, 24}};
  CHECK(geom::arc_length(c, 0, 1) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(geom::arc_length(c, 0, 6) == doctest::Approx(30.0).epsilon(1e-15));
  CHECK(geom::total_arc_length(c) == doctest::Approx(30.0).epsilon(1e-15));

  const Contour line = straight_line(11, 1.0);
  CHECK(geom::total_arc_length(line) == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("arc_length rejects bad index ranges") {
  const Contour line = straight_line(11, 1.0);
  CHECK_THROWS_AS(geom::arc_length(line, 3, 3), BoundsError);
  CHECK_THROWS_AS(geom::arc_length(line, 5, 4), BoundsError);
  CHECK_THROWS_AS(geom::arc_length(line, -1, 4), BoundsError);
  CHECK_THROWS_AS(geom::arc_length(line, 0, 11), BoundsError);
}

TEST_CASE("arc_length is rigid invariant") {
  rng::Stream rs(15);
  for (int trial = 0; trial < 50; ++trial) {
    const Contour c = random_contour(rs, 20);
    const double ref = geom::total_arc_length(c);
    const Contour moved =
        rigid(c, rs.uniform(-3.15, 3.15), rs.uniform(-100.0, 100.0), rs.uniform(-100.0, 100.0));
    CHECK(std::abs(geom::total_arc_length(moved) - ref) / ref < 1e-9);
  }
}

TEST_CASE("contour validation rejects degenerate inputs") {
  Contour short_c = straight_line(6, 1.0);
  CHECK_THROWS_AS(geom::validate_contour(short_c, "test"), GeometryError);

  Contour dup = straight_line(8, 1.0);
  dup.points[3] = dup.points[2];
  CHECK_THROWS_AS(geom::validate_contour(dup, "test"), GeometryError);

  Contour nan_c = straight_line(8, 1.0);
  nan_c.points[5].y = std::nan("");
  CHECK_THROWS_AS(geom::validate_contour(nan_c, "test"), GeometryError);

  Contour closed = straight_line(8, 1.0);
  closed.points.back() = closed.points.front();
  CHECK_THROWS_AS(geom::validate_contour(closed, "test"), GeometryError);

  CHECK_NOTHROW(geom::validate_contour(straight_line(7, 1.0), "test"));
}

TEST_CASE("uniform midline splits into six equal-third segments") {
  const Contour line = straight_line(19, 1.0);
  const geom::SegmentLayout layout =
      geom::build_segment_layout(line, 9, geom::View::FourChamber);
  REQUIRE(layout.segments.size() == 6);
  CHECK(layout.segments[0].start_index == 0);
  CHECK(layout.segments[0].end_index == 3);
  CHECK(layout.segments[1].end_index == 6);
  CHECK(layout.segments[2].end_index == 9);
  CHECK(layout.segments[3].end_index == 12);
  CHECK(layout.segments[4].end_index == 15);
  CHECK(layout.segments[5].end_index == 18);
  for (const geom::Segment& seg : layout.segments) {
    CHECK(geom::arc_length(line, seg.start_index, seg.end_index) ==
          doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("segment labels follow the view walls") {
  const Contour line = straight_line(19, 1.0);
  const auto labels_of = [&](geom::View v) {
    std::vector<std::string> out;
    for (const auto& seg : geom::build_segment_layout(line, 9, v).segments) {
      out.push_back(seg.label);
    }
    return out;
  };
  CHECK(labels_of(geom::View::FourChamber) ==
        std::vector<std::string>{"basal_septal", "mid_septal", "apical_septal", "apical_lateral",
                                 "mid_lateral", "basal_lateral"});
  CHECK(labels_of(geom::View::TwoChamber) ==
        std::vector<std::string>{"basal_inferior", "mid_inferior", "apical_inferior",
                                 "apical_anterior", "mid_anterior", "basal_anterior"});
  CHECK(labels_of(geom::View::LongAxis) ==
        std::vector<std::string>{"basal_anteroseptal", "mid_anteroseptal", "apical_anteroseptal",
                                 "apical_inferolateral", "mid_inferolateral",
                                 "basal_inferolateral"});
}

TEST_CASE("boundaries match the exhaustive scan on non-uniform midlines") {
  rng::Stream rs(16);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 9 + static_cast<int>(rs.uniform_index(20));
    const int apex = 4 + static_cast<int>(rs.uniform_index(static_cast<uint64_t>(n - 8)));
    const Contour c = random_contour(rs, n);
    const geom::SegmentLayout layout =
        geom::build_segment_layout(c, apex, geom::View::FourChamber);

    const auto [l1, l2] = brute_force_boundaries(c, 0, apex);
    CHECK(layout.segments[0].end_index == l1);
    CHECK(layout.segments[1].end_index == l2);

    const auto [r1, r2] = brute_force_boundaries(c, apex, n - 1);
    CHECK(layout.segments[3].end_index == r1);
    CHECK(layout.segments[4].end_index == r2);
  }
}

TEST_CASE("segments tile the midline without gaps or overlaps") {
  rng::Stream rs(17);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 9 + static_cast<int>(rs.uniform_index(30));
    const int apex = 4 + static_cast<int>(rs.uniform_index(static_cast<uint64_t>(n - 8)));
    const Contour c = random_contour(rs, n);
    const geom::SegmentLayout layout =
        geom::build_segment_layout(c, apex, geom::View::TwoChamber);

    REQUIRE(layout.segments.size() == 6);
    CHECK(layout.segments.front().start_index == 0);
    CHECK(layout.segments.back().end_index == n - 1);
    CHECK(layout.segments[2].end_index == apex);
    CHECK(layout.segments[3].start_index == apex);
    double seg_sum = 0.0;
    for (size_t k = 0; k < 6; ++k) {
      const auto& seg = layout.segments[k];
      CHECK(seg.start_index < seg.end_index);
      if (k > 0) {
        CHECK(seg.start_index == layout.segments[k - 1].end_index);
      }
      seg_sum += geom::arc_length(c, seg.start_index, seg.end_index);
    }
    const double total = geom::total_arc_length(c);
    CHECK(std::abs(seg_sum - total) / total < 1e-12);
  }
}

TEST_CASE("layout rejects walls too short for three segments") {
  const Contour line = straight_line(12, 1.0);
  CHECK_THROWS_AS(geom::build_segment_layout(line, 2, geom::View::FourChamber), GeometryError);
  CHECK_THROWS_AS(geom::build_segment_layout(line, 9, geom::View::FourChamber), GeometryError);
  CHECK_NOTHROW(geom::build_segment_layout(line, 5, geom::View::FourChamber));
}

TEST_CASE("segment_by_label finds segments and rejects unknown labels") {
  const Contour line = straight_line(19, 1.0);
  const geom::SegmentLayout layout =
      geom::build_segment_layout(line, 9, geom::View::FourChamber);
  CHECK(geom::segment_by_label(layout, "mid_lateral").start_index == 12);
  CHECK_THROWS_AS(geom::segment_by_label(layout, "mid_posterior"), ValidationError);
}

TEST_CASE("view names round-trip") {
  CHECK(geom::view_name(geom::parse_view("4C")) == "4C");
  CHECK(geom::view_name(geom::parse_view("2C")) == "2C");
  CHECK(geom::view_name(geom::parse_view("LAX")) == "LAX");
  CHECK_THROWS_AS(geom::parse_view("5C"), ValidationError);
}

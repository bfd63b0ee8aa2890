#include <cmath>
#include <vector>

#include "doctest.h"
#include "echostrain/errors.hpp"
#include "echostrain/geometry.hpp"
#include "echostrain/rng.hpp"
#include "echostrain/strain.hpp"

using namespace echostrain;
using geom::Contour;
using geom::MyocardialMesh;
using geom::Point2D;

namespace {

MyocardialMesh line_mesh(int n, double spacing, int frame) {
  MyocardialMesh mesh;
  for (int i = 0; i < n; ++i) {
    mesh.endo.points.push_back({i * spacing, 0.0});
    mesh.epi.points.push_back({i * spacing, 2.0});
  }
  mesh.apex_index = n / 2;
  mesh.frame_index = frame;
  return mesh;
}

MyocardialMesh random_mesh(rng::Stream& rs, int n, int frame) {
  MyocardialMesh mesh;
  double x = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = rs.uniform(-1.0, 1.0);
    mesh.endo.points.push_back({x, y});
    mesh.epi.points.push_back({x + 0.3, y + 1.7});
    x += rs.uniform(0.5, 3.0);
  }
  mesh.apex_index = n / 2;
  mesh.frame_index = frame;
  return mesh;
}

MyocardialMesh perturb(const MyocardialMesh& mesh, rng::Stream& rs, double scale, int frame) {
  MyocardialMesh out = mesh;
  out.frame_index = frame;
  for (size_t i = 0; i < out.endo.points.size(); ++i) {
    out.endo.points[i].x += rs.uniform(-scale, scale);
    out.endo.points[i].y += rs.uniform(-scale, scale);
    out.epi.points[i].x += rs.uniform(-scale, scale);
    out.epi.points[i].y += rs.uniform(-scale, scale);
  }
  return out;
}

MyocardialMesh transform(const MyocardialMesh& mesh, double angle, double tx, double ty,
                         double scale) {
  MyocardialMesh out = mesh;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const auto apply = [&](Point2D p) {
    return Point2D{scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty};
  };
  for (size_t i = 0; i < out.endo.points.size(); ++i) {
    out.endo.points[i] = apply(mesh.endo.points[i]);
    out.epi.points[i] = apply(mesh.epi.points[i]);
  }
  return out;
}

geom::SegmentLayout layout_of(const MyocardialMesh& mesh) {
  return geom::build_segment_layout(geom::compute_midline(mesh), mesh.apex_index,
                                    geom::View::FourChamber);
}

}  // namespace

TEST_CASE("constant meshes give identically zero strain") {
  std::vector<MyocardialMesh> meshes(5, line_mesh(19, 1.0, 0));
  const auto layout = layout_of(meshes[0]);
  const auto curve = strain::compute_sls(meshes, layout, 0, 4);
  for (const auto& row : curve.values) {
    for (double v : row) {
      CHECK(v == 0.0);
    }
  }
  for (double v : strain::compute_gls(meshes, 0)) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("uniform 20 percent shortening gives -20 in every segment and GLS") {
  std::vector<MyocardialMesh> meshes = {line_mesh(19, 1.0, 0), line_mesh(19, 0.8, 1)};
  const auto layout = layout_of(meshes[0]);
  const auto curve = strain::compute_sls(meshes, layout, 0, 1);
  REQUIRE(curve.values.size() == 6);
  for (const auto& row : curve.values) {
    CHECK(row[0] == 0.0);
    CHECK(row[1] == doctest::Approx(-20.0).epsilon(1e-12));
  }
  const auto gls = strain::compute_gls(meshes, 0);
  CHECK(gls[1] == doctest::Approx(-20.0).epsilon(1e-12));
}

TEST_CASE("GLS equals the ED-length-weighted mean of segment strains") {
  rng::Stream rs(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 15 + static_cast<int>(rs.uniform_index(20));
    const MyocardialMesh ed = random_mesh(rs, n, 0);
    std::vector<MyocardialMesh> meshes = {ed};
    for (int t = 1; t < 8; ++t) {
      meshes.push_back(perturb(ed, rs, 0.04, t));
    }
    const auto layout = layout_of(ed);
    const auto curve = strain::compute_sls(meshes, layout, 0, 7);
    const auto gls = strain::compute_gls(meshes, 0);

    const Contour ed_midline = geom::compute_midline(ed);
    std::vector<double> weights;
    for (const auto& seg : layout.segments) {
      weights.push_back(geom::arc_length(ed_midline, seg.start_index, seg.end_index));
    }
    for (size_t t = 0; t < meshes.size(); ++t) {
      double acc = 0.0;
      double wsum = 0.0;
      for (size_t s = 0; s < 6; ++s) {
        acc += weights[s] * curve.values[s][t];
        wsum += weights[s];
      }
      CHECK(std::abs(gls[t] - acc / wsum) < 1e-9);
    }
  }
}

TEST_CASE("strain anchors at exactly zero at ED") {
  rng::Stream rs(22);
  const MyocardialMesh ed = random_mesh(rs, 21, 0);
  std::vector<MyocardialMesh> meshes;
  for (int t = 0; t < 6; ++t) {
    meshes.push_back(t == 2 ? ed : perturb(ed, rs, 0.05, t));
  }
  meshes[2] = ed;
  const auto curve = strain::compute_sls(meshes, layout_of(ed), 2, 5);
  for (const auto& row : curve.values) {
    CHECK(row[2] == 0.0);
  }
  CHECK(strain::compute_gls(meshes, 2)[2] == 0.0);
}

TEST_CASE("strain is invariant under rigid motion and uniform scaling") {
  rng::Stream rs(23);
  const MyocardialMesh ed = random_mesh(rs, 17, 0);
  std::vector<MyocardialMesh> meshes = {ed};
  for (int t = 1; t < 5; ++t) {
    meshes.push_back(perturb(ed, rs, 0.05, t));
  }
  const auto layout = layout_of(ed);
  const auto ref = strain::compute_sls(meshes, layout, 0, 4);

  SUBCASE("rigid") {
    std::vector<MyocardialMesh> moved;
    for (const auto& m : meshes) {
      moved.push_back(transform(m, 0.62, -40.0, 15.0, 1.0));
    }
    const auto got = strain::compute_sls(moved, layout, 0, 4);
    for (size_t s = 0; s < 6; ++s) {
      for (size_t t = 0; t < meshes.size(); ++t) {
        CHECK(std::abs(got.values[s][t] - ref.values[s][t]) < 1e-9);
      }
    }
  }

  SUBCASE("scaled") {
    std::vector<MyocardialMesh> scaled;
    for (const auto& m : meshes) {
      scaled.push_back(transform(m, 0.0, 0.0, 0.0, 2.375));
    }
    const auto got = strain::compute_sls(scaled, layout, 0, 4);
    for (size_t s = 0; s < 6; ++s) {
      for (size_t t = 0; t < meshes.size(); ++t) {
        CHECK(std::abs(got.values[s][t] - ref.values[s][t]) < 1e-9);
      }
    }
  }
}

TEST_CASE("summarize picks the signed systolic extremum") {
  strain::StrainCurve curve;
  curve.segment_labels = {"a", "b", "c"};
  curve.ed_index = 0;
  curve.es_index = 4;
  curve.values = {
      {0.0, -5.0, -10.0, -15.0, -20.0, -3.0},   // monotone to ES
      {0.0, 0.0, 0.0, 0.0, 0.0, 0.0},           // flat
      {0.0, -10.0, -22.0, -21.0, -20.0, -1.0},  // dips mid-systole
  };
  const std::vector<double> gls = {0.0, -4.0, -9.0, -12.0, -14.0, -2.0};
  const auto summary = strain::summarize(curve, gls);
  CHECK(summary.peak_systolic_sls[0] == -20.0);
  CHECK(summary.peak_systolic_sls[1] == 0.0);
  CHECK(summary.peak_systolic_sls[2] == -22.0);
  CHECK(summary.peak_gls == -14.0);
}

TEST_CASE("summarize ignores values after ES") {
  strain::StrainCurve curve;
  curve.segment_labels = {"a"};
  curve.ed_index = 0;
  curve.es_index = 2;
  curve.values = {{0.0, -8.0, -6.0, -30.0}};
  const auto summary = strain::summarize(curve, {0.0, -1.0, -2.0, -40.0});
  CHECK(summary.peak_systolic_sls[0] == -8.0);
  CHECK(summary.peak_gls == -2.0);
}

TEST_CASE("moving_average smooths, re-anchors ED, and validates the window") {
  strain::StrainCurve curve;
  curve.segment_labels = {"a"};
  curve.ed_index = 0;
  curve.es_index = 3;
  curve.values = {{0.0, -6.0, -12.0, -18.0, -6.0}};

  const auto same = strain::moving_average(curve, 1);
  CHECK(same.values[0] == curve.values[0]);

  const auto smooth = strain::moving_average(curve, 3);
  CHECK(smooth.values[0][0] == 0.0);
  // window at t=1 averages {0, -6, -12} = -6, then shifts by the ED offset
  const double ed_offset = (0.0 + -6.0) / 2.0;
  CHECK(smooth.values[0][1] == doctest::Approx(-6.0 - ed_offset).epsilon(1e-12));

  CHECK_THROWS_AS(strain::moving_average(curve, 2), ValidationError);
  CHECK_THROWS_AS(strain::moving_average(curve, -3), ValidationError);
}

TEST_CASE("strain validation rejects malformed sequences") {
  std::vector<MyocardialMesh> meshes = {line_mesh(19, 1.0, 0), line_mesh(19, 0.9, 1)};
  const auto layout = layout_of(meshes[0]);

  CHECK_THROWS_AS(strain::compute_sls({}, layout, 0, 1), SequenceError);
  CHECK_THROWS_AS(strain::compute_sls(meshes, layout, 0, 0), BoundsError);
  CHECK_THROWS_AS(strain::compute_sls(meshes, layout, 1, 1), BoundsError);
  CHECK_THROWS_AS(strain::compute_sls(meshes, layout, 0, 2), BoundsError);

  std::vector<MyocardialMesh> mixed = {line_mesh(19, 1.0, 0), line_mesh(21, 1.0, 1)};
  CHECK_THROWS_AS(strain::compute_sls(mixed, layout, 0, 1), StructuralError);

  geom::SegmentLayout bad = layout;
  bad.segments.pop_back();
  CHECK_THROWS_AS(strain::compute_sls(meshes, bad, 0, 1), StructuralError);
}

TEST_CASE("segment_average_gls averages rows without weights") {
  strain::StrainCurve curve;
  curve.segment_labels = {"a", "b"};
  curve.ed_index = 0;
  curve.es_index = 1;
  curve.values = {{0.0, -10.0}, {0.0, -30.0}};
  const auto avg = strain::segment_average_gls(curve);
  CHECK(avg[0] == 0.0);
  CHECK(avg[1] == doctest::Approx(-20.0).epsilon(1e-15));
}

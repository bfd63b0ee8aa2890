#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echostrain/geometry.hpp"
#include "echostrain/image.hpp"
#include "echostrain/strain.hpp"
#include "echostrain/tracking.hpp"

namespace echostrain::phantom {

// Half-ellipse annulus standing in for a left ventricle long-axis cut.
// long_axis_mm is the base-to-apex depth of the endocardium, short_axis_mm
// its full basal width. The epicardium is offset so every vertex pair is
// exactly wall_thickness_mm apart.
struct GeometryConfig {
  double long_axis_mm = 80.0;
  double short_axis_mm = 50.0;
  double wall_thickness_mm = 10.0;
  int points_per_contour = 31;  // odd, so the apex lands on a vertex
  double center_x_mm = 40.0;    // basal center
  double base_y_mm = 12.0;      // depth of the basal plane
};

// Cyclic contraction. temporal_profile may be left empty to get the default
// raised-cosine activation: 0 at ED, 1 at ES, back to 0 at the last frame.
struct MotionModel {
  int n_frames = 32;
  int ed_index = 0;
  int es_index = 12;
  double peak_longitudinal_shortening = 0.20;
  double peak_radial_thickening = 0.15;
  std::vector<double> temporal_profile;
};

// Local contraction deficit centered on one segment: the longitudinal
// shortening of material near the segment center is scaled by
// 1 - reduction_alpha * exp(-d^2 / (2 sigma^2)), d measured along the
// midline arc. With compensate, the rest of the wall shortens harder so the
// total midline shortening matches the no-infarct case each frame.
struct InfarctSpec {
  std::string segment_label;
  double reduction_alpha = 0.5;
  double sigma_mm = 10.0;
  bool compensate = true;
};

enum class Region : uint8_t { Myocardium = 0, Background = 1, Cavity = 2 };

// Scatterer placement densities (per mm^2) and the coherent fraction of the
// myocardial population. Background and cavity scatterers are static scene
// dressing at reduced reflectivity.
struct ScattererConfig {
  double density = 12.0;
  double background_density = 1.5;
  double cavity_density = 0.3;
  double coherence_ratio = 0.9;
  double background_amplitude = 0.25;
  double cavity_amplitude = 0.05;
};

// positions are material coordinates at ED for frame_index 0; fields
// returned by advance_scatterers carry frame-t positions instead.
struct ScattererField {
  std::vector<geom::Point2D> positions;
  std::vector<float> amplitudes;
  std::vector<uint8_t> coherent;
  std::vector<Region> regions;
  double coherence_ratio = 1.0;
  int frame_index = 0;
};

struct GroundTruth {
  std::vector<geom::MyocardialMesh> meshes;
  tracking::PointTrajectories trajectories;  // midline vertices, anchored at ES
  geom::SegmentLayout layout;
  strain::StrainCurve reference_sls;
  std::vector<double> reference_gls;
};

void validate_geometry(const GeometryConfig& geo);
void validate_motion(const MotionModel& model);

geom::MyocardialMesh generate_ed_mesh(const GeometryConfig& geo);

// Evaluates the analytic motion map: every midline chord contracts by its
// local factor 1 - s * profile[t] * k, chained outward from the fixed apex,
// and the wall offset around the midline thickens with the profile. All
// queries are pure and thread-safe after construction.
class MotionEngine {
 public:
  MotionEngine(const GeometryConfig& geo, const MotionModel& model,
               std::vector<InfarctSpec> infarcts, geom::View view);

  const geom::MyocardialMesh& ed_mesh() const { return ed_mesh_; }
  const geom::SegmentLayout& layout() const { return layout_; }
  const GeometryConfig& geometry() const { return geo_; }
  const MotionModel& model() const { return model_; }
  const std::vector<double>& profile() const { return profile_; }

  // Global rescale applied to the contraction field at frame t so the total
  // midline shortening matches the no-infarct case (1 when there is nothing
  // to compensate).
  double compensation(int t) const;

  // Moves a material point from its ED position to its frame-t position.
  geom::Point2D displace_point(const geom::Point2D& p, int t) const;

  // Mesh vertices move exactly like displace_point along the midline; the
  // wall offset around the midline additionally thickens with the profile.
  geom::MyocardialMesh mesh_at(int t) const;

  // Local contraction multiplier s(p) in [0, 1]; 1 outside infarcts.
  double contraction_scale(const geom::Point2D& p) const;

  // Dense analytic displacement field between adjacent frames, sampled at
  // pixel centers of the grid (inverse-mapped so vectors describe the
  // material currently at each pixel).
  tracking::DisplacementField sample_flow(int from_frame, int to_frame,
                                          const GridSpec& grid) const;

  bool inside_annulus(const geom::Point2D& p) const;
  bool inside_cavity(const geom::Point2D& p) const;

 private:
  // Material coordinates of a point in the ruled chart spanned by the
  // midline chords and the per-vertex wall rails (mid - endo). Wall vertices
  // decompose onto their own rail, so off-midline material moves exactly
  // like the index-paired mesh vertices.
  struct Foot {
    geom::Point2D point;  // chart reconstruction of p from (chord, u, s)
    double arc;
    size_t chord;  // midline chord whose quad holds the point
    double u;      // parameter along that chord, 0 at the lower vertex
    double s;      // wall offset in half-wall units, negative toward endo
  };

  Foot project_to_midline(const geom::Point2D& p) const;
  double midline_arc_of(const geom::Point2D& p) const;  // arc of chart foot
  double scale_at_arc(double arc) const;
  std::vector<geom::Point2D> chained_midline(int t) const;

  GeometryConfig geo_;
  MotionModel model_;
  std::vector<InfarctSpec> infarcts_;
  geom::MyocardialMesh ed_mesh_;
  geom::Contour ed_midline_;
  std::vector<geom::Point2D> rail_;  // mid - endo per vertex, half-wall rails
  geom::SegmentLayout layout_;
  std::vector<double> profile_;
  std::vector<double> midline_cum_;     // cumulative arc per midline vertex
  std::vector<geom::Point2D> chord_dir_;  // midline chord vectors for the chart scan
  std::vector<double> chord_len2_;      // squared midline chord lengths
  std::vector<double> chord_scale_;     // s at every midline chord midpoint
  std::vector<double> infarct_center_;  // arc position per infarct
  std::vector<double> compensation_;    // per frame
  std::vector<std::vector<geom::Point2D>> moved_mid_;  // per frame chained midline
};

ScattererField seed_scatterers(const GeometryConfig& geo, const GridSpec& grid,
                               const ScattererConfig& config, uint64_t seed);

// Frame-t field from the ED field: coherent myocardial scatterers follow
// displace_point keeping their amplitudes; incoherent ones are redrawn for
// this frame (deterministic in (seed, t)); background and cavity are static.
ScattererField advance_scatterers(const ScattererField& ed_field, int t,
                                  const MotionEngine& engine, uint64_t seed);

GroundTruth build_ground_truth(const GeometryConfig& geo, const MotionModel& model,
                               const std::vector<InfarctSpec>& infarcts, geom::View view);

}  // namespace echostrain::phantom

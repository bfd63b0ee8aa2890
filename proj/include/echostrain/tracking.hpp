#pragma once

#include <cstdint>
#include <vector>

#include "echostrain/geometry.hpp"
#include "echostrain/image.hpp"

namespace echostrain::tracking {

// Dense per-pixel motion from from_frame to to_frame (always adjacent
// frames). Vectors are in pixels; positive dx points right, dy down.
struct DisplacementField {
  int width = 0;
  int height = 0;
  double pixel_pitch = 0.0;
  int from_frame = 0;
  int to_frame = 0;
  std::vector<float> dx;
  std::vector<float> dy;
};

// Per-vertex positions across the whole sequence, anchored at
// reference_frame where positions equal the query mesh exactly.
struct PointTrajectories {
  int n_points = 0;
  int n_frames = 0;
  int reference_frame = 0;
  std::vector<std::vector<geom::Point2D>> positions;  // [frame][point], mm
  std::vector<std::vector<uint8_t>> visibility;       // [frame][point]
};

struct TrackerConfig {
  int pyramid_levels = 3;
  int block_radius = 6;       // template half-size, pixels
  int search_radius = 4;      // per pyramid level, pixels
  int window_length = 8;      // sliding-window span for point tracking
  bool subpixel = true;
};

void validate_field(const DisplacementField& field);
void validate_trajectories(const PointTrajectories& traj);
void validate_tracker_config(const TrackerConfig& config);

// Pyramidal block matching maximizing NCC, dense output via bilinear
// upsampling of the block grid.
DisplacementField estimate_flow(const FloatImage& frame_a, const FloatImage& frame_b,
                                const TrackerConfig& config, double pixel_pitch, int from_frame,
                                int to_frame);

// warp_mesh moves every endo/epi vertex by the bilinearly interpolated
// displacement at its position. Out-of-bounds vertices take the clamped
// boundary displacement and are flagged instead of rejected.
struct WarpResult {
  geom::MyocardialMesh mesh;
  std::vector<uint8_t> endo_out_of_bounds;
  std::vector<uint8_t> epi_out_of_bounds;
  bool any_out_of_bounds = false;
};

WarpResult warp_mesh(const geom::MyocardialMesh& mesh, const DisplacementField& field);

// Composes warps outward from the reference mesh using fields keyed by
// (from_frame, to_frame): forward fields t -> t+1 after the reference,
// backward fields t -> t-1 before it.
std::vector<geom::MyocardialMesh> propagate_mesh_flow(const geom::MyocardialMesh& mesh_ref,
                                                      const std::vector<DisplacementField>& fields,
                                                      int n_frames);

// Sliding-window template matching per vertex, run forward and backward
// from the query frame. Templates refresh at window boundaries.
PointTrajectories track_points(const std::vector<FloatImage>& frames, double pixel_pitch,
                               const geom::MyocardialMesh& query_mesh,
                               const TrackerConfig& config);

}  // namespace echostrain::tracking

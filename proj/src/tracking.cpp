#include "echostrain/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "echostrain/errors.hpp"
#include "echostrain/kernels/kernels.hpp"

namespace echostrain::tracking {
namespace {

constexpr double kInvalidScore = -std::numeric_limits<double>::infinity();

// Means and centered second moment of one block, via the moments kernel.
struct BlockStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  double var = 0.0;
};

BlockStats block_stats(const FloatImage& img, int cx, int cy, int radius) {
  BlockStats stats;
  double sab = 0.0, sb = 0.0, sbb = 0.0;
  const int side = 2 * radius + 1;
  for (int r = -radius; r <= radius; ++r) {
    const float* row = img.row(cy + r) + (cx - radius);
    kernels::active().match_moments(row, row, side, &sab, &sb, &sbb);
  }
  const double n = static_cast<double>(side) * side;
  stats.sum = sb;
  stats.sum_sq = sbb;
  stats.var = sbb - sb * sb / n;
  return stats;
}

// Normalized cross correlation between the block of a at (ax, ay) and the
// block of b at (bx, by). Callers guarantee both blocks are in bounds.
double ncc_score(const FloatImage& a, int ax, int ay, const BlockStats& a_stats,
                 const FloatImage& b, int bx, int by, int radius) {
  double sab = 0.0, sb = 0.0, sbb = 0.0;
  const int side = 2 * radius + 1;
  for (int r = -radius; r <= radius; ++r) {
    const float* arow = a.row(ay + r) + (ax - radius);
    const float* brow = b.row(by + r) + (bx - radius);
    kernels::active().match_moments(arow, brow, side, &sab, &sb, &sbb);
  }
  const double n = static_cast<double>(side) * side;
  const double vb = sbb - sb * sb / n;
  if (!(vb > 1e-12) || !(a_stats.var > 1e-12)) {
    return kInvalidScore;
  }
  const double num = sab - a_stats.sum / n * sb;
  return num / std::sqrt(a_stats.var * vb);
}

bool block_fits(const FloatImage& img, int cx, int cy, int radius) {
  return cx >= radius && cy >= radius && cx < img.width - radius && cy < img.height - radius;
}

// One-dimensional parabolic peak refinement over three scores. Skipped for
// saturated peaks: at a perfect match the neighbors only describe texture
// asymmetry, not a shifted optimum.
double refine_axis(double c_minus, double c0, double c_plus) {
  if (c_minus == kInvalidScore || c_plus == kInvalidScore || c0 > 0.9999) {
    return 0.0;
  }
  const double denom = c_minus - 2.0 * c0 + c_plus;
  if (!(denom < -1e-12)) {
    return 0.0;
  }
  return std::clamp(0.5 * (c_minus - c_plus) / denom, -0.5, 0.5);
}

FloatImage downsample(const FloatImage& src) {
  FloatImage out(src.width / 2, src.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const float s = src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) +
                      src.at(2 * x, 2 * y + 1) + src.at(2 * x + 1, 2 * y + 1);
      out.at(x, y) = 0.25f * s;
    }
  }
  return out;
}

// Motion of overlapping block centers at one pyramid level, stored as two
// small images over the block grid for bilinear lookup.
struct BlockGrid {
  int radius = 0;
  int stride = 0;
  FloatImage dx;
  FloatImage dy;

  double grid_x(double px) const { return (px - radius) / stride; }
  double grid_y(double py) const { return (py - radius) / stride; }
};

BlockGrid match_level(const FloatImage& a, const FloatImage& b, const TrackerConfig& config,
                      const BlockGrid* coarser) {
  const int radius = config.block_radius;
  const int stride = std::max(1, radius);
  const int nx = (a.width - 2 * radius - 1) / stride + 1;
  const int ny = (a.height - 2 * radius - 1) / stride + 1;

  BlockGrid grid{radius, stride, FloatImage(nx, ny), FloatImage(nx, ny)};

  const int sr = config.search_radius;
  const int span = 2 * sr + 1;
  std::vector<double> scores(static_cast<size_t>(span) * span);

  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      const int cx = radius + gx * stride;
      const int cy = radius + gy * stride;

      double init_x = 0.0;
      double init_y = 0.0;
      if (coarser != nullptr) {
        // The coarser level sits at half resolution in both axes.
        const double px = 0.5 * cx;
        const double py = 0.5 * cy;
        init_x = 2.0 * sample_bilinear(coarser->dx, coarser->grid_x(px), coarser->grid_y(py));
        init_y = 2.0 * sample_bilinear(coarser->dy, coarser->grid_x(px), coarser->grid_y(py));
      }
      const int base_x = static_cast<int>(std::lround(init_x));
      const int base_y = static_cast<int>(std::lround(init_y));

      const BlockStats stats = block_stats(a, cx, cy, radius);
      if (!(stats.var > 1e-12)) {
        // Textureless template: every candidate ties, keep the prior motion.
        grid.dx.at(gx, gy) = static_cast<float>(init_x);
        grid.dy.at(gx, gy) = static_cast<float>(init_y);
        continue;
      }

      std::fill(scores.begin(), scores.end(), kInvalidScore);
      double best = kInvalidScore;
      int best_dx = 0;
      int best_dy = 0;
      bool any = false;
      for (int oy = -sr; oy <= sr; ++oy) {
        for (int ox = -sr; ox <= sr; ++ox) {
          const int bx = cx + base_x + ox;
          const int by = cy + base_y + oy;
          if (!block_fits(b, bx, by, radius)) {
            continue;
          }
          const double score = ncc_score(a, cx, cy, stats, b, bx, by, radius);
          scores[static_cast<size_t>(oy + sr) * span + (ox + sr)] = score;
          if (score != kInvalidScore && (!any || score > best)) {
            best = score;
            best_dx = ox;
            best_dy = oy;
            any = true;
          }
        }
      }
      if (!any) {
        grid.dx.at(gx, gy) = static_cast<float>(init_x);
        grid.dy.at(gx, gy) = static_cast<float>(init_y);
        continue;
      }

      double sub_x = 0.0;
      double sub_y = 0.0;
      if (config.subpixel) {
        const auto at = [&](int oy, int ox) {
          if (ox < -sr || ox > sr || oy < -sr || oy > sr) return kInvalidScore;
          return scores[static_cast<size_t>(oy + sr) * span + (ox + sr)];
        };
        sub_x = refine_axis(at(best_dy, best_dx - 1), best, at(best_dy, best_dx + 1));
        sub_y = refine_axis(at(best_dy - 1, best_dx), best, at(best_dy + 1, best_dx));
      }
      grid.dx.at(gx, gy) = static_cast<float>(base_x + best_dx + sub_x);
      grid.dy.at(gx, gy) = static_cast<float>(base_y + best_dy + sub_y);
    }
  }
  return grid;
}

}  // namespace

void validate_tracker_config(const TrackerConfig& config) {
  if (config.pyramid_levels < 1) {
    throw ValidationError("pyramid_levels must be at least 1");
  }
  if (config.block_radius < 1) {
    throw ValidationError("block_radius must be at least 1");
  }
  if (config.search_radius < 1) {
    throw ValidationError("search_radius must be at least 1");
  }
  if (config.window_length < 1) {
    throw ValidationError("window_length must be at least 1");
  }
}

void validate_field(const DisplacementField& field) {
  if (field.width <= 0 || field.height <= 0) {
    throw StructuralError("displacement field has non-positive dimensions");
  }
  if (!(field.pixel_pitch > 0.0)) {
    throw StructuralError("displacement field pixel pitch must be positive");
  }
  if (std::abs(field.to_frame - field.from_frame) != 1) {
    throw SequenceError("displacement fields connect adjacent frames only");
  }
  const size_t expect = static_cast<size_t>(field.width) * field.height;
  if (field.dx.size() != expect || field.dy.size() != expect) {
    throw StructuralError("displacement field vector planes do not match dimensions");
  }
}

void validate_trajectories(const PointTrajectories& traj) {
  if (traj.n_points <= 0 || traj.n_frames <= 0) {
    throw StructuralError("trajectories need at least one point and one frame");
  }
  if (traj.reference_frame < 0 || traj.reference_frame >= traj.n_frames) {
    throw StructuralError("trajectory reference frame outside the sequence");
  }
  if (static_cast<int>(traj.positions.size()) != traj.n_frames ||
      static_cast<int>(traj.visibility.size()) != traj.n_frames) {
    throw StructuralError("trajectory frame count does not match declared n_frames");
  }
  for (int t = 0; t < traj.n_frames; ++t) {
    if (static_cast<int>(traj.positions[static_cast<size_t>(t)].size()) != traj.n_points ||
        static_cast<int>(traj.visibility[static_cast<size_t>(t)].size()) != traj.n_points) {
      throw StructuralError("trajectory point count does not match declared n_points at frame " +
                            std::to_string(t));
    }
  }
}

DisplacementField estimate_flow(const FloatImage& frame_a, const FloatImage& frame_b,
                                const TrackerConfig& config, double pixel_pitch, int from_frame,
                                int to_frame) {
  validate_tracker_config(config);
  if (frame_a.width != frame_b.width || frame_a.height != frame_b.height) {
    throw StructuralError("frames to match disagree in size");
  }
  if (!(pixel_pitch > 0.0)) {
    throw ValidationError("pixel pitch must be positive");
  }
  if (std::abs(to_frame - from_frame) != 1) {
    throw SequenceError("displacement fields connect adjacent frames only");
  }
  const int min_side = 2 * config.block_radius + 1;
  if (frame_a.width < min_side || frame_a.height < min_side) {
    throw InsufficientDataError("frames too small for the matching block");
  }

  // Keep only pyramid levels that still fit a matching block.
  std::vector<FloatImage> pyr_a{frame_a};
  std::vector<FloatImage> pyr_b{frame_b};
  for (int level = 1; level < config.pyramid_levels; ++level) {
    const FloatImage& prev = pyr_a.back();
    if (prev.width / 2 < min_side || prev.height / 2 < min_side) {
      break;
    }
    pyr_a.push_back(downsample(pyr_a.back()));
    pyr_b.push_back(downsample(pyr_b.back()));
  }

  BlockGrid motion;
  for (int level = static_cast<int>(pyr_a.size()) - 1; level >= 0; --level) {
    const BlockGrid* coarser = (level == static_cast<int>(pyr_a.size()) - 1) ? nullptr : &motion;
    motion = match_level(pyr_a[static_cast<size_t>(level)], pyr_b[static_cast<size_t>(level)],
                         config, coarser);
  }

  DisplacementField field;
  field.width = frame_a.width;
  field.height = frame_a.height;
  field.pixel_pitch = pixel_pitch;
  field.from_frame = from_frame;
  field.to_frame = to_frame;
  field.dx.resize(static_cast<size_t>(field.width) * field.height);
  field.dy.resize(field.dx.size());
  for (int y = 0; y < field.height; ++y) {
    for (int x = 0; x < field.width; ++x) {
      const double gx = motion.grid_x(x);
      const double gy = motion.grid_y(y);
      const size_t idx = static_cast<size_t>(y) * field.width + x;
      field.dx[idx] = sample_bilinear(motion.dx, gx, gy);
      field.dy[idx] = sample_bilinear(motion.dy, gx, gy);
    }
  }
  return field;
}

WarpResult warp_mesh(const geom::MyocardialMesh& mesh, const DisplacementField& field) {
  validate_field(field);
  geom::validate_mesh(mesh);

  WarpResult result;
  result.mesh = mesh;
  result.mesh.frame_index = field.to_frame;
  result.endo_out_of_bounds.assign(mesh.endo.points.size(), 0);
  result.epi_out_of_bounds.assign(mesh.epi.points.size(), 0);

  FloatImage dx_img(field.width, field.height);
  FloatImage dy_img(field.width, field.height);
  dx_img.px = field.dx;
  dy_img.px = field.dy;

  const auto move = [&](geom::Point2D& p, std::vector<uint8_t>& flags, size_t i) {
    const double px = p.x / field.pixel_pitch;
    const double py = p.y / field.pixel_pitch;
    const bool oob = px < 0.0 || py < 0.0 || px > field.width - 1 || py > field.height - 1;
    if (oob) {
      flags[i] = 1;
      result.any_out_of_bounds = true;
    }
    const double ddx = sample_bilinear(dx_img, px, py);
    const double ddy = sample_bilinear(dy_img, px, py);
    p.x += ddx * field.pixel_pitch;
    p.y += ddy * field.pixel_pitch;
  };
  for (size_t i = 0; i < result.mesh.endo.points.size(); ++i) {
    move(result.mesh.endo.points[i], result.endo_out_of_bounds, i);
  }
  for (size_t i = 0; i < result.mesh.epi.points.size(); ++i) {
    move(result.mesh.epi.points[i], result.epi_out_of_bounds, i);
  }
  return result;
}

std::vector<geom::MyocardialMesh> propagate_mesh_flow(const geom::MyocardialMesh& mesh_ref,
                                                      const std::vector<DisplacementField>& fields,
                                                      int n_frames) {
  geom::validate_mesh(mesh_ref);
  if (n_frames < 1) {
    throw ValidationError("propagation needs at least one frame");
  }
  const int ref = mesh_ref.frame_index;
  if (ref < 0 || ref >= n_frames) {
    throw SequenceError("reference mesh frame outside the sequence");
  }
  for (const DisplacementField& field : fields) {
    validate_field(field);
  }

  const auto field_for = [&](int from, int to) -> const DisplacementField& {
    for (const DisplacementField& field : fields) {
      if (field.from_frame == from && field.to_frame == to) {
        return field;
      }
    }
    throw SequenceError("missing displacement field " + std::to_string(from) + " -> " +
                        std::to_string(to));
  };

  std::vector<geom::MyocardialMesh> meshes(static_cast<size_t>(n_frames));
  meshes[static_cast<size_t>(ref)] = mesh_ref;
  for (int t = ref + 1; t < n_frames; ++t) {
    meshes[static_cast<size_t>(t)] =
        warp_mesh(meshes[static_cast<size_t>(t - 1)], field_for(t - 1, t)).mesh;
  }
  for (int t = ref - 1; t >= 0; --t) {
    meshes[static_cast<size_t>(t)] =
        warp_mesh(meshes[static_cast<size_t>(t + 1)], field_for(t + 1, t)).mesh;
  }
  return meshes;
}

PointTrajectories track_points(const std::vector<FloatImage>& frames, double pixel_pitch,
                               const geom::MyocardialMesh& query_mesh,
                               const TrackerConfig& config) {
  validate_tracker_config(config);
  geom::validate_mesh(query_mesh);
  if (!(pixel_pitch > 0.0)) {
    throw ValidationError("pixel pitch must be positive");
  }
  const int n_frames = static_cast<int>(frames.size());
  if (n_frames < 1) {
    throw InsufficientDataError("point tracking needs at least one frame");
  }
  const int ref = query_mesh.frame_index;
  if (ref < 0 || ref >= n_frames) {
    throw SequenceError("query mesh frame outside the sequence");
  }
  for (int t = 1; t < n_frames; ++t) {
    if (frames[static_cast<size_t>(t)].width != frames[0].width ||
        frames[static_cast<size_t>(t)].height != frames[0].height) {
      throw StructuralError("frames disagree in size");
    }
  }

  const geom::Contour midline = geom::compute_midline(query_mesh);
  const int n_points = static_cast<int>(midline.points.size());

  PointTrajectories traj;
  traj.n_points = n_points;
  traj.n_frames = n_frames;
  traj.reference_frame = ref;
  traj.positions.assign(static_cast<size_t>(n_frames),
                        std::vector<geom::Point2D>(static_cast<size_t>(n_points)));
  traj.visibility.assign(static_cast<size_t>(n_frames),
                         std::vector<uint8_t>(static_cast<size_t>(n_points), 1));
  traj.positions[static_cast<size_t>(ref)] = midline.points;

  const int radius = config.block_radius;
  const int sr = config.search_radius;
  const int span = 2 * sr + 1;

  // Walks one direction from the reference; dir is +1 or -1.
  const auto track_direction = [&](int point, int dir) {
    // Position in pixel units; the template is pinned to an integer center
    // and the point keeps its subpixel offset from it.
    double qx = midline.points[static_cast<size_t>(point)].x / pixel_pitch;
    double qy = midline.points[static_cast<size_t>(point)].y / pixel_pitch;
    int tmpl_frame = ref;
    int tmpl_x = static_cast<int>(std::lround(qx));
    int tmpl_y = static_cast<int>(std::lround(qy));
    double off_x = qx - tmpl_x;
    double off_y = qy - tmpl_y;
    bool tmpl_ok = block_fits(frames[static_cast<size_t>(ref)], tmpl_x, tmpl_y, radius);
    int age = 0;

    std::vector<double> scores(static_cast<size_t>(span) * span);
    for (int t = ref + dir; t >= 0 && t < n_frames; t += dir) {
      auto& pos = traj.positions[static_cast<size_t>(t)][static_cast<size_t>(point)];
      auto& vis = traj.visibility[static_cast<size_t>(t)][static_cast<size_t>(point)];
      pos = {qx * pixel_pitch, qy * pixel_pitch};
      if (!tmpl_ok) {
        vis = 0;
        continue;
      }
      const FloatImage& tmpl_img = frames[static_cast<size_t>(tmpl_frame)];
      const FloatImage& cur = frames[static_cast<size_t>(t)];
      const BlockStats stats = block_stats(tmpl_img, tmpl_x, tmpl_y, radius);
      if (!(stats.var > 1e-12)) {
        vis = 0;
        continue;
      }

      const int cx = static_cast<int>(std::lround(qx - off_x));
      const int cy = static_cast<int>(std::lround(qy - off_y));
      std::fill(scores.begin(), scores.end(), kInvalidScore);
      double best = kInvalidScore;
      int best_dx = 0;
      int best_dy = 0;
      bool any = false;
      for (int oy = -sr; oy <= sr; ++oy) {
        for (int ox = -sr; ox <= sr; ++ox) {
          const int bx = cx + ox;
          const int by = cy + oy;
          if (!block_fits(cur, bx, by, radius)) {
            continue;
          }
          const double score = ncc_score(tmpl_img, tmpl_x, tmpl_y, stats, cur, bx, by, radius);
          scores[static_cast<size_t>(oy + sr) * span + (ox + sr)] = score;
          if (score != kInvalidScore && (!any || score > best)) {
            best = score;
            best_dx = ox;
            best_dy = oy;
            any = true;
          }
        }
      }
      if (!any) {
        vis = 0;
        continue;
      }

      double sub_x = 0.0;
      double sub_y = 0.0;
      if (config.subpixel) {
        const auto at = [&](int oy, int ox) {
          if (ox < -sr || ox > sr || oy < -sr || oy > sr) return kInvalidScore;
          return scores[static_cast<size_t>(oy + sr) * span + (ox + sr)];
        };
        sub_x = refine_axis(at(best_dy, best_dx - 1), best, at(best_dy, best_dx + 1));
        sub_y = refine_axis(at(best_dy - 1, best_dx), best, at(best_dy + 1, best_dx));
      }
      qx = cx + best_dx + sub_x + off_x;
      qy = cy + best_dy + sub_y + off_y;
      pos = {qx * pixel_pitch, qy * pixel_pitch};

      if (++age >= config.window_length) {
        // Refresh the template from the frame just matched so slow
        // appearance drift cannot detach the block from the tissue.
        const int nx = static_cast<int>(std::lround(qx));
        const int ny = static_cast<int>(std::lround(qy));
        if (block_fits(cur, nx, ny, radius)) {
          tmpl_frame = t;
          tmpl_x = nx;
          tmpl_y = ny;
          off_x = qx - nx;
          off_y = qy - ny;
          age = 0;
        }
      }
    }
  };

  for (int point = 0; point < n_points; ++point) {
    track_direction(point, +1);
    track_direction(point, -1);
  }
  validate_trajectories(traj);
  return traj;
}

}  // namespace echostrain::tracking

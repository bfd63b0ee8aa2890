#include "echostrain/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "echostrain/errors.hpp"
#include "echostrain/rng.hpp"

namespace echostrain::phantom {
namespace {

using geom::Point2D;

Point2D sub(const Point2D& a, const Point2D& b) { return {a.x - b.x, a.y - b.y}; }
Point2D add(const Point2D& a, const Point2D& b) { return {a.x + b.x, a.y + b.y}; }
Point2D mul(double k, const Point2D& a) { return {k * a.x, k * a.y}; }
double dot(const Point2D& a, const Point2D& b) { return a.x * b.x + a.y * b.y; }
double cross(const Point2D& a, const Point2D& b) { return a.x * b.y - a.y * b.x; }

double ellipse_radius_sq(const GeometryConfig& geo, const Point2D& p, double grow) {
  const double a = 0.5 * geo.short_axis_mm + grow;
  const double b = geo.long_axis_mm + grow;
  const double u = (p.x - geo.center_x_mm) / a;
  const double v = (p.y - geo.base_y_mm) / b;
  return u * u + v * v;
}

bool inside_annulus_impl(const GeometryConfig& geo, const Point2D& p) {
  if (p.y < geo.base_y_mm) {
    return false;
  }
  return ellipse_radius_sq(geo, p, 0.0) >= 1.0 &&
         ellipse_radius_sq(geo, p, geo.wall_thickness_mm) <= 1.0;
}

bool inside_cavity_impl(const GeometryConfig& geo, const Point2D& p) {
  return p.y >= geo.base_y_mm && ellipse_radius_sq(geo, p, 0.0) < 1.0;
}

// Uniform rejection sampling inside an arbitrary region of the grid box.
template <typename Inside>
void sample_region(rng::Stream& stream, const GridSpec& grid, size_t count, Inside inside,
                   std::vector<Point2D>& out) {
  const double w = grid.width * grid.pixel_pitch_mm;
  const double h = grid.height * grid.pixel_pitch_mm;
  size_t accepted = 0;
  while (accepted < count) {
    const Point2D p{stream.uniform(0.0, w), stream.uniform(0.0, h)};
    if (inside(p)) {
      out.push_back(p);
      ++accepted;
    }
  }
}

}  // namespace

void validate_geometry(const GeometryConfig& geo) {
  if (!(geo.long_axis_mm > geo.short_axis_mm && geo.short_axis_mm > geo.wall_thickness_mm &&
        geo.wall_thickness_mm > 0.0)) {
    throw GeometryError("geometry requires long_axis > short_axis > wall_thickness > 0");
  }
  if (geo.points_per_contour < 7 || geo.points_per_contour % 2 == 0) {
    throw GeometryError("points_per_contour must be odd and at least 7");
  }
  if (!std::isfinite(geo.center_x_mm) || !std::isfinite(geo.base_y_mm)) {
    throw GeometryError("geometry placement must be finite");
  }
}

void validate_motion(const MotionModel& model) {
  if (model.n_frames < 2) {
    throw ValidationError("motion model needs at least 2 frames");
  }
  if (!(model.ed_index >= 0 && model.ed_index < model.es_index &&
        model.es_index < model.n_frames)) {
    throw ValidationError("motion model requires 0 <= ed_index < es_index < n_frames");
  }
  // Zero is allowed: a zero-amplitude model is the still phantom used to
  // probe tracker noise floors.
  if (!(model.peak_longitudinal_shortening >= 0.0 && model.peak_longitudinal_shortening < 1.0)) {
    throw ValidationError("peak_longitudinal_shortening must be in [0, 1)");
  }
  if (model.peak_radial_thickening < 0.0) {
    throw ValidationError("peak_radial_thickening must be >= 0");
  }
  if (!model.temporal_profile.empty()) {
    if (static_cast<int>(model.temporal_profile.size()) != model.n_frames) {
      throw ValidationError("temporal_profile length must equal n_frames");
    }
    const auto& prof = model.temporal_profile;
    if (prof[static_cast<size_t>(model.ed_index)] != 0.0) {
      throw ValidationError("temporal_profile must be 0 at ed_index");
    }
    if (prof[static_cast<size_t>(model.es_index)] != 1.0) {
      throw ValidationError("temporal_profile must be 1 at es_index");
    }
    for (size_t t = 0; t < prof.size(); ++t) {
      if (!(prof[t] >= 0.0 && prof[t] <= 1.0)) {
        throw ValidationError("temporal_profile values must lie in [0, 1]");
      }
      if (t > 0 && std::abs(prof[t] - prof[t - 1]) >= 0.5) {
        throw ValidationError("temporal_profile jumps by 0.5 or more between frames " +
                              std::to_string(t - 1) + " and " + std::to_string(t));
      }
    }
  }
}

geom::MyocardialMesh generate_ed_mesh(const GeometryConfig& geo) {
  validate_geometry(geo);
  const int n = geo.points_per_contour;
  const double a = 0.5 * geo.short_axis_mm;
  const double b = geo.long_axis_mm;
  const double w = geo.wall_thickness_mm;

  geom::MyocardialMesh mesh;
  mesh.apex_index = (n - 1) / 2;
  mesh.frame_index = 0;
  for (int k = 0; k < n; ++k) {
    // Offsetting both semi-axes by w moves each sample radially by exactly
    // w, so paired vertices are wall_thickness apart to rounding error.
    const double theta = std::numbers::pi * k / (n - 1);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    mesh.endo.points.push_back({geo.center_x_mm - a * c, geo.base_y_mm + b * s});
    mesh.epi.points.push_back({geo.center_x_mm - (a + w) * c, geo.base_y_mm + (b + w) * s});
  }
  geom::validate_mesh(mesh);
  return mesh;
}

MotionEngine::MotionEngine(const GeometryConfig& geo, const MotionModel& model,
                           std::vector<InfarctSpec> infarcts, geom::View view)
    : geo_(geo), model_(model), infarcts_(std::move(infarcts)) {
  validate_geometry(geo_);
  validate_motion(model_);

  ed_mesh_ = generate_ed_mesh(geo_);
  ed_midline_ = geom::compute_midline(ed_mesh_);
  layout_ = geom::build_segment_layout(ed_midline_, ed_mesh_.apex_index, view);

  rail_.resize(ed_midline_.points.size());
  for (size_t i = 0; i < rail_.size(); ++i) {
    rail_[i] = sub(ed_midline_.points[i], ed_mesh_.endo.points[i]);
  }

  if (model_.temporal_profile.empty()) {
    // Raised cosine up to ES, cosine return to 0 at the last frame.
    profile_.assign(static_cast<size_t>(model_.n_frames), 0.0);
    for (int t = model_.ed_index; t <= model_.es_index; ++t) {
      const double phase = static_cast<double>(t - model_.ed_index) /
                           static_cast<double>(model_.es_index - model_.ed_index);
      profile_[static_cast<size_t>(t)] = 0.5 * (1.0 - std::cos(std::numbers::pi * phase));
    }
    const int tail = model_.n_frames - 1 - model_.es_index;
    for (int t = model_.es_index + 1; t < model_.n_frames; ++t) {
      const double phase =
          static_cast<double>(t - model_.es_index) / static_cast<double>(tail);
      profile_[static_cast<size_t>(t)] = 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
    }
  } else {
    profile_ = model_.temporal_profile;
  }

  const size_t n = ed_midline_.points.size();
  midline_cum_.assign(n, 0.0);
  for (size_t i = 1; i < n; ++i) {
    midline_cum_[i] =
        midline_cum_[i - 1] + std::hypot(ed_midline_.points[i].x - ed_midline_.points[i - 1].x,
                                         ed_midline_.points[i].y - ed_midline_.points[i - 1].y);
  }

  // project_to_midline scans every chord per query; the chord vectors and
  // squared lengths are engine invariants.
  chord_dir_.resize(n - 1);
  chord_len2_.resize(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    chord_dir_[i] = sub(ed_midline_.points[i + 1], ed_midline_.points[i]);
    chord_len2_[i] = chord_dir_[i].x * chord_dir_[i].x + chord_dir_[i].y * chord_dir_[i].y;
  }

  for (const InfarctSpec& inf : infarcts_) {
    if (!(inf.reduction_alpha >= 0.0 && inf.reduction_alpha <= 1.0)) {
      throw ValidationError("infarct reduction_alpha must lie in [0, 1]");
    }
    if (!(inf.sigma_mm > 0.0)) {
      throw ValidationError("infarct sigma_mm must be positive");
    }
    const geom::Segment& seg = geom::segment_by_label(layout_, inf.segment_label);
    infarct_center_.push_back(0.5 * (midline_cum_[static_cast<size_t>(seg.start_index)] +
                                     midline_cum_[static_cast<size_t>(seg.end_index)]));
  }

  chord_scale_.resize(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    chord_scale_[i] = scale_at_arc(0.5 * (midline_cum_[i] + midline_cum_[i + 1]));
  }

  // Total shortening is linear in the rescale c, so conservation has a
  // closed-form solution: c = L / sum(s_chord * chord_length).
  const bool wanted = std::any_of(infarcts_.begin(), infarcts_.end(),
                                  [](const InfarctSpec& inf) { return inf.compensate; });
  const double k = model_.peak_longitudinal_shortening;
  double c = 1.0;
  if (wanted && k > 0.0 && !infarcts_.empty()) {
    double weighted = 0.0;
    double s_max = 0.0;
    for (size_t i = 0; i + 1 < n; ++i) {
      weighted += chord_scale_[i] * (midline_cum_[i + 1] - midline_cum_[i]);
      s_max = std::max(s_max, chord_scale_[i]);
    }
    c = midline_cum_.back() / weighted;
    // Every chord must keep positive length at peak activation.
    if (!(weighted > 0.0) || !(k * c * s_max < 1.0)) {
      throw GeometryError("infarct too severe to compensate");
    }
  }
  compensation_.resize(static_cast<size_t>(model_.n_frames));
  moved_mid_.resize(static_cast<size_t>(model_.n_frames));
  for (int t = 0; t < model_.n_frames; ++t) {
    const double a = profile_[static_cast<size_t>(t)];
    compensation_[static_cast<size_t>(t)] = (wanted && a > 0.0 && k > 0.0) ? c : 1.0;
    moved_mid_[static_cast<size_t>(t)] = chained_midline(t);
  }
}

double MotionEngine::scale_at_arc(double arc) const {
  double reduction = 0.0;
  for (size_t j = 0; j < infarcts_.size(); ++j) {
    const double d = arc - infarct_center_[j];
    const double sig = infarcts_[j].sigma_mm;
    reduction += infarcts_[j].reduction_alpha * std::exp(-(d * d) / (2.0 * sig * sig));
  }
  return std::clamp(1.0 - reduction, 0.0, 1.0);
}

// Chains the per-chord contraction outward from the apex, which never moves.
// Each midline chord keeps its ED direction and shrinks to
// (1 - s * profile[t] * k * c) of its ED length, so segment shortening is the
// arc-weighted mean of the local factors.
std::vector<Point2D> MotionEngine::chained_midline(int t) const {
  const auto& pts = ed_midline_.points;
  std::vector<Point2D> moved = pts;
  const double gain = profile_[static_cast<size_t>(t)] * model_.peak_longitudinal_shortening *
                      compensation_[static_cast<size_t>(t)];
  if (gain == 0.0) {
    return moved;
  }
  const size_t ap = static_cast<size_t>(ed_mesh_.apex_index);
  for (size_t i = ap; i + 1 < pts.size(); ++i) {
    const double f = 1.0 - gain * chord_scale_[i];
    moved[i + 1] = add(moved[i], mul(f, sub(pts[i + 1], pts[i])));
  }
  for (size_t i = ap; i > 0; --i) {
    const double f = 1.0 - gain * chord_scale_[i - 1];
    moved[i - 1] = add(moved[i], mul(f, sub(pts[i - 1], pts[i])));
  }
  return moved;
}

double MotionEngine::compensation(int t) const {
  if (t < 0 || t >= model_.n_frames) {
    throw BoundsError("frame " + std::to_string(t) + " outside motion model");
  }
  return compensation_[static_cast<size_t>(t)];
}

MotionEngine::Foot MotionEngine::project_to_midline(const Point2D& p) const {
  const auto& pts = ed_midline_.points;

  // The nearest chord picks the quad of the ruled chart.
  size_t chord = 0;
  double chord_u = 0.0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point2D d = chord_dir_[i];
    const double len2 = chord_len2_[i];
    double u = ((p.x - pts[i].x) * d.x + (p.y - pts[i].y) * d.y) / len2;
    u = std::clamp(u, 0.0, 1.0);
    const Point2D q = (u == 0.0) ? pts[i] : (u == 1.0 ? pts[i + 1] : add(pts[i], mul(u, d)));
    const double dx = p.x - q.x;
    const double dy = p.y - q.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      chord = i;
      chord_u = u;
    }
  }

  // Within the quad solve p = (1-u)*(m0 + s*r0) + u*(m1 + s*r1) for u:
  // eliminating s leaves a quadratic from (q - u*a) x (r0 + u*b) = 0.
  const Point2D a = chord_dir_[chord];
  const Point2D r0 = rail_[chord];
  const Point2D r1 = rail_[chord + 1];
  const Point2D b = sub(r1, r0);
  const Point2D q = sub(p, pts[chord]);
  const double alpha = -cross(a, b);
  const double beta = cross(q, b) - cross(a, r0);
  const double gamma = cross(q, r0);
  double u = chord_u;
  if (alpha == 0.0) {
    if (beta != 0.0) u = -gamma / beta;
  } else if (beta == 0.0) {
    const double v2 = -gamma / alpha;
    if (v2 >= 0.0) {
      const double v = std::sqrt(v2);
      u = (std::abs(v - chord_u) <= std::abs(-v - chord_u)) ? v : -v;
    }
  } else {
    const double disc = beta * beta - 4.0 * alpha * gamma;
    if (disc >= 0.0) {
      // Stable quadratic roots; the gamma/h root is exactly 0 when gamma is,
      // so a query at a midline vertex keeps a bitwise-exact chart.
      const double h = -0.5 * (beta + std::copysign(std::sqrt(disc), beta));
      const double u1 = h / alpha;
      const double u2 = gamma / h;
      u = (std::abs(u1 - chord_u) <= std::abs(u2 - chord_u)) ? u1 : u2;
    }
  }
  // The chart only corrects the chord projection locally; far points keep
  // the projection so extrapolated rails cannot fling them around.
  if (!(std::abs(u - chord_u) <= 0.75)) u = chord_u;
  if (chord == 0 && u < 0.0) u = 0.0;
  if (chord + 2 == pts.size() && u > 1.0) u = 1.0;

  // Endpoint parameters reuse vertices and rails verbatim so queries at mesh
  // vertices decompose with a bitwise-zero residual.
  const Point2D rail = (u == 0.0) ? r0 : (u == 1.0 ? r1 : add(mul(1.0 - u, r0), mul(u, r1)));
  const Point2D base = (u == 0.0) ? pts[chord] : (u == 1.0 ? pts[chord + 1] : add(pts[chord], mul(u, a)));
  const double s = dot(sub(p, base), rail) / dot(rail, rail);

  Foot foot;
  foot.point = add(base, mul(s, rail));
  foot.arc = midline_cum_[chord] + u * (midline_cum_[chord + 1] - midline_cum_[chord]);
  foot.chord = chord;
  foot.u = u;
  foot.s = s;
  return foot;
}

double MotionEngine::midline_arc_of(const Point2D& p) const { return project_to_midline(p).arc; }

double MotionEngine::contraction_scale(const Point2D& p) const {
  return scale_at_arc(midline_arc_of(p));
}

Point2D MotionEngine::displace_point(const Point2D& p, int t) const {
  if (t < 0 || t >= model_.n_frames) {
    throw BoundsError("frame " + std::to_string(t) + " outside motion model");
  }
  const double a = profile_[static_cast<size_t>(t)];
  if (a == 0.0 || (model_.peak_longitudinal_shortening == 0.0 &&
                   model_.peak_radial_thickening == 0.0)) {
    return p;
  }
  const Foot foot = project_to_midline(p);
  const auto& moved = moved_mid_[static_cast<size_t>(t)];
  const double thick = 1.0 + model_.peak_radial_thickening * a;
  // Each moved rail endpoint keeps its ED direction scaled by the
  // thickening, exactly like mesh_at rebuilds the paired wall vertices.
  const double gs = thick * foot.s;
  const Point2D m0 = add(moved[foot.chord], mul(gs, rail_[foot.chord]));
  const Point2D m1 = add(moved[foot.chord + 1], mul(gs, rail_[foot.chord + 1]));
  Point2D moved_foot;
  if (foot.u == 0.0) {
    moved_foot = m0;
  } else if (foot.u == 1.0) {
    moved_foot = m1;
  } else {
    moved_foot = add(m0, mul(foot.u, sub(m1, m0)));
  }
  // Whatever the chart does not represent is carried rigidly.
  return add(moved_foot, sub(p, foot.point));
}

geom::MyocardialMesh MotionEngine::mesh_at(int t) const {
  if (t < 0 || t >= model_.n_frames) {
    throw BoundsError("frame " + std::to_string(t) + " outside motion model");
  }
  const double a = profile_[static_cast<size_t>(t)];
  geom::MyocardialMesh mesh = ed_mesh_;
  mesh.frame_index = t;
  if (a == 0.0 || (model_.peak_longitudinal_shortening == 0.0 &&
                   model_.peak_radial_thickening == 0.0)) {
    return mesh;
  }
  const double thick = 1.0 + model_.peak_radial_thickening * a;
  const auto& moved = moved_mid_[static_cast<size_t>(t)];
  for (size_t i = 0; i < ed_midline_.points.size(); ++i) {
    // Midline vertices carry the longitudinal contraction; the paired wall
    // vertices keep their ED offset from the midline, scaled by thickening,
    // so the rebuilt midline stays on the contracted one.
    const Point2D mid = ed_midline_.points[i];
    mesh.endo.points[i] = add(moved[i], mul(thick, sub(ed_mesh_.endo.points[i], mid)));
    mesh.epi.points[i] = add(moved[i], mul(thick, sub(ed_mesh_.epi.points[i], mid)));
  }
  return mesh;
}

bool MotionEngine::inside_annulus(const Point2D& p) const { return inside_annulus_impl(geo_, p); }
bool MotionEngine::inside_cavity(const Point2D& p) const { return inside_cavity_impl(geo_, p); }

tracking::DisplacementField MotionEngine::sample_flow(int from_frame, int to_frame,
                                                      const GridSpec& grid) const {
  if (std::abs(to_frame - from_frame) != 1) {
    throw ValidationError("displacement fields connect adjacent frames only");
  }
  if (from_frame < 0 || from_frame >= model_.n_frames || to_frame < 0 ||
      to_frame >= model_.n_frames) {
    throw BoundsError("flow frames outside motion model");
  }
  tracking::DisplacementField field;
  field.width = grid.width;
  field.height = grid.height;
  field.pixel_pitch = grid.pixel_pitch_mm;
  field.from_frame = from_frame;
  field.to_frame = to_frame;
  field.dx.resize(static_cast<size_t>(grid.width) * grid.height);
  field.dy.resize(field.dx.size());

  for (int i = 0; i < grid.height; ++i) {
    for (int j = 0; j < grid.width; ++j) {
      const Point2D x{j * grid.pixel_pitch_mm, i * grid.pixel_pitch_mm};
      // Invert the from_frame map by fixed point iteration: the material
      // point now sitting at pixel x.
      Point2D p = x;
      for (int iter = 0; iter < 10; ++iter) {
        const Point2D fx = displace_point(p, from_frame);
        p = add(p, sub(x, fx));
      }
      const Point2D moved = displace_point(p, to_frame);
      const size_t idx = static_cast<size_t>(i) * grid.width + j;
      field.dx[idx] = static_cast<float>((moved.x - x.x) / grid.pixel_pitch_mm);
      field.dy[idx] = static_cast<float>((moved.y - x.y) / grid.pixel_pitch_mm);
    }
  }
  return field;
}

ScattererField seed_scatterers(const GeometryConfig& geo, const GridSpec& grid,
                               const ScattererConfig& config, uint64_t seed) {
  validate_geometry(geo);
  if (config.density <= 0.0) {
    throw ValidationError("scatterer density must be positive");
  }
  if (!(config.coherence_ratio >= 0.0 && config.coherence_ratio <= 1.0)) {
    throw ValidationError("coherence_ratio must lie in [0, 1]");
  }

  const double a = 0.5 * geo.short_axis_mm;
  const double b = geo.long_axis_mm;
  const double w = geo.wall_thickness_mm;
  const double half_pi = 0.5 * std::numbers::pi;
  const double annulus_area = half_pi * ((a + w) * (b + w) - a * b);
  const double cavity_area = half_pi * a * b;
  const double grid_area =
      grid.width * grid.pixel_pitch_mm * grid.height * grid.pixel_pitch_mm;
  const double background_area = std::max(0.0, grid_area - annulus_area - cavity_area);
  if (annulus_area <= 0.0) {
    throw GeometryError("annulus has zero area");
  }

  const auto count_of = [](double density, double area) {
    return static_cast<size_t>(std::llround(density * area));
  };
  const size_t n_myo = count_of(config.density, annulus_area);
  const size_t n_bg = count_of(config.background_density, background_area);
  const size_t n_cav = count_of(config.cavity_density, cavity_area);
  if (n_myo == 0) {
    throw ValidationError("density too low: no myocardial scatterers");
  }

  ScattererField field;
  field.coherence_ratio = config.coherence_ratio;
  field.frame_index = 0;

  rng::Stream pos_stream = rng::substream(seed, rng::Tag::MyoPositions);
  sample_region(pos_stream, grid, n_myo,
                [&](const Point2D& p) { return inside_annulus_impl(geo, p); }, field.positions);

  rng::Stream amp_stream = rng::substream(seed, rng::Tag::MyoAmplitudes);
  for (size_t i = 0; i < n_myo; ++i) {
    field.amplitudes.push_back(static_cast<float>(amp_stream.rayleigh(1.0)));
    field.regions.push_back(Region::Myocardium);
  }

  // Exactly floor(ratio * N) coherent myocardial scatterers, chosen by a
  // seeded shuffle so the split is deterministic.
  const size_t n_coherent =
      static_cast<size_t>(std::floor(config.coherence_ratio * static_cast<double>(n_myo)));
  std::vector<size_t> order(n_myo);
  for (size_t i = 0; i < n_myo; ++i) {
    order[i] = i;
  }
  rng::Stream mask_stream = rng::substream(seed, rng::Tag::CoherenceMask);
  mask_stream.shuffle(order);
  field.coherent.assign(n_myo, 0);
  for (size_t i = 0; i < n_coherent; ++i) {
    field.coherent[order[i]] = 1;
  }

  rng::Stream bg_stream = rng::substream(seed, rng::Tag::Background);
  sample_region(bg_stream, grid, n_bg,
                [&](const Point2D& p) {
                  return !inside_annulus_impl(geo, p) && !inside_cavity_impl(geo, p);
                },
                field.positions);
  for (size_t i = 0; i < n_bg; ++i) {
    field.amplitudes.push_back(
        static_cast<float>(bg_stream.rayleigh(config.background_amplitude)));
    field.regions.push_back(Region::Background);
    field.coherent.push_back(1);
  }

  rng::Stream cav_stream = rng::substream(seed, rng::Tag::Cavity);
  sample_region(cav_stream, grid, n_cav,
                [&](const Point2D& p) { return inside_cavity_impl(geo, p); }, field.positions);
  for (size_t i = 0; i < n_cav; ++i) {
    field.amplitudes.push_back(static_cast<float>(cav_stream.rayleigh(config.cavity_amplitude)));
    field.regions.push_back(Region::Cavity);
    field.coherent.push_back(1);
  }
  return field;
}

ScattererField advance_scatterers(const ScattererField& ed_field, int t,
                                  const MotionEngine& engine, uint64_t seed) {
  if (t < 0 || t >= engine.model().n_frames) {
    throw BoundsError("frame " + std::to_string(t) + " outside motion model");
  }
  ScattererField out = ed_field;
  out.frame_index = t;

  rng::Stream fresh = rng::substream(seed, rng::Tag::IncoherentResample, static_cast<uint64_t>(t));
  const GeometryConfig& geo = engine.geometry();
  for (size_t i = 0; i < ed_field.positions.size(); ++i) {
    if (ed_field.regions[i] != Region::Myocardium) {
      continue;  // static surroundings
    }
    if (ed_field.coherent[i]) {
      out.positions[i] = engine.displace_point(ed_field.positions[i], t);
    } else {
      // Redrawn in material coordinates, then carried by the frame-t map, so
      // incoherent speckle decorrelates while staying inside the wall.
      Point2D p;
      do {
        const double w = geo.center_x_mm + 0.5 * geo.short_axis_mm + geo.wall_thickness_mm;
        const double h = geo.base_y_mm + geo.long_axis_mm + geo.wall_thickness_mm;
        p = Point2D{fresh.uniform(0.0, w), fresh.uniform(0.0, h)};
      } while (!engine.inside_annulus(p));
      out.positions[i] = engine.displace_point(p, t);
      out.amplitudes[i] = static_cast<float>(fresh.rayleigh(1.0));
    }
  }
  return out;
}

GroundTruth build_ground_truth(const GeometryConfig& geo, const MotionModel& model,
                               const std::vector<InfarctSpec>& infarcts, geom::View view) {
  const MotionEngine engine(geo, model, infarcts, view);
  GroundTruth gt;
  gt.layout = engine.layout();
  gt.meshes.reserve(static_cast<size_t>(model.n_frames));
  for (int t = 0; t < model.n_frames; ++t) {
    gt.meshes.push_back(engine.mesh_at(t));
  }

  gt.trajectories.n_points = static_cast<int>(engine.ed_mesh().endo.points.size());
  gt.trajectories.n_frames = model.n_frames;
  gt.trajectories.reference_frame = model.es_index;
  for (const auto& mesh : gt.meshes) {
    const geom::Contour midline = geom::compute_midline(mesh);
    gt.trajectories.positions.push_back(midline.points);
    gt.trajectories.visibility.emplace_back(midline.points.size(), 1);
  }

  gt.reference_sls = strain::compute_sls(gt.meshes, gt.layout, model.ed_index, model.es_index);
  gt.reference_gls = strain::compute_gls(gt.meshes, model.ed_index);
  return gt;
}

}  // namespace echostrain::phantom

// End-to-end acceptance checks. Each criterion prints one PASS or FAIL line
// with its measured figure and wall time; the process exits nonzero when any
// criterion fails. Randomized criteria draw from fixed-seed mt19937_64 with
// an explicit bit-to-double mapping so reruns are bit-identical everywhere.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "echostrain/evaluation.hpp"
#include "echostrain/geometry.hpp"
#include "echostrain/io.hpp"
#include "echostrain/phantom.hpp"
#include "echostrain/speckle.hpp"
#include "echostrain/strain.hpp"
#include "echostrain/tracking.hpp"

using namespace echostrain;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw Failure(message);
}

std::string text(const char* format, ...) {
  char buffer[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof buffer, format, args);
  va_end(args);
  return buffer;
}

double unit_double(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Deviation measured relative for large values, absolute near zero.
double rel_dev(double value, double reference) {
  return std::fabs(value - reference) / std::max(1.0, std::fabs(reference));
}

phantom::GeometryConfig small_geometry() {
  phantom::GeometryConfig geo;
  geo.long_axis_mm = 22.0;
  geo.short_axis_mm = 16.0;
  geo.wall_thickness_mm = 5.0;
  geo.center_x_mm = 16.0;
  geo.base_y_mm = 4.0;
  return geo;
}

phantom::GeometryConfig sweep_geometry(double wall_thickness_mm) {
  phantom::GeometryConfig geo;
  geo.long_axis_mm = 46.0;
  geo.short_axis_mm = 32.0;
  geo.wall_thickness_mm = wall_thickness_mm;
  geo.center_x_mm = 32.0;
  geo.base_y_mm = 8.0;
  return geo;
}

// 1. Every ground-truth segment reaches exactly the programmed shortening at
// end-systole when no infarct perturbs the field.
std::string strain_exactness() {
  const phantom::GeometryConfig geo;
  const phantom::MotionModel motion;
  const auto gt = phantom::build_ground_truth(geo, motion, {}, geom::View::FourChamber);
  const int es = motion.es_index;
  const double expected = -100.0 * motion.peak_longitudinal_shortening;
  double worst = 0.0;
  for (const auto& curve : gt.reference_sls.values) {
    worst = std::max(worst, std::fabs(curve[es] - expected));
  }
  worst = std::max(worst, std::fabs(gt.reference_gls[es] - expected));
  const auto summary = strain::summarize(gt.reference_sls, gt.reference_gls);
  for (double peak : summary.peak_systolic_sls) {
    worst = std::max(worst, std::fabs(peak - expected));
  }
  worst = std::max(worst, std::fabs(summary.peak_gls - expected));
  require(worst <= 1e-6, text("SLS/GLS deviates from %.1f by %.3g", expected, worst));
  return text("max |value - (%.0f)| = %.2e", expected, worst);
}

geom::MyocardialMesh rigid_transformed(const geom::MyocardialMesh& mesh, double c, double s,
                                       double tx, double ty) {
  geom::MyocardialMesh out = mesh;
  for (auto* contour : {&out.endo, &out.epi}) {
    for (auto& p : contour->points) {
      const double x = c * p.x - s * p.y + tx;
      const double y = s * p.x + c * p.y + ty;
      p.x = x;
      p.y = y;
    }
  }
  return out;
}

// 2. Strain and distance statistics are invariant under rigid motion of the
// whole scene: rotating and translating both mesh sequences together leaves
// every reported number unchanged to 1e-9 relative.
std::string rigid_invariance() {
  const auto geo = small_geometry();
  phantom::MotionModel motion;
  motion.n_frames = 6;
  motion.es_index = 2;
  const phantom::MotionEngine engine(geo, motion, {}, geom::View::FourChamber);
  const auto& layout = engine.layout();

  std::vector<geom::MyocardialMesh> ref;
  std::vector<geom::MyocardialMesh> est;
  for (int t = 0; t < motion.n_frames; ++t) {
    ref.push_back(engine.mesh_at(t));
    geom::MyocardialMesh noisy = ref.back();
    for (size_t i = 0; i < noisy.endo.points.size(); ++i) {
      noisy.endo.points[i].x += 0.25 * std::sin(0.8 * double(i) + 0.5 * t);
      noisy.endo.points[i].y += 0.25 * std::cos(0.6 * double(i) + 1.1 * t);
      noisy.epi.points[i].x += 0.25 * std::cos(0.9 * double(i) - 0.3 * t);
      noisy.epi.points[i].y += 0.25 * std::sin(0.7 * double(i) + 0.2 * t);
    }
    est.push_back(noisy);
  }

  const auto base_sls = strain::compute_sls(est, layout, motion.ed_index, motion.es_index);
  const auto base_gls = strain::compute_gls(est, motion.ed_index);
  const auto base_mde = eval::mean_distance_error(est, ref, layout);

  std::mt19937_64 gen(0x2d5160a1ull);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double theta = 2.0 * M_PI * unit_double(gen);
    const double tx = 100.0 * unit_double(gen) - 50.0;
    const double ty = 100.0 * unit_double(gen) - 50.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);

    std::vector<geom::MyocardialMesh> ref2;
    std::vector<geom::MyocardialMesh> est2;
    for (int t = 0; t < motion.n_frames; ++t) {
      ref2.push_back(rigid_transformed(ref[t], c, s, tx, ty));
      est2.push_back(rigid_transformed(est[t], c, s, tx, ty));
    }

    const auto sls2 = strain::compute_sls(est2, layout, motion.ed_index, motion.es_index);
    for (size_t seg = 0; seg < sls2.values.size(); ++seg) {
      for (size_t t = 0; t < sls2.values[seg].size(); ++t) {
        worst = std::max(worst, rel_dev(sls2.values[seg][t], base_sls.values[seg][t]));
      }
    }
    const auto gls2 = strain::compute_gls(est2, motion.ed_index);
    for (size_t t = 0; t < gls2.size(); ++t) {
      worst = std::max(worst, rel_dev(gls2[t], base_gls[t]));
    }
    const auto mde2 = eval::mean_distance_error(est2, ref2, layout);
    worst = std::max(worst, rel_dev(mde2.sequence_mean, base_mde.sequence_mean));
    worst = std::max(worst, rel_dev(mde2.sequence_sd, base_mde.sequence_sd));
    for (size_t t = 0; t < mde2.per_frame_mean.size(); ++t) {
      worst = std::max(worst, rel_dev(mde2.per_frame_mean[t], base_mde.per_frame_mean[t]));
    }
    for (size_t seg = 0; seg < mde2.per_segment_mean.size(); ++seg) {
      worst = std::max(worst, rel_dev(mde2.per_segment_mean[seg], base_mde.per_segment_mean[seg]));
    }
  }
  require(worst <= 1e-9, text("rigid transform moved a statistic by %.3g", worst));
  return text("worst change %.2e across 1000 transforms", worst);
}

// 3. A motionless phantom yields exactly zero ground-truth strain, and a
// sequence of identical frames yields sub-quarter-pixel flow, constant
// trajectories, and zero tracked strain.
std::string zero_motion_identity() {
  const auto geo = small_geometry();
  phantom::MotionModel motion;
  motion.n_frames = 4;
  motion.es_index = 2;
  motion.peak_longitudinal_shortening = 0.0;
  motion.peak_radial_thickening = 0.0;
  const phantom::MotionEngine engine(geo, motion, {}, geom::View::FourChamber);

  const auto gt = phantom::build_ground_truth(geo, motion, {}, geom::View::FourChamber);
  for (const auto& curve : gt.reference_sls.values) {
    for (double v : curve) require(v == 0.0, text("ground-truth SLS is %.3g, not 0", v));
  }
  for (double v : gt.reference_gls) require(v == 0.0, text("ground-truth GLS is %.3g, not 0", v));

  const GridSpec grid{64, 64, 0.5};
  const auto field = phantom::seed_scatterers(geo, grid, phantom::ScattererConfig{}, 7);
  const auto rendered = speckle::render_sequence(engine, field, 7, grid, speckle::PsfSpec{}, 1);
  const auto image = speckle::to_float(rendered[0]);

  const tracking::TrackerConfig tracker;
  double peak_px = 0.0;
  std::vector<tracking::DisplacementField> fields;
  for (int t = 0; t + 1 < motion.n_frames; ++t) {
    fields.push_back(tracking::estimate_flow(image, image, tracker, grid.pixel_pitch_mm, t, t + 1));
    for (size_t i = 0; i < fields.back().dx.size(); ++i) {
      peak_px = std::max({peak_px, std::fabs(double(fields.back().dx[i])),
                          std::fabs(double(fields.back().dy[i]))});
    }
  }
  require(peak_px < 0.25, text("identical frames produced %.3g px of flow", peak_px));

  const auto meshes = tracking::propagate_mesh_flow(engine.mesh_at(0), fields, motion.n_frames);
  const auto sls = strain::compute_sls(meshes, engine.layout(), motion.ed_index, motion.es_index);
  double worst_strain = 0.0;
  for (const auto& curve : sls.values) {
    for (double v : curve) worst_strain = std::max(worst_strain, std::fabs(v));
  }
  require(worst_strain <= 1e-9, text("tracked strain reached %.3g on still frames", worst_strain));

  const std::vector<FloatImage> stills(motion.n_frames, image);
  const auto traj =
      tracking::track_points(stills, grid.pixel_pitch_mm, engine.mesh_at(motion.es_index), tracker);
  double drift_mm = 0.0;
  for (int t = 0; t < traj.n_frames; ++t) {
    for (int p = 0; p < traj.n_points; ++p) {
      drift_mm = std::max({drift_mm,
                           std::fabs(traj.positions[t][p].x - traj.positions[traj.reference_frame][p].x),
                           std::fabs(traj.positions[t][p].y - traj.positions[traj.reference_frame][p].y)});
    }
  }
  require(drift_mm < 0.25 * grid.pixel_pitch_mm,
          text("trajectories drifted %.3g mm on still frames", drift_mm));
  return text("flow peak %.1e px, trajectory drift %.1e mm, strain 0", peak_px, drift_mm);
}

// 4. Composing the analytic per-frame displacement fields through the mesh
// propagator reproduces the analytic meshes to well under two pixels.
std::string ground_truth_propagation() {
  const phantom::GeometryConfig geo;
  const phantom::MotionModel motion;
  const phantom::MotionEngine engine(geo, motion, {}, geom::View::FourChamber);
  const GridSpec grid;
  std::vector<tracking::DisplacementField> fields;
  for (int t = 0; t + 1 < motion.n_frames; ++t) {
    fields.push_back(engine.sample_flow(t, t + 1, grid));
  }
  const auto est = tracking::propagate_mesh_flow(engine.mesh_at(0), fields, motion.n_frames);
  std::vector<geom::MyocardialMesh> truth;
  for (int t = 0; t < motion.n_frames; ++t) truth.push_back(engine.mesh_at(t));
  const auto report = eval::mean_distance_error(est, truth, engine.layout());
  const double limit = 2.0 * grid.pixel_pitch_mm;
  require(report.sequence_mean < limit,
          text("propagated meshes drifted %.4f mm (limit %.2f)", report.sequence_mean, limit));
  return text("mean distance %.5f mm over %d frames (limit %.2f)", report.sequence_mean,
              motion.n_frames, limit);
}

// 5. Tracking error grows monotonically as the coherent scatterer fraction
// drops, with at least a 20 percent rise from ratio 0.9 to ratio 0.5.
std::string decorrelation_trend() {
  eval::SweepConfig config;
  config.geometry = sweep_geometry(7.0);
  config.motion.n_frames = 32;
  config.motion.es_index = 12;
  config.grid = GridSpec{128, 128, 0.5};
  config.jobs = 1;
  const std::vector<double> ratios{0.9, 0.7, 0.6, 0.5};
  std::vector<uint64_t> seeds;
  for (uint64_t seed = 1; seed <= 10; ++seed) seeds.push_back(seed);
  const auto report = eval::decorrelation_sweep(config, ratios, seeds, tracking::TrackerConfig{});

  require(report.rows.size() == ratios.size(), "sweep returned the wrong number of rows");
  for (size_t i = 0; i < report.rows.size(); ++i) {
    require(report.rows[i].coherence_ratio == ratios[i], "sweep rows out of order");
    require(report.rows[i].n_seeds == seeds.size(), "sweep row missing seeds");
  }
  for (size_t i = 1; i < report.rows.size(); ++i) {
    require(report.rows[i].mean_error_mm >= report.rows[i - 1].mean_error_mm,
            text("error fell from %.4f to %.4f mm between ratios %.1f and %.1f",
                 report.rows[i - 1].mean_error_mm, report.rows[i].mean_error_mm,
                 ratios[i - 1], ratios[i]));
  }
  const double low = report.rows.front().mean_error_mm;
  const double high = report.rows.back().mean_error_mm;
  require(high >= 1.2 * low,
          text("ratio 0.5 error %.4f mm is under 1.2x the ratio 0.9 error %.4f mm", high, low));
  return text("means %.3f / %.3f / %.3f / %.3f mm, 0.5:0.9 ratio %.2f",
              report.rows[0].mean_error_mm, report.rows[1].mean_error_mm,
              report.rows[2].mean_error_mm, report.rows[3].mean_error_mm, high / low);
}

struct InfarctCase {
  phantom::GeometryConfig geometry = sweep_geometry(10.0);
  phantom::MotionModel motion;
  phantom::InfarctSpec infarct{"mid_septal", 0.5, 7.0, true};
  geom::View view = geom::View::FourChamber;

  InfarctCase() {
    motion.n_frames = 32;
    motion.es_index = 12;
    motion.peak_longitudinal_shortening = 0.25;
  }
};

struct InfarctOracle {
  std::vector<std::string> labels;
  std::vector<double> peak_sls;
  double compensation = 0.0;
};

// Chord-level reimplementation of the infarct kinematics: Gaussian scale
// profile along the end-diastolic midline arc, compensation chosen so the
// total shortening matches the healthy wall, peak strain read at full
// profile. Shares only the mesh generator and layout with the engine.
InfarctOracle infarct_oracle(const InfarctCase& spec) {
  const auto mesh = phantom::generate_ed_mesh(spec.geometry);
  const auto midline = geom::compute_midline(mesh);
  const auto layout = geom::build_segment_layout(midline, mesh.apex_index, spec.view);

  const size_t n = midline.points.size();
  std::vector<double> cum(n, 0.0);
  std::vector<double> len(n - 1, 0.0);
  for (size_t i = 0; i + 1 < n; ++i) {
    len[i] = std::hypot(midline.points[i + 1].x - midline.points[i].x,
                        midline.points[i + 1].y - midline.points[i].y);
    cum[i + 1] = cum[i] + len[i];
  }

  const auto& target = geom::segment_by_label(layout, spec.infarct.segment_label);
  const double center = 0.5 * (cum[target.start_index] + cum[target.end_index]);
  const double two_sigma_sq = 2.0 * spec.infarct.sigma_mm * spec.infarct.sigma_mm;
  std::vector<double> scale(len.size(), 1.0);
  double weighted = 0.0;
  for (size_t i = 0; i < len.size(); ++i) {
    const double mid = 0.5 * (cum[i] + cum[i + 1]);
    const double drop = spec.infarct.reduction_alpha *
                        std::exp(-(mid - center) * (mid - center) / two_sigma_sq);
    scale[i] = std::clamp(1.0 - drop, 0.0, 1.0);
    weighted += scale[i] * len[i];
  }

  InfarctOracle oracle;
  oracle.compensation = cum.back() / weighted;
  const double k = spec.motion.peak_longitudinal_shortening;
  for (const auto& segment : layout.segments) {
    double l_ed = 0.0;
    double l_es = 0.0;
    for (int i = segment.start_index; i < segment.end_index; ++i) {
      l_ed += len[i];
      l_es += len[i] * (1.0 - k * oracle.compensation * scale[i]);
    }
    oracle.labels.push_back(segment.label);
    oracle.peak_sls.push_back(100.0 * (l_es - l_ed) / l_ed);
  }
  return oracle;
}

// Values the oracle produced when this suite was frozen; a drift in either
// the mesh generator or the motion code shows up as a mismatch here.
constexpr double kFrozenCompensation = 1.0803636461028956;
constexpr std::pair<const char*, double> kFrozenPeaks[] = {
    {"basal_septal", -25.93191871127096},  {"mid_septal", -16.340059913975082},
    {"apical_septal", -25.864767782163298}, {"apical_lateral", -27.008925086449246},
    {"mid_lateral", -27.009091152566484},   {"basal_lateral", -27.009091152572406},
};

// 6. The infarcted segment is the unambiguous argmin of peak |SLS| in the
// ground truth, matches an independently computed oracle, and is recovered
// from tracked meshes in at least 8 of 10 seeds at coherence ratio 0.9.
std::string infarct_detectability() {
  const InfarctCase spec;
  const auto oracle = infarct_oracle(spec);

  require(std::fabs(oracle.compensation - kFrozenCompensation) <= 1e-9,
          text("oracle compensation drifted to %.12f", oracle.compensation));
  require(oracle.labels.size() == std::size(kFrozenPeaks), "oracle segment count changed");
  double worst_frozen = 0.0;
  for (size_t s = 0; s < oracle.labels.size(); ++s) {
    require(oracle.labels[s] == kFrozenPeaks[s].first, "oracle segment order changed");
    worst_frozen = std::max(worst_frozen, std::fabs(oracle.peak_sls[s] - kFrozenPeaks[s].second));
  }
  require(worst_frozen <= 1e-9, text("oracle peaks drifted by %.3g", worst_frozen));

  const auto gt =
      phantom::build_ground_truth(spec.geometry, spec.motion, {spec.infarct}, spec.view);
  const auto summary = strain::summarize(gt.reference_sls, gt.reference_gls);
  require(summary.segment_labels == oracle.labels, "ground-truth segment order changed");
  double worst_gt = 0.0;
  size_t gt_argmin = 0;
  for (size_t s = 0; s < summary.peak_systolic_sls.size(); ++s) {
    worst_gt = std::max(worst_gt, std::fabs(summary.peak_systolic_sls[s] - oracle.peak_sls[s]));
    if (std::fabs(summary.peak_systolic_sls[s]) <
        std::fabs(summary.peak_systolic_sls[gt_argmin])) {
      gt_argmin = s;
    }
  }
  require(worst_gt <= 1e-9, text("ground truth deviates from the oracle by %.3g", worst_gt));
  require(summary.segment_labels[gt_argmin] == spec.infarct.segment_label,
          text("ground-truth argmin is %s", summary.segment_labels[gt_argmin].c_str()));

  eval::SweepConfig config;
  config.geometry = spec.geometry;
  config.motion = spec.motion;
  config.infarcts = {spec.infarct};
  config.view = spec.view;
  config.grid = GridSpec{128, 128, 0.5};
  config.jobs = 1;
  tracking::TrackerConfig tracker;
  tracker.block_radius = 8;

  int hits = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const auto cell = eval::run_tracked_cell(config, tracker, 0.9, seed);
    size_t best = 0;
    for (size_t s = 1; s < cell.tracked_peak_sls.size(); ++s) {
      if (std::fabs(cell.tracked_peak_sls[s]) < std::fabs(cell.tracked_peak_sls[best])) best = s;
    }
    if (cell.segment_labels[best] == spec.infarct.segment_label) ++hits;
  }
  require(hits >= 8, text("infarct identified in only %d/10 seeds", hits));
  return text("oracle match %.1e, gt argmin %s, identified %d/10 seeds", worst_gt,
              spec.infarct.segment_label.c_str(), hits);
}

// 7. Compensation conserves the total midline length: with it enabled, the
// infarcted wall shortens globally exactly like the healthy wall each frame.
std::string compensation_conservation() {
  const InfarctCase spec;
  const phantom::MotionEngine infarcted(spec.geometry, spec.motion, {spec.infarct}, spec.view);
  const phantom::MotionEngine healthy(spec.geometry, spec.motion, {}, spec.view);
  double worst = 0.0;
  for (int t = 0; t < spec.motion.n_frames; ++t) {
    const double li = geom::total_arc_length(geom::compute_midline(infarcted.mesh_at(t)));
    const double lh = geom::total_arc_length(geom::compute_midline(healthy.mesh_at(t)));
    worst = std::max(worst, std::fabs(li - lh) / lh);
  }
  require(worst <= 1e-6, text("midline length mismatch %.3g relative", worst));
  return text("worst relative length mismatch %.2e over %d frames", worst, spec.motion.n_frames);
}

// 8. The Bland-Altman statistics agree with a direct reimplementation on
// random data and with the hand-computable two-pair case.
std::string bland_altman_oracle() {
  std::mt19937_64 gen(0x9e3779b9ull);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 1000; ++i) {
    const double manual = 40.0 * unit_double(gen) - 30.0;
    const double automatic = manual + 4.0 * unit_double(gen) - 2.0;
    pairs.emplace_back(manual, automatic);
  }
  const auto report = eval::bland_altman(pairs);
  require(report.n_pairs == pairs.size(), "pair count mismatch");

  double sum = 0.0;
  for (const auto& [manual, automatic] : pairs) sum += automatic - manual;
  const double bias = sum / double(pairs.size());
  double sq = 0.0;
  for (const auto& [manual, automatic] : pairs) {
    const double d = automatic - manual - bias;
    sq += d * d;
  }
  const double sd = std::sqrt(sq / double(pairs.size() - 1));
  double worst = std::fabs(report.bias - bias);
  worst = std::max(worst, std::fabs(report.sd_of_differences - sd));
  worst = std::max(worst, std::fabs(report.loa_low - (bias - 1.96 * sd)));
  worst = std::max(worst, std::fabs(report.loa_high - (bias + 1.96 * sd)));
  require(worst <= 1e-12, text("statistics deviate from brute force by %.3g", worst));

  const auto hand = eval::bland_altman({{0.0, 1.0}, {0.0, -1.0}});
  const double root2 = std::sqrt(2.0);
  require(std::fabs(hand.bias) <= 1e-12, "hand-case bias is not 0");
  require(std::fabs(hand.sd_of_differences - root2) <= 1e-12, "hand-case sd is not sqrt(2)");
  require(std::fabs(hand.loa_low + 1.96 * root2) <= 1e-12, "hand-case lower limit is wrong");
  require(std::fabs(hand.loa_high - 1.96 * root2) <= 1e-12, "hand-case upper limit is wrong");
  return text("brute-force deviation %.2e on 1000 pairs, hand case exact", worst);
}

// 9. Flow, trajectory, mesh, and strain files written to disk parse back and
// re-serialize to byte-identical files.
std::string format_round_trips() {
  const auto geo = small_geometry();
  phantom::MotionModel motion;
  motion.n_frames = 4;
  motion.es_index = 2;
  const phantom::MotionEngine engine(geo, motion, {}, geom::View::FourChamber);
  const auto gt = phantom::build_ground_truth(geo, motion, {}, geom::View::FourChamber);
  const GridSpec grid{48, 48, 0.5};

  const auto dir = std::filesystem::temp_directory_path() / "echostrain_acceptance";
  std::filesystem::create_directories(dir);
  int checked = 0;
  const auto round_trip = [&](const std::string& name, const std::string& bytes,
                              const std::string& reparsed) {
    const auto first = (dir / (name + ".a")).string();
    const auto second = (dir / (name + ".b")).string();
    io::write_file_atomic(first, bytes);
    io::write_file_atomic(second, reparsed);
    require(io::read_file(first) == io::read_file(second),
            text("%s did not round-trip byte-identically", name.c_str()));
    ++checked;
  };

  const std::vector<tracking::DisplacementField> fields{engine.sample_flow(0, 1, grid),
                                                        engine.sample_flow(1, 2, grid)};
  const auto flow_bytes = io::flow_sequence_to_bytes(fields);
  round_trip("flow", flow_bytes,
             io::flow_sequence_to_bytes(io::flow_sequence_from_bytes(flow_bytes)));

  const auto traj_bytes = io::trajectories_to_bytes(gt.trajectories);
  round_trip("trajectories", traj_bytes,
             io::trajectories_to_bytes(io::trajectories_from_bytes(traj_bytes)));

  const auto mesh_bytes = io::mesh_to_json(gt.meshes[1]);
  round_trip("mesh", mesh_bytes, io::mesh_to_json(io::mesh_from_json(mesh_bytes)));

  const auto curve_bytes = io::strain_curve_to_csv(gt.reference_sls);
  round_trip("strain_curve", curve_bytes,
             io::strain_curve_to_csv(io::strain_curve_from_csv(
                 curve_bytes, gt.reference_sls.ed_index, gt.reference_sls.es_index)));

  const auto summary = strain::summarize(gt.reference_sls, gt.reference_gls);
  const auto summary_bytes = io::strain_summary_to_json(summary);
  round_trip("strain_summary", summary_bytes,
             io::strain_summary_to_json(io::strain_summary_from_json(summary_bytes)));

  std::filesystem::remove_all(dir);
  return text("%d formats byte-stable through write, read, write", checked);
}

// 10. GLS equals the ED-length-weighted mean of the segment strains on
// randomly perturbed mesh sequences, because the segments tile the midline.
std::string gls_consistency() {
  const auto geo = small_geometry();
  phantom::MotionModel motion;
  motion.n_frames = 6;
  motion.es_index = 2;
  const phantom::MotionEngine engine(geo, motion, {}, geom::View::FourChamber);

  std::mt19937_64 gen(0x51a3c2f7ull);
  double worst = 0.0;
  for (int sequence = 0; sequence < 100; ++sequence) {
    std::vector<geom::MyocardialMesh> meshes;
    for (int t = 0; t < motion.n_frames; ++t) {
      geom::MyocardialMesh mesh = engine.mesh_at(t);
      for (auto* contour : {&mesh.endo, &mesh.epi}) {
        for (auto& p : contour->points) {
          p.x += 0.3 * (2.0 * unit_double(gen) - 1.0);
          p.y += 0.3 * (2.0 * unit_double(gen) - 1.0);
        }
      }
      meshes.push_back(mesh);
    }
    const auto midline = geom::compute_midline(meshes[0]);
    const auto layout =
        geom::build_segment_layout(midline, meshes[0].apex_index, geom::View::FourChamber);
    const auto sls = strain::compute_sls(meshes, layout, motion.ed_index, motion.es_index);
    const auto gls = strain::compute_gls(meshes, motion.ed_index);

    const double total = geom::total_arc_length(midline);
    std::vector<double> weights;
    for (const auto& segment : layout.segments) {
      weights.push_back(geom::arc_length(midline, segment.start_index, segment.end_index) / total);
    }
    for (int t = 0; t < motion.n_frames; ++t) {
      double mixed = 0.0;
      for (size_t s = 0; s < weights.size(); ++s) mixed += weights[s] * sls.values[s][t];
      worst = std::max(worst, rel_dev(mixed, gls[t]));
    }
  }
  require(worst <= 1e-9, text("GLS deviates from the weighted SLS mean by %.3g", worst));
  return text("worst deviation %.2e across 100 sequences", worst);
}

struct Criterion {
  const char* name;
  std::string (*run)();
};

constexpr Criterion kCriteria[] = {
    {"strain exactness", strain_exactness},
    {"rigid invariance", rigid_invariance},
    {"zero-motion identity", zero_motion_identity},
    {"ground-truth propagation", ground_truth_propagation},
    {"decorrelation trend", decorrelation_trend},
    {"infarct detectability", infarct_detectability},
    {"compensation conservation", compensation_conservation},
    {"Bland-Altman oracle", bland_altman_oracle},
    {"format round-trips", format_round_trips},
    {"GLS consistency", gls_consistency},
};

}  // namespace

int main() {
  const int total = static_cast<int>(std::size(kCriteria));
  int passed = 0;
  for (int i = 0; i < total; ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string verdict = "PASS";
    std::string detail;
    try {
      detail = kCriteria[i].run();
      ++passed;
    } catch (const std::exception& error) {
      verdict = "FAIL";
      detail = error.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d (%s): %s (%s) [%.2f s]\n", i + 1, kCriteria[i].name,
                verdict.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("acceptance: %d/%d criteria passed\n", passed, total);
  return passed == total ? 0 : 1;
}

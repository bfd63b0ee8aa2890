#include "echostrain/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>

#include "echostrain/errors.hpp"
#include "echostrain/strain.hpp"

namespace echostrain::eval {

namespace {

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  return sum / static_cast<double>(values.size());
}

// n-1 denominator; 0 for fewer than two samples.
double sample_sd(const std::vector<double>& values, double mean) {
  if (values.size() < 2) {
    return 0.0;
  }
  double sum_sq = 0.0;
  for (double v : values) {
    const double d = v - mean;
    sum_sq += d * d;
  }
  return std::sqrt(sum_sq / static_cast<double>(values.size() - 1));
}

void check_mesh_shapes(const geom::MyocardialMesh& est, const geom::MyocardialMesh& ref,
                       size_t n_points, size_t frame) {
  const std::string where = "frame " + std::to_string(frame);
  if (est.endo.points.size() != est.epi.points.size()) {
    throw StructuralError("estimated mesh at " + where + " has unpaired contours");
  }
  if (ref.endo.points.size() != ref.epi.points.size()) {
    throw StructuralError("reference mesh at " + where + " has unpaired contours");
  }
  if (est.endo.points.size() != n_points || ref.endo.points.size() != n_points) {
    throw StructuralError("vertex count changes at " + where);
  }
}

double vertex_distance(const geom::Point2D& a, const geom::Point2D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

DistanceErrorReport mean_distance_error(const std::vector<geom::MyocardialMesh>& est,
                                        const std::vector<geom::MyocardialMesh>& ref,
                                        const geom::SegmentLayout& layout) {
  if (est.size() != ref.size()) {
    throw StructuralError("estimated and reference sequences have different frame counts");
  }
  if (est.empty()) {
    throw InsufficientDataError("no frames to compare");
  }
  const size_t n_points = ref.front().endo.points.size();
  geom::validate_layout(layout, static_cast<int>(n_points));

  DistanceErrorReport report;
  report.per_frame_mean.reserve(est.size());
  for (const geom::Segment& seg : layout.segments) {
    report.segment_labels.push_back(seg.label);
  }
  std::vector<double> segment_sum(layout.segments.size(), 0.0);

  for (size_t f = 0; f < est.size(); ++f) {
    check_mesh_shapes(est[f], ref[f], n_points, f);
    double frame_sum = 0.0;
    for (size_t i = 0; i < n_points; ++i) {
      frame_sum += vertex_distance(est[f].endo.points[i], ref[f].endo.points[i]);
      frame_sum += vertex_distance(est[f].epi.points[i], ref[f].epi.points[i]);
    }
    report.per_frame_mean.push_back(frame_sum / static_cast<double>(2 * n_points));

    for (size_t s = 0; s < layout.segments.size(); ++s) {
      const geom::Segment& seg = layout.segments[s];
      for (int i = seg.start_index; i <= seg.end_index; ++i) {
        const size_t k = static_cast<size_t>(i);
        segment_sum[s] += vertex_distance(est[f].endo.points[k], ref[f].endo.points[k]);
        segment_sum[s] += vertex_distance(est[f].epi.points[k], ref[f].epi.points[k]);
      }
    }
  }

  report.sequence_mean = mean_of(report.per_frame_mean);
  report.sequence_sd = sample_sd(report.per_frame_mean, report.sequence_mean);
  report.per_segment_mean.resize(layout.segments.size());
  for (size_t s = 0; s < layout.segments.size(); ++s) {
    const geom::Segment& seg = layout.segments[s];
    const size_t span = static_cast<size_t>(seg.end_index - seg.start_index + 1);
    report.per_segment_mean[s] = segment_sum[s] / static_cast<double>(2 * span * est.size());
  }
  return report;
}

DistanceErrorReport mean_distance_error(const std::vector<geom::MyocardialMesh>& est,
                                        const std::vector<geom::MyocardialMesh>& ref) {
  if (est.size() != ref.size()) {
    throw StructuralError("estimated and reference sequences have different frame counts");
  }
  if (est.empty()) {
    throw InsufficientDataError("no frames to compare");
  }
  const geom::SegmentLayout layout = geom::build_segment_layout(
      geom::compute_midline(ref.front()), ref.front().apex_index, geom::View::FourChamber);
  return mean_distance_error(est, ref, layout);
}

AgreementReport bland_altman(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) {
    throw InsufficientDataError("Bland-Altman needs at least two pairs");
  }
  std::vector<double> diffs;
  diffs.reserve(pairs.size());
  for (const auto& [manual, automatic] : pairs) {
    if (!std::isfinite(manual) || !std::isfinite(automatic)) {
      throw ValidationError("Bland-Altman pairs must be finite");
    }
    diffs.push_back(automatic - manual);
  }
  AgreementReport report;
  report.n_pairs = pairs.size();
  report.bias = mean_of(diffs);
  report.sd_of_differences = sample_sd(diffs, report.bias);
  report.loa_low = report.bias - 1.96 * report.sd_of_differences;
  report.loa_high = report.bias + 1.96 * report.sd_of_differences;
  return report;
}

bool infarcted_by_reference(double reference_peak_sls_percent) {
  return std::abs(reference_peak_sls_percent) < 5.0;
}

SweepCell run_tracked_cell(const SweepConfig& config, const tracking::TrackerConfig& tracker,
                           double coherence_ratio, uint64_t seed) {
  tracking::validate_tracker_config(tracker);
  if (!(coherence_ratio >= 0.0 && coherence_ratio <= 1.0)) {
    throw ValidationError("coherence ratio must lie in [0, 1]");
  }
  const phantom::MotionEngine engine(config.geometry, config.motion, config.infarcts, config.view);

  phantom::ScattererConfig scatterers = config.scatterers;
  scatterers.coherence_ratio = coherence_ratio;
  const phantom::ScattererField ed_field =
      phantom::seed_scatterers(config.geometry, config.grid, scatterers, seed);
  const std::vector<speckle::BModeFrame> rendered =
      speckle::render_sequence(engine, ed_field, seed, config.grid, config.psf, 1);

  std::vector<FloatImage> frames;
  frames.reserve(rendered.size());
  for (const speckle::BModeFrame& frame : rendered) {
    frames.push_back(speckle::to_float(frame));
  }

  const int n_frames = config.motion.n_frames;
  const int ref = config.motion.ed_index;
  const double pitch = config.grid.pixel_pitch_mm;
  std::vector<tracking::DisplacementField> fields;
  fields.reserve(static_cast<size_t>(n_frames > 0 ? n_frames - 1 : 0));
  for (int t = ref + 1; t < n_frames; ++t) {
    fields.push_back(tracking::estimate_flow(frames[static_cast<size_t>(t - 1)],
                                             frames[static_cast<size_t>(t)], tracker, pitch, t - 1,
                                             t));
  }
  for (int t = ref - 1; t >= 0; --t) {
    fields.push_back(tracking::estimate_flow(frames[static_cast<size_t>(t + 1)],
                                             frames[static_cast<size_t>(t)], tracker, pitch, t + 1,
                                             t));
  }

  const std::vector<geom::MyocardialMesh> tracked =
      tracking::propagate_mesh_flow(engine.mesh_at(ref), fields, n_frames);
  std::vector<geom::MyocardialMesh> truth;
  truth.reserve(static_cast<size_t>(n_frames));
  for (int t = 0; t < n_frames; ++t) {
    truth.push_back(engine.mesh_at(t));
  }

  const geom::SegmentLayout& layout = engine.layout();
  const DistanceErrorReport distance = mean_distance_error(tracked, truth, layout);

  const int ed = config.motion.ed_index;
  const int es = config.motion.es_index;
  const strain::StrainCurve ref_sls = strain::compute_sls(truth, layout, ed, es);
  const strain::StrainCurve trk_sls = strain::compute_sls(tracked, layout, ed, es);
  const strain::StrainSummary ref_summary =
      strain::summarize(ref_sls, strain::compute_gls(truth, ed));
  const strain::StrainSummary trk_summary =
      strain::summarize(trk_sls, strain::compute_gls(tracked, ed));

  SweepCell cell;
  cell.coherence_ratio = coherence_ratio;
  cell.seed = seed;
  cell.sequence_mean_error_mm = distance.sequence_mean;
  cell.sequence_sd_error_mm = distance.sequence_sd;
  cell.segment_labels = ref_summary.segment_labels;
  cell.reference_peak_sls = ref_summary.peak_systolic_sls;
  cell.tracked_peak_sls = trk_summary.peak_systolic_sls;
  cell.reference_peak_gls = ref_summary.peak_gls;
  cell.tracked_peak_gls = trk_summary.peak_gls;
  return cell;
}

SweepReport decorrelation_sweep(const SweepConfig& config, const std::vector<double>& ratios,
                                const std::vector<uint64_t>& seeds,
                                const tracking::TrackerConfig& tracker) {
  if (ratios.empty()) {
    throw ValidationError("sweep needs at least one coherence ratio");
  }
  if (seeds.empty()) {
    throw ValidationError("sweep needs at least one seed");
  }
  for (double ratio : ratios) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
      throw ValidationError("coherence ratio must lie in [0, 1]");
    }
  }
  if (config.jobs < 1) {
    throw ValidationError("jobs must be at least 1");
  }
  tracking::validate_tracker_config(tracker);

  const size_t n_cells = ratios.size() * seeds.size();
  SweepReport report;
  report.cells.resize(n_cells);

  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (;;) {
      const size_t cell = next.fetch_add(1);
      if (cell >= n_cells) {
        return;
      }
      const double ratio = ratios[cell / seeds.size()];
      const uint64_t seed = seeds[cell % seeds.size()];
      try {
        report.cells[cell] = run_tracked_cell(config, tracker, ratio, seed);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  };

  if (config.jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const size_t n_threads = std::min(static_cast<size_t>(config.jobs), n_cells);
    pool.reserve(n_threads);
    for (size_t i = 0; i < n_threads; ++i) {
      pool.emplace_back(worker);
    }
    for (std::thread& th : pool) {
      th.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }

  report.rows.reserve(ratios.size());
  for (size_t r = 0; r < ratios.size(); ++r) {
    SweepRow row;
    row.coherence_ratio = ratios[r];
    row.n_seeds = seeds.size();
    std::vector<double> errors;
    std::vector<std::pair<double, double>> sls_pairs;
    for (size_t s = 0; s < seeds.size(); ++s) {
      const SweepCell& cell = report.cells[r * seeds.size() + s];
      errors.push_back(cell.sequence_mean_error_mm);
      for (size_t k = 0; k < cell.reference_peak_sls.size(); ++k) {
        sls_pairs.emplace_back(cell.reference_peak_sls[k], cell.tracked_peak_sls[k]);
      }
    }
    row.mean_error_mm = mean_of(errors);
    row.sd_error_mm = sample_sd(errors, row.mean_error_mm);
    row.sls_agreement = bland_altman(sls_pairs);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace echostrain::eval

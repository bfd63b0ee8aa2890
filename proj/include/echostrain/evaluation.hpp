#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "echostrain/geometry.hpp"
#include "echostrain/image.hpp"
#include "echostrain/phantom.hpp"
#include "echostrain/speckle.hpp"
#include "echostrain/tracking.hpp"

namespace echostrain::eval {

// Vertex-wise Euclidean distances between paired meshes, in millimeters.
// sequence_mean is the mean of the per-frame means; sequence_sd uses the
// n-1 denominator over frames and is 0 for a single frame.
struct DistanceErrorReport {
  std::vector<double> per_frame_mean;
  double sequence_mean = 0.0;
  double sequence_sd = 0.0;
  std::vector<std::string> segment_labels;
  std::vector<double> per_segment_mean;
};

// Bland-Altman agreement. Differences are automatic - manual; the SD uses
// the n-1 denominator; limits of agreement are bias +/- 1.96 sd.
struct AgreementReport {
  double bias = 0.0;
  double sd_of_differences = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  size_t n_pairs = 0;
};

// Compares paired est/ref vertices frame by frame over both contours.
// per_segment_mean aggregates the midline-index spans of the layout, both
// walls included, boundary vertices counted in each adjacent segment.
DistanceErrorReport mean_distance_error(const std::vector<geom::MyocardialMesh>& est,
                                        const std::vector<geom::MyocardialMesh>& ref,
                                        const geom::SegmentLayout& layout);

// Same, with the layout built from the first reference mesh using
// four-chamber wall names.
DistanceErrorReport mean_distance_error(const std::vector<geom::MyocardialMesh>& est,
                                        const std::vector<geom::MyocardialMesh>& ref);

// pairs are (manual, automatic) readings of the same quantity.
AgreementReport bland_altman(const std::vector<std::pair<double, double>>& pairs);

// Subgroup rule for reports: a segment counts as infarcted when its
// reference peak |SLS| stays under 5 percent.
bool infarcted_by_reference(double reference_peak_sls_percent);

// Phantom, rendering, and grid settings shared by every sweep cell. The
// scatterer coherence ratio is overridden per cell.
struct SweepConfig {
  phantom::GeometryConfig geometry;
  phantom::MotionModel motion;
  std::vector<phantom::InfarctSpec> infarcts;
  geom::View view = geom::View::FourChamber;
  GridSpec grid;
  phantom::ScattererConfig scatterers;
  speckle::PsfSpec psf;
  int jobs = 1;
};

// One (coherence ratio, seed) cell: a phantom rendered at that ratio,
// tracked end to end, compared against its analytic ground truth.
struct SweepCell {
  double coherence_ratio = 0.0;
  uint64_t seed = 0;
  double sequence_mean_error_mm = 0.0;
  double sequence_sd_error_mm = 0.0;
  std::vector<std::string> segment_labels;
  std::vector<double> reference_peak_sls;
  std::vector<double> tracked_peak_sls;
  double reference_peak_gls = 0.0;
  double tracked_peak_gls = 0.0;
};

// Seed-aggregated statistics for one coherence ratio. sls_agreement pools
// the (reference, tracked) peak SLS pairs of every cell at the ratio.
struct SweepRow {
  double coherence_ratio = 0.0;
  size_t n_seeds = 0;
  double mean_error_mm = 0.0;
  double sd_error_mm = 0.0;
  AgreementReport sls_agreement;
};

struct SweepReport {
  std::vector<SweepCell> cells;  // ratio-major, seeds in the given order
  std::vector<SweepRow> rows;
};

// Renders the phantom at the given coherence ratio, estimates flow between
// adjacent frames, propagates the ED mesh through the estimated fields, and
// scores the result against the analytic meshes and strain.
SweepCell run_tracked_cell(const SweepConfig& config, const tracking::TrackerConfig& tracker,
                           double coherence_ratio, uint64_t seed);

// Runs every (ratio, seed) cell, in parallel when config.jobs > 1. Cells
// are independent and deterministic, so the report does not depend on the
// job count.
SweepReport decorrelation_sweep(const SweepConfig& config, const std::vector<double>& ratios,
                                const std::vector<uint64_t>& seeds,
                                const tracking::TrackerConfig& tracker);

}  // namespace echostrain::eval

#include "echostrain/strain.hpp"

#include <cmath>
#include <cstdlib>

#include "echostrain/errors.hpp"

namespace echostrain::strain {
namespace {

void validate_sequence(const std::vector<geom::MyocardialMesh>& meshes, int ed_index) {
  if (meshes.empty()) {
    throw SequenceError("mesh sequence is empty");
  }
  const size_t n_points = meshes.front().endo.points.size();
  for (const auto& mesh : meshes) {
    geom::validate_mesh(mesh);
    if (mesh.endo.points.size() != n_points) {
      throw StructuralError("mesh sequence mixes vertex counts");
    }
  }
  const int n_frames = static_cast<int>(meshes.size());
  if (ed_index < 0 || ed_index >= n_frames) {
    throw BoundsError("ed_index " + std::to_string(ed_index) + " outside sequence of " +
                      std::to_string(n_frames) + " frames");
  }
}

double percent_change(double length, double ed_length, const std::string& what) {
  if (ed_length == 0.0) {
    throw GeometryError(what + " has zero length at ED");
  }
  return 100.0 * (length - ed_length) / ed_length;
}

}  // namespace

StrainCurve compute_sls(const std::vector<geom::MyocardialMesh>& meshes,
                        const geom::SegmentLayout& layout, int ed_index, int es_index) {
  validate_sequence(meshes, ed_index);
  if (es_index <= ed_index || es_index >= static_cast<int>(meshes.size())) {
    throw BoundsError("es_index " + std::to_string(es_index) +
                      " must lie after ed_index and inside the sequence");
  }
  geom::validate_layout(layout, static_cast<int>(meshes.front().endo.points.size()));

  const int n_frames = static_cast<int>(meshes.size());
  std::vector<geom::Contour> midlines;
  midlines.reserve(static_cast<size_t>(n_frames));
  for (const auto& mesh : meshes) {
    midlines.push_back(geom::compute_midline(mesh));
  }

  StrainCurve curve;
  curve.ed_index = ed_index;
  curve.es_index = es_index;
  for (const geom::Segment& seg : layout.segments) {
    const double ed_length =
        geom::arc_length(midlines[static_cast<size_t>(ed_index)], seg.start_index, seg.end_index);
    std::vector<double> row(static_cast<size_t>(n_frames), 0.0);
    for (int t = 0; t < n_frames; ++t) {
      const double length =
          geom::arc_length(midlines[static_cast<size_t>(t)], seg.start_index, seg.end_index);
      row[static_cast<size_t>(t)] = percent_change(length, ed_length, "segment " + seg.label);
    }
    curve.segment_labels.push_back(seg.label);
    curve.values.push_back(std::move(row));
  }
  return curve;
}

std::vector<double> compute_gls(const std::vector<geom::MyocardialMesh>& meshes, int ed_index) {
  validate_sequence(meshes, ed_index);
  std::vector<double> gls(meshes.size(), 0.0);
  const double ed_length =
      geom::total_arc_length(geom::compute_midline(meshes[static_cast<size_t>(ed_index)]));
  for (size_t t = 0; t < meshes.size(); ++t) {
    const double length = geom::total_arc_length(geom::compute_midline(meshes[t]));
    gls[t] = percent_change(length, ed_length, "midline");
  }
  return gls;
}

std::vector<double> segment_average_gls(const StrainCurve& curve) {
  if (curve.values.empty()) {
    throw SequenceError("strain curve has no segments");
  }
  const size_t n_frames = curve.values.front().size();
  std::vector<double> gls(n_frames, 0.0);
  for (const auto& row : curve.values) {
    for (size_t t = 0; t < n_frames; ++t) {
      gls[t] += row[t];
    }
  }
  for (double& v : gls) {
    v /= static_cast<double>(curve.values.size());
  }
  return gls;
}

StrainSummary summarize(const StrainCurve& curve, const std::vector<double>& gls_curve) {
  if (curve.values.empty()) {
    throw SequenceError("strain curve has no segments");
  }
  const int n_frames = static_cast<int>(curve.values.front().size());
  if (curve.ed_index < 0 || curve.es_index >= n_frames || curve.ed_index >= curve.es_index) {
    throw BoundsError("strain curve has an invalid systolic interval");
  }
  if (static_cast<int>(gls_curve.size()) != n_frames) {
    throw StructuralError("GLS curve length does not match the segment curves");
  }

  const auto systolic_peak = [&](const std::vector<double>& row) {
    double peak = 0.0;
    for (int t = curve.ed_index; t <= curve.es_index; ++t) {
      const double v = row[static_cast<size_t>(t)];
      if (std::abs(v) > std::abs(peak)) {
        peak = v;
      }
    }
    return peak;
  };

  StrainSummary summary;
  summary.segment_labels = curve.segment_labels;
  for (const auto& row : curve.values) {
    if (row.size() != static_cast<size_t>(n_frames)) {
      throw StructuralError("ragged strain curve");
    }
    summary.peak_systolic_sls.push_back(systolic_peak(row));
  }
  summary.gls_curve = gls_curve;
  summary.peak_gls = systolic_peak(gls_curve);
  return summary;
}

StrainCurve moving_average(const StrainCurve& curve, int window) {
  if (window < 1 || window % 2 == 0) {
    throw ValidationError("moving-average window must be a positive odd number");
  }
  if (window == 1) {
    return curve;
  }
  StrainCurve out = curve;
  const int n = curve.values.empty() ? 0 : static_cast<int>(curve.values.front().size());
  const int half = window / 2;
  for (size_t s = 0; s < curve.values.size(); ++s) {
    for (int t = 0; t < n; ++t) {
      double sum = 0.0;
      int count = 0;
      for (int k = t - half; k <= t + half; ++k) {
        if (k >= 0 && k < n) {
          sum += curve.values[s][static_cast<size_t>(k)];
          ++count;
        }
      }
      out.values[s][static_cast<size_t>(t)] = sum / count;
    }
    // Smoothing shifts the ED sample; re-anchor so SLS(ED) stays exactly 0.
    const double ed_offset = out.values[s][static_cast<size_t>(curve.ed_index)];
    for (double& v : out.values[s]) {
      v -= ed_offset;
    }
    out.values[s][static_cast<size_t>(curve.ed_index)] = 0.0;
  }
  return out;
}

}  // namespace echostrain::strain

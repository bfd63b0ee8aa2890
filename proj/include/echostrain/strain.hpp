#pragma once

#include <string>
#include <vector>

#include "echostrain/geometry.hpp"

namespace echostrain::strain {

// Segmental longitudinal strain in percent of the ED segment length,
// values[segment][frame]. values[s][ed_index] is exactly 0.
struct StrainCurve {
  std::vector<std::string> segment_labels;
  std::vector<std::vector<double>> values;
  int ed_index = 0;
  int es_index = 0;
};

struct StrainSummary {
  std::vector<std::string> segment_labels;
  std::vector<double> peak_systolic_sls;  // signed, max |value| on [ed, es]
  std::vector<double> gls_curve;
  double peak_gls = 0.0;
};

// SLS_s(t) = 100 * (L_s(t) - L_s(ED)) / L_s(ED), with L_s the arc length of
// segment s on the endo/epi midline.
StrainCurve compute_sls(const std::vector<geom::MyocardialMesh>& meshes,
                        const geom::SegmentLayout& layout, int ed_index, int es_index);

// GLS(t) = 100 * (L(t) - L(ED)) / L(ED) over the whole midline. With this
// length-based definition GLS is the ED-length-weighted mean of the segment
// strains.
std::vector<double> compute_gls(const std::vector<geom::MyocardialMesh>& meshes, int ed_index);

// Unweighted mean of the segment curves. Kept only for comparing the two
// plausible readings of "strain averaged across the whole myocardium"; all
// shipped outputs use compute_gls.
std::vector<double> segment_average_gls(const StrainCurve& curve);

StrainSummary summarize(const StrainCurve& curve, const std::vector<double>& gls_curve);

// Centered moving average with odd window, re-anchored so SLS(ED) stays 0.
// window == 1 is the identity.
StrainCurve moving_average(const StrainCurve& curve, int window);

}  // namespace echostrain::strain

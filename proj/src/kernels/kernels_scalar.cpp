#include <cmath>

#include "echostrain/kernels/kernels.hpp"
#include "kernels_detail.h"

// Reference kernels. This translation unit is compiled with
// -ffp-contract=off so the emitted arithmetic is exactly the written
// sequence of IEEE operations regardless of optimization level.

namespace echostrain::kernels {
namespace {

void psf_row_scalar(float* re, float* im, int n, float x0, float dx, float xs,
                    float inv_two_sigma_sq, float cr, float ci) {
  const float base = x0 - xs;
  const float neg_inv = -inv_two_sigma_sq;
  for (int j = 0; j < n; ++j) {
    const float w = detail::gauss_weight(base, dx, static_cast<float>(j), neg_inv);
    re[j] = std::fmaf(cr, w, re[j]);
    im[j] = std::fmaf(ci, w, im[j]);
  }
}

void match_moments_scalar(const float* a, const float* b, int n, double* sab, double* sb,
                          double* sbb) {
  double ab = 0.0;
  double s = 0.0;
  double bb = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ai = a[i];
    const double bi = b[i];
    ab += ai * bi;
    s += bi;
    bb += bi * bi;
  }
  *sab += ab;
  *sb += s;
  *sbb += bb;
}

void envelope_scalar(const float* re, const float* im, float* out, int n) {
  for (int i = 0; i < n; ++i) {
    out[i] = detail::envelope_one(re[i], im[i]);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{psf_row_scalar, match_moments_scalar, envelope_scalar, "scalar"};
  return table;
}

}  // namespace echostrain::kernels

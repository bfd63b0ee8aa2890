#pragma once

#include <string>
#include <string_view>

namespace echostrain::kernels {

// Hot inner loops of the renderer and the block matcher, provided as scalar
// reference kernels plus SIMD variants selected at runtime. The scalar and
// SIMD paths of psf_row and envelope_mag are written to be bit-identical
// (same fused-multiply-add sequences per element, no cross-lane reduction);
// match_moments reassociates its accumulation and is equivalence-tested to a
// tight tolerance instead.

// Accumulate one scatterer's lateral Gaussian profile, weighted by a fixed
// complex phasor (cr, ci), into one image row:
//   d    = (x0 - xs) + j*dx
//   w    = exp(-(d*d) * inv_two_sigma_sq)
//   re[j] += cr*w,  im[j] += ci*w        for j in [0, n)
using PsfRowFn = void (*)(float* re, float* im, int n, float x0, float dx, float xs,
                          float inv_two_sigma_sq, float cr, float ci);

// Matched-filter moments over a row pair, added into double accumulators:
//   *sab += sum a[i]*b[i],  *sb += sum b[i],  *sbb += sum b[i]*b[i]
using MatchMomentsFn = void (*)(const float* a, const float* b, int n, double* sab, double* sb,
                                double* sbb);

// out[i] = sqrt(re[i]^2 + im[i]^2)
using EnvelopeFn = void (*)(const float* re, const float* im, float* out, int n);

struct KernelTable {
  PsfRowFn psf_row;
  MatchMomentsFn match_moments;
  EnvelopeFn envelope_mag;
  const char* name;
};

const KernelTable& scalar_table();

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
bool avx2_supported();
const KernelTable& avx2_table();  // only valid to use when avx2_supported()
#endif

// Process-wide selection. "auto" picks the best supported variant, "scalar"
// forces the reference kernels (used by deterministic mode). The
// ECHOSTRAIN_KERNELS environment variable, when set, overrides "auto".
void select(std::string_view mode);
const KernelTable& active();
std::string active_name();

}  // namespace echostrain::kernels

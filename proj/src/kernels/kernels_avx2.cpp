#include "echostrain/kernels/kernels.hpp"

#if defined(ECHOSTRAIN_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

#include "kernels_detail.h"

// AVX2 + FMA kernels. psf_row and envelope_mag mirror the scalar reference
// operation for operation (see kernels_detail.h), so their outputs are
// bit-equal to it. match_moments keeps four partial sums per accumulator and
// therefore differs from the sequential reference only by reassociation of
// double additions.

namespace echostrain::kernels {
namespace {

inline __m256 exp256_ps(__m256 x) {
  const __m256 hi = _mm256_set1_ps(detail::kExpHi);
  const __m256 lo = _mm256_set1_ps(detail::kExpLo);
  const __m256 log2e = _mm256_set1_ps(detail::kLog2e);
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 neg_ln2_hi = _mm256_set1_ps(detail::kNegLn2Hi);
  const __m256 neg_ln2_lo = _mm256_set1_ps(detail::kNegLn2Lo);
  const __m256 one = _mm256_set1_ps(1.0f);

  x = _mm256_min_ps(x, hi);
  x = _mm256_max_ps(x, lo);

  const __m256 z = _mm256_floor_ps(_mm256_fmadd_ps(x, log2e, half));
  __m256 r = _mm256_fmadd_ps(z, neg_ln2_hi, x);
  r = _mm256_fmadd_ps(z, neg_ln2_lo, r);

  const __m256 rr = _mm256_mul_ps(r, r);
  __m256 p = _mm256_set1_ps(detail::kExpP0);
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(detail::kExpP1));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(detail::kExpP2));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(detail::kExpP3));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(detail::kExpP4));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(detail::kExpP5));
  p = _mm256_fmadd_ps(p, rr, r);
  p = _mm256_add_ps(p, one);

  __m256i n = _mm256_cvttps_epi32(z);
  n = _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(127)), 23);
  return _mm256_mul_ps(p, _mm256_castsi256_ps(n));
}

void psf_row_avx2(float* re, float* im, int n, float x0, float dx, float xs,
                  float inv_two_sigma_sq, float cr, float ci) {
  const float base = x0 - xs;
  const float neg_inv = -inv_two_sigma_sq;
  const __m256 vdx = _mm256_set1_ps(dx);
  const __m256 vbase = _mm256_set1_ps(base);
  const __m256 vneg = _mm256_set1_ps(neg_inv);
  const __m256 vcr = _mm256_set1_ps(cr);
  const __m256 vci = _mm256_set1_ps(ci);
  const __m256 lane = _mm256_setr_ps(0.0f, 1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f, 7.0f);

  int j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256 jf = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(j)), lane);
    const __m256 d = _mm256_fmadd_ps(jf, vdx, vbase);
    const __m256 e = _mm256_mul_ps(_mm256_mul_ps(d, d), vneg);
    const __m256 w = exp256_ps(e);
    _mm256_storeu_ps(re + j, _mm256_fmadd_ps(vcr, w, _mm256_loadu_ps(re + j)));
    _mm256_storeu_ps(im + j, _mm256_fmadd_ps(vci, w, _mm256_loadu_ps(im + j)));
  }
  for (; j < n; ++j) {
    const float w = detail::gauss_weight(base, dx, static_cast<float>(j), neg_inv);
    re[j] = std::fmaf(cr, w, re[j]);
    im[j] = std::fmaf(ci, w, im[j]);
  }
}

inline double hsum_pd(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

void match_moments_avx2(const float* a, const float* b, int n, double* sab, double* sb,
                        double* sbb) {
  __m256d vab = _mm256_setzero_pd();
  __m256d vs = _mm256_setzero_pd();
  __m256d vbb = _mm256_setzero_pd();

  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
    const __m256d vb = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
    vab = _mm256_fmadd_pd(va, vb, vab);
    vs = _mm256_add_pd(vs, vb);
    vbb = _mm256_fmadd_pd(vb, vb, vbb);
  }
  double ab = hsum_pd(vab);
  double s = hsum_pd(vs);
  double bb = hsum_pd(vbb);
  for (; i < n; ++i) {
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

void envelope_avx2(const float* re, const float* im, float* out, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vr = _mm256_loadu_ps(re + i);
    const __m256 vi = _mm256_loadu_ps(im + i);
    const __m256 sq = _mm256_fmadd_ps(vr, vr, _mm256_mul_ps(vi, vi));
    _mm256_storeu_ps(out + i, _mm256_sqrt_ps(sq));
  }
  for (; i < n; ++i) {
    out[i] = detail::envelope_one(re[i], im[i]);
  }
}

}  // namespace

bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable& avx2_table() {
  static const KernelTable table{psf_row_avx2, match_moments_avx2, envelope_avx2, "avx2"};
  return table;
}

}  // namespace echostrain::kernels

#endif  // ECHOSTRAIN_HAVE_AVX2

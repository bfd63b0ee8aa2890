#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

// Per-element math shared by the scalar and the AVX2 kernel translation
// units. Every operation here has a direct AVX2 counterpart with identical
// IEEE-754 semantics (min/max with the x86 NaN convention, single-rounding
// fma, exact floor, truncating int conversion), which is what makes the two
// variants bit-equal on psf_row and envelope_mag.

namespace echostrain::kernels::detail {

inline constexpr float kExpHi = 88.0f;    // saturates instead of overflowing
inline constexpr float kExpLo = -87.0f;   // keeps the 2^n scale factor normal
inline constexpr float kLog2e = 1.44269504088896341f;
inline constexpr float kNegLn2Hi = -0.693359375f;
inline constexpr float kNegLn2Lo = 2.12194440e-4f;
inline constexpr float kExpP0 = 1.9875691500e-4f;
inline constexpr float kExpP1 = 1.3981999507e-3f;
inline constexpr float kExpP2 = 8.3334519073e-3f;
inline constexpr float kExpP3 = 4.1665795894e-2f;
inline constexpr float kExpP4 = 1.6666665459e-1f;
inline constexpr float kExpP5 = 5.0000001201e-1f;

// Polynomial e^x. Saturates outside [kExpLo, kExpHi]. Do not swap in the
// libm expf: its results vary across platforms, and the SIMD variants could
// not match it bitwise.
inline float poly_expf(float x) {
  x = (x < kExpHi) ? x : kExpHi;  // matches minps/maxps, including NaN
  x = (x > kExpLo) ? x : kExpLo;

  const float z = std::floor(std::fmaf(x, kLog2e, 0.5f));
  float r = std::fmaf(z, kNegLn2Hi, x);
  r = std::fmaf(z, kNegLn2Lo, r);

  const float rr = r * r;
  float p = kExpP0;
  p = std::fmaf(p, r, kExpP1);
  p = std::fmaf(p, r, kExpP2);
  p = std::fmaf(p, r, kExpP3);
  p = std::fmaf(p, r, kExpP4);
  p = std::fmaf(p, r, kExpP5);
  p = std::fmaf(p, rr, r);
  p = p + 1.0f;

  const auto n = static_cast<std::int32_t>(z);
  const float pow2n = std::bit_cast<float>(static_cast<std::uint32_t>(n + 127) << 23);
  return p * pow2n;
}

// Lateral PSF weight of pixel j for a scatterer offset base = x0 - xs.
inline float gauss_weight(float base, float dx, float jf, float neg_inv_two_sigma_sq) {
  const float d = std::fmaf(jf, dx, base);
  const float e = (d * d) * neg_inv_two_sigma_sq;
  return poly_expf(e);
}

inline float envelope_one(float re, float im) {
  return std::sqrt(std::fmaf(re, re, im * im));
}

}  // namespace echostrain::kernels::detail

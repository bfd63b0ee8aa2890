#pragma once

#include <cstddef>
#include <vector>

#include "echostrain/errors.hpp"

namespace echostrain {

// Row-major single-channel float image. Used for complex-field planes,
// envelope data and tracking pyramids.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> px;

  FloatImage() = default;
  FloatImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), px(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {
    if (w <= 0 || h <= 0) throw ValidationError("FloatImage: non-positive dimensions");
  }

  float& at(int x, int y) { return px[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return px[static_cast<size_t>(y) * width + x]; }
  float* row(int y) { return px.data() + static_cast<size_t>(y) * width; }
  const float* row(int y) const { return px.data() + static_cast<size_t>(y) * width; }
  size_t size() const { return px.size(); }
};

// Sampling grid shared by the renderer and the trackers. Pixel (row i,
// col j) has its center at (j * pixel_pitch_mm, i * pixel_pitch_mm); all
// mesh and scatterer coordinates live in this frame.
struct GridSpec {
  int width = 320;
  int height = 432;
  double pixel_pitch_mm = 0.25;
};

// Bilinear sample with clamped coordinates; (x, y) in pixel units.
inline float sample_bilinear(const FloatImage& img, double x, double y) {
  if (x < 0) x = 0;
  if (y < 0) y = 0;
  if (x > img.width - 1) x = img.width - 1;
  if (y > img.height - 1) y = img.height - 1;
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  int x1 = x0 + 1 < img.width ? x0 + 1 : x0;
  int y1 = y0 + 1 < img.height ? y0 + 1 : y0;
  double fx = x - x0;
  double fy = y - y0;
  double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return static_cast<float>((1.0 - fy) * top + fy * bot);
}

}  // namespace echostrain

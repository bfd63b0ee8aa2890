#pragma once

#include <cstdint>
#include <vector>

#include "echostrain/image.hpp"
#include "echostrain/phantom.hpp"

namespace echostrain::speckle {

// Separable Gaussian point spread function with an axial carrier, truncated
// at truncation_sigmas standard deviations. dynamic_range_db is the span of
// the log compression used for 8-bit display frames.
struct PsfSpec {
  double sigma_lateral_mm = 0.8;
  double sigma_axial_mm = 0.3;
  double axial_wavelength_mm = 0.44;
  double truncation_sigmas = 4.0;
  double dynamic_range_db = 60.0;
};

void validate_psf(const PsfSpec& psf);

// In-phase and quadrature planes of the summed scatterer responses.
struct ComplexImage {
  FloatImage re;
  FloatImage im;
};

// 8-bit log-compressed display frame; 255 is the frame envelope maximum,
// 0 is dynamic_range_db below it.
struct BModeFrame {
  int width = 0;
  int height = 0;
  int frame_index = 0;
  std::vector<uint8_t> px;
};

// Sums every scatterer's complex response on the grid. Each scatterer
// contributes amplitude * exp(i phase) * G_lateral * G_axial inside its
// truncation window, phase encoding its depth on the carrier.
ComplexImage render_complex(const phantom::ScattererField& field, const GridSpec& grid,
                            const PsfSpec& psf);

FloatImage envelope(const ComplexImage& image);

BModeFrame compress(const FloatImage& env, double dynamic_range_db, int frame_index);

BModeFrame render_frame(const phantom::ScattererField& field, const GridSpec& grid,
                        const PsfSpec& psf);

// Widens the 8-bit pixels to float for the tracker.
FloatImage to_float(const BModeFrame& frame);

// Advances the ED scatterer field to every frame of the engine's cycle and
// renders each one. Frames are independent, so jobs > 1 renders them on a
// thread pool with bit-identical results to a serial run.
std::vector<BModeFrame> render_sequence(const phantom::MotionEngine& engine,
                                        const phantom::ScattererField& ed_field, uint64_t seed,
                                        const GridSpec& grid, const PsfSpec& psf, int jobs = 1);

}  // namespace echostrain::speckle

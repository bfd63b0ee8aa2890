#include "echostrain/speckle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <thread>

#include "echostrain/errors.hpp"
#include "echostrain/kernels/kernels.hpp"
#include "kernels/kernels_detail.h"

namespace echostrain::speckle {
namespace {

void validate_grid(const GridSpec& grid) {
  if (grid.width <= 0 || grid.height <= 0 || !(grid.pixel_pitch_mm > 0.0)) {
    throw ValidationError("grid dimensions and pixel pitch must be positive");
  }
}

}  // namespace

void validate_psf(const PsfSpec& psf) {
  if (!(psf.sigma_lateral_mm > 0.0) || !(psf.sigma_axial_mm > 0.0)) {
    throw ValidationError("psf sigmas must be positive");
  }
  if (!(psf.axial_wavelength_mm > 0.0)) {
    throw ValidationError("psf axial wavelength must be positive");
  }
  if (!(psf.truncation_sigmas >= 3.0)) {
    throw ValidationError("psf truncation must be at least 3 sigmas");
  }
  if (!(psf.dynamic_range_db > 0.0)) {
    throw ValidationError("psf dynamic range must be positive");
  }
}

ComplexImage render_complex(const phantom::ScattererField& field, const GridSpec& grid,
                            const PsfSpec& psf) {
  validate_psf(psf);
  validate_grid(grid);
  const size_t n = field.positions.size();
  if (field.amplitudes.size() != n) {
    throw StructuralError("scatterer amplitudes do not match positions");
  }

  ComplexImage out{FloatImage(grid.width, grid.height), FloatImage(grid.width, grid.height)};
  const kernels::KernelTable& table = kernels::active();

  const double pitch = grid.pixel_pitch_mm;
  const double reach_x = psf.truncation_sigmas * psf.sigma_lateral_mm;
  const double reach_y = psf.truncation_sigmas * psf.sigma_axial_mm;
  const float inv_two_sl = static_cast<float>(1.0 / (2.0 * psf.sigma_lateral_mm * psf.sigma_lateral_mm));
  const float neg_inv_two_sa =
      static_cast<float>(-1.0 / (2.0 * psf.sigma_axial_mm * psf.sigma_axial_mm));
  const double two_pi_over_lambda = 2.0 * std::numbers::pi / psf.axial_wavelength_mm;

  for (size_t s = 0; s < n; ++s) {
    const double xs = field.positions[s].x;
    const double ys = field.positions[s].y;
    const int j0 = std::max(0, static_cast<int>(std::ceil((xs - reach_x) / pitch)));
    const int j1 = std::min(grid.width - 1, static_cast<int>(std::floor((xs + reach_x) / pitch)));
    const int i0 = std::max(0, static_cast<int>(std::ceil((ys - reach_y) / pitch)));
    const int i1 = std::min(grid.height - 1, static_cast<int>(std::floor((ys + reach_y) / pitch)));
    if (j0 > j1 || i0 > i1) {
      continue;
    }
    const double phase = -two_pi_over_lambda * ys;
    const float amp_re = field.amplitudes[s] * static_cast<float>(std::cos(phase));
    const float amp_im = field.amplitudes[s] * static_cast<float>(std::sin(phase));
    const float x0 = static_cast<float>(j0 * pitch);
    const float xsf = static_cast<float>(xs);
    const float dxf = static_cast<float>(pitch);
    for (int i = i0; i <= i1; ++i) {
      const float dy = static_cast<float>(i * pitch - ys);
      const float ax = kernels::detail::poly_expf(dy * dy * neg_inv_two_sa);
      table.psf_row(out.re.row(i) + j0, out.im.row(i) + j0, j1 - j0 + 1, x0, dxf, xsf,
                    inv_two_sl, amp_re * ax, amp_im * ax);
    }
  }
  return out;
}

FloatImage envelope(const ComplexImage& image) {
  if (image.re.width != image.im.width || image.re.height != image.im.height) {
    throw StructuralError("complex planes disagree in size");
  }
  FloatImage out(image.re.width, image.re.height);
  kernels::active().envelope_mag(image.re.px.data(), image.im.px.data(), out.px.data(),
                                 static_cast<int>(out.size()));
  return out;
}

BModeFrame compress(const FloatImage& env, double dynamic_range_db, int frame_index) {
  if (!(dynamic_range_db > 0.0)) {
    throw ValidationError("dynamic range must be positive");
  }
  BModeFrame frame;
  frame.width = env.width;
  frame.height = env.height;
  frame.frame_index = frame_index;
  frame.px.assign(env.size(), 0);

  float peak = 0.0f;
  for (float v : env.px) {
    peak = std::max(peak, v);
  }
  if (peak <= 0.0f) {
    return frame;
  }
  const double scale = 255.0 / dynamic_range_db;
  for (size_t i = 0; i < env.px.size(); ++i) {
    if (env.px[i] <= 0.0f) {
      continue;
    }
    const double db = 20.0 * std::log10(static_cast<double>(env.px[i]) / peak);
    const double level = (db + dynamic_range_db) * scale;
    frame.px[i] = static_cast<uint8_t>(std::clamp(std::lround(level), 0L, 255L));
  }
  return frame;
}

BModeFrame render_frame(const phantom::ScattererField& field, const GridSpec& grid,
                        const PsfSpec& psf) {
  BModeFrame frame = compress(envelope(render_complex(field, grid, psf)), psf.dynamic_range_db,
                              field.frame_index);
  return frame;
}

FloatImage to_float(const BModeFrame& frame) {
  FloatImage out(frame.width, frame.height);
  for (size_t i = 0; i < frame.px.size(); ++i) {
    out.px[i] = static_cast<float>(frame.px[i]);
  }
  return out;
}

std::vector<BModeFrame> render_sequence(const phantom::MotionEngine& engine,
                                        const phantom::ScattererField& ed_field, uint64_t seed,
                                        const GridSpec& grid, const PsfSpec& psf, int jobs) {
  validate_psf(psf);
  validate_grid(grid);
  if (jobs < 1) {
    throw ValidationError("jobs must be at least 1");
  }
  const int n_frames = engine.model().n_frames;
  std::vector<BModeFrame> frames(static_cast<size_t>(n_frames));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= n_frames) {
        return;
      }
      try {
        const phantom::ScattererField advanced =
            phantom::advance_scatterers(ed_field, t, engine, seed);
        frames[static_cast<size_t>(t)] = render_frame(advanced, grid, psf);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_threads = std::min(jobs, n_frames);
    pool.reserve(static_cast<size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) {
      pool.emplace_back(worker);
    }
    for (std::thread& th : pool) {
      th.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  return frames;
}

}  // namespace echostrain::speckle

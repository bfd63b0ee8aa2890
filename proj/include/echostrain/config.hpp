#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echostrain/geometry.hpp"
#include "echostrain/image.hpp"
#include "echostrain/phantom.hpp"
#include "echostrain/speckle.hpp"
#include "echostrain/tracking.hpp"

namespace echostrain::config {

// Full parameter set for one run. Every field has a usable default, so an
// empty document is a valid configuration; a config file overrides named
// fields and command-line flags override the file.
struct RunSettings {
  phantom::GeometryConfig geometry;
  phantom::MotionModel motion;
  std::vector<phantom::InfarctSpec> infarcts;
  geom::View view = geom::View::FourChamber;
  GridSpec grid;
  phantom::ScattererConfig scatterers;
  speckle::PsfSpec psf;
  tracking::TrackerConfig tracker;
  uint64_t seed = 1;
  std::vector<double> ratios;   // phantom/sweep coherence ratios; empty means the scatterer ratio alone
  std::vector<uint64_t> seeds;  // sweep seeds; empty means {seed}
  int smoothing_window = 1;     // moving-average window for strain curves
  int jobs = 1;
  bool deterministic = false;
};

// Parses a JSON document into settings. Unknown keys and wrong types raise
// a validation error naming the offending field; malformed JSON raises a
// format error. Field values are checked with the owning module's
// validators before returning.
RunSettings settings_from_json(const std::string& text);

// Canonical JSON form with every field spelled out; parsing it back yields
// the same settings. Used to embed the effective configuration in run
// manifests.
std::string settings_to_json(const RunSettings& settings);

}  // namespace echostrain::config

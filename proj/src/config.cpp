#include "echostrain/config.hpp"

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "echostrain/errors.hpp"

namespace echostrain::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
  throw ValidationError("config field '" + path + "' " + what);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (std::string_view key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      const std::string full = path.empty() ? item.key() : path + "." + item.key();
      throw ValidationError("config field '" + full + "' is not recognized");
    }
  }
}

const json& need_object(const json& value, const std::string& path) {
  if (!value.is_object()) {
    fail_field(path, "must be an object");
  }
  return value;
}

double need_number(const json& value, const std::string& path) {
  if (!value.is_number()) {
    fail_field(path, "must be a number");
  }
  return value.get<double>();
}

int need_int(const json& value, const std::string& path) {
  if (!value.is_number_integer()) {
    fail_field(path, "must be an integer");
  }
  return value.get<int>();
}

uint64_t need_u64(const json& value, const std::string& path) {
  if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<int64_t>() >= 0)) {
    fail_field(path, "must be a non-negative integer");
  }
  return value.get<uint64_t>();
}

bool need_bool(const json& value, const std::string& path) {
  if (!value.is_boolean()) {
    fail_field(path, "must be a boolean");
  }
  return value.get<bool>();
}

std::string need_string(const json& value, const std::string& path) {
  if (!value.is_string()) {
    fail_field(path, "must be a string");
  }
  return value.get<std::string>();
}

const json& need_array(const json& value, const std::string& path) {
  if (!value.is_array()) {
    fail_field(path, "must be an array");
  }
  return value;
}

void parse_geometry(const json& value, phantom::GeometryConfig& geo) {
  const json& obj = need_object(value, "geometry");
  check_keys(obj, "geometry",
             {"long_axis_mm", "short_axis_mm", "wall_thickness_mm", "points_per_contour",
              "center_x_mm", "base_y_mm"});
  for (const auto& item : obj.items()) {
    const std::string path = "geometry." + item.key();
    if (item.key() == "long_axis_mm") {
      geo.long_axis_mm = need_number(item.value(), path);
    } else if (item.key() == "short_axis_mm") {
      geo.short_axis_mm = need_number(item.value(), path);
    } else if (item.key() == "wall_thickness_mm") {
      geo.wall_thickness_mm = need_number(item.value(), path);
    } else if (item.key() == "points_per_contour") {
      geo.points_per_contour = need_int(item.value(), path);
    } else if (item.key() == "center_x_mm") {
      geo.center_x_mm = need_number(item.value(), path);
    } else if (item.key() == "base_y_mm") {
      geo.base_y_mm = need_number(item.value(), path);
    }
  }
}

void parse_motion(const json& value, phantom::MotionModel& motion) {
  const json& obj = need_object(value, "motion");
  check_keys(obj, "motion",
             {"n_frames", "ed_index", "es_index", "peak_longitudinal_shortening",
              "peak_radial_thickening", "temporal_profile"});
  for (const auto& item : obj.items()) {
    const std::string path = "motion." + item.key();
    if (item.key() == "n_frames") {
      motion.n_frames = need_int(item.value(), path);
    } else if (item.key() == "ed_index") {
      motion.ed_index = need_int(item.value(), path);
    } else if (item.key() == "es_index") {
      motion.es_index = need_int(item.value(), path);
    } else if (item.key() == "peak_longitudinal_shortening") {
      motion.peak_longitudinal_shortening = need_number(item.value(), path);
    } else if (item.key() == "peak_radial_thickening") {
      motion.peak_radial_thickening = need_number(item.value(), path);
    } else if (item.key() == "temporal_profile") {
      motion.temporal_profile.clear();
      for (const json& entry : need_array(item.value(), path)) {
        motion.temporal_profile.push_back(need_number(entry, path + "[]"));
      }
    }
  }
}

void parse_infarcts(const json& value, std::vector<phantom::InfarctSpec>& infarcts) {
  infarcts.clear();
  size_t index = 0;
  for (const json& entry : need_array(value, "infarcts")) {
    const std::string base = "infarcts[" + std::to_string(index) + "]";
    const json& obj = need_object(entry, base);
    check_keys(obj, base, {"segment_label", "reduction_alpha", "sigma_mm", "compensate"});
    phantom::InfarctSpec spec;
    if (!obj.contains("segment_label")) {
      fail_field(base + ".segment_label", "is required");
    }
    for (const auto& item : obj.items()) {
      const std::string path = base + "." + item.key();
      if (item.key() == "segment_label") {
        spec.segment_label = need_string(item.value(), path);
      } else if (item.key() == "reduction_alpha") {
        spec.reduction_alpha = need_number(item.value(), path);
      } else if (item.key() == "sigma_mm") {
        spec.sigma_mm = need_number(item.value(), path);
      } else if (item.key() == "compensate") {
        spec.compensate = need_bool(item.value(), path);
      }
    }
    infarcts.push_back(spec);
    ++index;
  }
}

void parse_grid(const json& value, GridSpec& grid) {
  const json& obj = need_object(value, "grid");
  check_keys(obj, "grid", {"width", "height", "pixel_pitch_mm"});
  for (const auto& item : obj.items()) {
    const std::string path = "grid." + item.key();
    if (item.key() == "width") {
      grid.width = need_int(item.value(), path);
    } else if (item.key() == "height") {
      grid.height = need_int(item.value(), path);
    } else if (item.key() == "pixel_pitch_mm") {
      grid.pixel_pitch_mm = need_number(item.value(), path);
    }
  }
  if (grid.width < 1 || grid.height < 1) {
    fail_field("grid", "needs positive width and height");
  }
  if (!(grid.pixel_pitch_mm > 0.0)) {
    fail_field("grid.pixel_pitch_mm", "must be positive");
  }
}

void parse_scatterers(const json& value, phantom::ScattererConfig& sc) {
  const json& obj = need_object(value, "scatterers");
  check_keys(obj, "scatterers",
             {"density", "background_density", "cavity_density", "coherence_ratio",
              "background_amplitude", "cavity_amplitude"});
  for (const auto& item : obj.items()) {
    const std::string path = "scatterers." + item.key();
    if (item.key() == "density") {
      sc.density = need_number(item.value(), path);
    } else if (item.key() == "background_density") {
      sc.background_density = need_number(item.value(), path);
    } else if (item.key() == "cavity_density") {
      sc.cavity_density = need_number(item.value(), path);
    } else if (item.key() == "coherence_ratio") {
      sc.coherence_ratio = need_number(item.value(), path);
    } else if (item.key() == "background_amplitude") {
      sc.background_amplitude = need_number(item.value(), path);
    } else if (item.key() == "cavity_amplitude") {
      sc.cavity_amplitude = need_number(item.value(), path);
    }
  }
}

void parse_psf(const json& value, speckle::PsfSpec& psf) {
  const json& obj = need_object(value, "psf");
  check_keys(obj, "psf",
             {"sigma_lateral_mm", "sigma_axial_mm", "axial_wavelength_mm", "truncation_sigmas",
              "dynamic_range_db"});
  for (const auto& item : obj.items()) {
    const std::string path = "psf." + item.key();
    if (item.key() == "sigma_lateral_mm") {
      psf.sigma_lateral_mm = need_number(item.value(), path);
    } else if (item.key() == "sigma_axial_mm") {
      psf.sigma_axial_mm = need_number(item.value(), path);
    } else if (item.key() == "axial_wavelength_mm") {
      psf.axial_wavelength_mm = need_number(item.value(), path);
    } else if (item.key() == "truncation_sigmas") {
      psf.truncation_sigmas = need_number(item.value(), path);
    } else if (item.key() == "dynamic_range_db") {
      psf.dynamic_range_db = need_number(item.value(), path);
    }
  }
}

void parse_tracker(const json& value, tracking::TrackerConfig& tracker) {
  const json& obj = need_object(value, "tracker");
  check_keys(obj, "tracker",
             {"pyramid_levels", "block_radius", "search_radius", "window_length", "subpixel"});
  for (const auto& item : obj.items()) {
    const std::string path = "tracker." + item.key();
    if (item.key() == "pyramid_levels") {
      tracker.pyramid_levels = need_int(item.value(), path);
    } else if (item.key() == "block_radius") {
      tracker.block_radius = need_int(item.value(), path);
    } else if (item.key() == "search_radius") {
      tracker.search_radius = need_int(item.value(), path);
    } else if (item.key() == "window_length") {
      tracker.window_length = need_int(item.value(), path);
    } else if (item.key() == "subpixel") {
      tracker.subpixel = need_bool(item.value(), path);
    }
  }
}

}  // namespace

RunSettings settings_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid json: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ValidationError("config document must be a json object");
  }
  check_keys(doc, "",
             {"geometry", "motion", "infarcts", "view", "grid", "scatterers", "psf", "tracker",
              "seed", "ratios", "seeds", "smoothing_window", "jobs", "deterministic"});

  RunSettings settings;
  for (const auto& item : doc.items()) {
    if (item.key() == "geometry") {
      parse_geometry(item.value(), settings.geometry);
    } else if (item.key() == "motion") {
      parse_motion(item.value(), settings.motion);
    } else if (item.key() == "infarcts") {
      parse_infarcts(item.value(), settings.infarcts);
    } else if (item.key() == "view") {
      const std::string name = need_string(item.value(), "view");
      try {
        settings.view = geom::parse_view(name);
      } catch (const ValidationError&) {
        fail_field("view", "must be one of 4C, 2C, LAX");
      }
    } else if (item.key() == "grid") {
      parse_grid(item.value(), settings.grid);
    } else if (item.key() == "scatterers") {
      parse_scatterers(item.value(), settings.scatterers);
    } else if (item.key() == "psf") {
      parse_psf(item.value(), settings.psf);
    } else if (item.key() == "tracker") {
      parse_tracker(item.value(), settings.tracker);
    } else if (item.key() == "seed") {
      settings.seed = need_u64(item.value(), "seed");
    } else if (item.key() == "ratios") {
      settings.ratios.clear();
      for (const json& entry : need_array(item.value(), "ratios")) {
        const double ratio = need_number(entry, "ratios[]");
        if (!(ratio >= 0.0 && ratio <= 1.0)) {
          fail_field("ratios[]", "entries must lie in [0, 1]");
        }
        settings.ratios.push_back(ratio);
      }
    } else if (item.key() == "seeds") {
      settings.seeds.clear();
      for (const json& entry : need_array(item.value(), "seeds")) {
        settings.seeds.push_back(need_u64(entry, "seeds[]"));
      }
    } else if (item.key() == "smoothing_window") {
      settings.smoothing_window = need_int(item.value(), "smoothing_window");
      if (settings.smoothing_window < 1 || settings.smoothing_window % 2 == 0) {
        fail_field("smoothing_window", "must be a positive odd integer");
      }
    } else if (item.key() == "jobs") {
      settings.jobs = need_int(item.value(), "jobs");
      if (settings.jobs < 1) {
        fail_field("jobs", "must be at least 1");
      }
    } else if (item.key() == "deterministic") {
      settings.deterministic = need_bool(item.value(), "deterministic");
    }
  }

  phantom::validate_geometry(settings.geometry);
  phantom::validate_motion(settings.motion);
  speckle::validate_psf(settings.psf);
  tracking::validate_tracker_config(settings.tracker);
  return settings;
}

std::string settings_to_json(const RunSettings& s) {
  json doc;
  doc["geometry"] = {{"long_axis_mm", s.geometry.long_axis_mm},
                     {"short_axis_mm", s.geometry.short_axis_mm},
                     {"wall_thickness_mm", s.geometry.wall_thickness_mm},
                     {"points_per_contour", s.geometry.points_per_contour},
                     {"center_x_mm", s.geometry.center_x_mm},
                     {"base_y_mm", s.geometry.base_y_mm}};
  doc["motion"] = {{"n_frames", s.motion.n_frames},
                   {"ed_index", s.motion.ed_index},
                   {"es_index", s.motion.es_index},
                   {"peak_longitudinal_shortening", s.motion.peak_longitudinal_shortening},
                   {"peak_radial_thickening", s.motion.peak_radial_thickening},
                   {"temporal_profile", s.motion.temporal_profile}};
  doc["infarcts"] = json::array();
  for (const phantom::InfarctSpec& spec : s.infarcts) {
    doc["infarcts"].push_back({{"segment_label", spec.segment_label},
                               {"reduction_alpha", spec.reduction_alpha},
                               {"sigma_mm", spec.sigma_mm},
                               {"compensate", spec.compensate}});
  }
  doc["view"] = std::string(geom::view_name(s.view));
  doc["grid"] = {{"width", s.grid.width},
                 {"height", s.grid.height},
                 {"pixel_pitch_mm", s.grid.pixel_pitch_mm}};
  doc["scatterers"] = {{"density", s.scatterers.density},
                       {"background_density", s.scatterers.background_density},
                       {"cavity_density", s.scatterers.cavity_density},
                       {"coherence_ratio", s.scatterers.coherence_ratio},
                       {"background_amplitude", s.scatterers.background_amplitude},
                       {"cavity_amplitude", s.scatterers.cavity_amplitude}};
  doc["psf"] = {{"sigma_lateral_mm", s.psf.sigma_lateral_mm},
                {"sigma_axial_mm", s.psf.sigma_axial_mm},
                {"axial_wavelength_mm", s.psf.axial_wavelength_mm},
                {"truncation_sigmas", s.psf.truncation_sigmas},
                {"dynamic_range_db", s.psf.dynamic_range_db}};
  doc["tracker"] = {{"pyramid_levels", s.tracker.pyramid_levels},
                    {"block_radius", s.tracker.block_radius},
                    {"search_radius", s.tracker.search_radius},
                    {"window_length", s.tracker.window_length},
                    {"subpixel", s.tracker.subpixel}};
  doc["seed"] = s.seed;
  doc["ratios"] = s.ratios;
  doc["seeds"] = s.seeds;
  doc["smoothing_window"] = s.smoothing_window;
  doc["jobs"] = s.jobs;
  doc["deterministic"] = s.deterministic;
  return doc.dump(2) + "\n";
}

}  // namespace echostrain::config

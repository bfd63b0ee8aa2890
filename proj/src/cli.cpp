#include "echostrain/cli.hpp"

#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "echostrain/config.hpp"
#include "echostrain/errors.hpp"
#include "echostrain/evaluation.hpp"
#include "echostrain/geometry.hpp"
#include "echostrain/image.hpp"
#include "echostrain/io.hpp"
#include "echostrain/phantom.hpp"
#include "echostrain/speckle.hpp"
#include "echostrain/strain.hpp"
#include "echostrain/tracking.hpp"
#include "echostrain/version.hpp"

namespace echostrain::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_compact(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string zero4(int value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d", value);
  return std::string(buf);
}

std::string frame_name(std::string_view prefix, int t, std::string_view suffix) {
  return std::string(prefix) + zero4(t) + std::string(suffix);
}

std::string pair_name(int from, int to) {
  return "flow/flow_" + zero4(from) + "_to_" + zero4(to) + ".bin";
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) {
    throw IoError("cannot create directory '" + path + "': " + ec.message());
  }
}

// Collects every artifact a command writes so the closing manifest records
// all of them with content hashes.
struct Written {
  std::string root;
  std::vector<io::FileRecord> files;

  void put(const std::string& relative_path, std::string_view bytes) {
    const fs::path full = fs::path(root) / relative_path;
    ensure_dir(full.parent_path().string());
    io::write_file_atomic(full.string(), bytes);
    files.push_back(io::record_file(root, relative_path));
  }

  void finish(const std::string& command, uint64_t seed, const std::string& config_json) {
    io::RunManifest manifest;
    manifest.tool_name = kToolName;
    manifest.tool_version = kToolVersion;
    manifest.command = command;
    manifest.seed = seed;
    manifest.config_json = config_json;
    manifest.files = files;
    io::write_manifest(root, manifest);
  }
};

std::string default_out_root() {
  const char* env = std::getenv("ECHOSTRAIN_OUT");
  if (env != nullptr && *env != '\0') {
    return std::string(env);
  }
  return ".";
}

std::string resolve_out(const std::string& flag_value, const std::string& command_name) {
  if (!flag_value.empty()) {
    return flag_value;
  }
  return (fs::path(default_out_root()) / command_name).string();
}

std::vector<double> parse_ratio_list(const std::string& text) {
  std::vector<double> ratios;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string::npos) {
      comma = text.size();
    }
    const std::string_view token(text.data() + pos, comma - pos);
    double value = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      throw ValidationError("--ratios entry '" + std::string(token) + "' is not a number");
    }
    if (!(value >= 0.0 && value <= 1.0)) {
      throw ValidationError("--ratios entries must lie in [0, 1]");
    }
    ratios.push_back(value);
    pos = comma + 1;
    if (comma == text.size()) {
      break;
    }
  }
  if (ratios.empty()) {
    throw ValidationError("--ratios needs at least one value");
  }
  return ratios;
}

const std::vector<std::string> kLevels = {"basal", "mid", "apical"};

std::vector<std::string> parse_level_list(const std::string& text) {
  std::vector<std::string> levels;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string::npos) {
      comma = text.size();
    }
    const std::string token = text.substr(pos, comma - pos);
    bool known = false;
    for (const std::string& level : kLevels) {
      if (token == level) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ValidationError("--levels entry '" + token + "' is not one of basal, mid, apical");
    }
    levels.push_back(token);
    pos = comma + 1;
    if (comma == text.size()) {
      break;
    }
  }
  if (levels.empty()) {
    throw ValidationError("--levels needs at least one level");
  }
  return levels;
}

std::string level_of(const std::string& segment_label) {
  return segment_label.substr(0, segment_label.find('_'));
}

bool level_selected(const std::vector<std::string>& levels, const std::string& segment_label) {
  if (levels.empty()) {
    return true;
  }
  const std::string level = level_of(segment_label);
  for (const std::string& candidate : levels) {
    if (candidate == level) {
      return true;
    }
  }
  return false;
}

// Runs fn(0..n-1) on up to jobs threads. Results must be written to
// disjoint slots so the outcome does not depend on scheduling.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n) {
        return;
      }
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const size_t n_threads = std::min(static_cast<size_t>(jobs), n);
  pool.reserve(n_threads);
  for (size_t i = 0; i < n_threads; ++i) {
    pool.emplace_back(worker);
  }
  for (std::thread& th : pool) {
    th.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

std::string manifest_hash(const std::string& root) {
  return io::fnv1a64_hex(io::read_file((fs::path(root) / "manifest.json").string()));
}

io::RunManifest load_verified(const std::string& root) {
  const io::RunManifest manifest = io::read_manifest(root);
  io::verify_manifest(root, manifest);
  return manifest;
}

json parse_manifest_config(const io::RunManifest& manifest, const std::string& root) {
  json cfg = json::parse(manifest.config_json, nullptr, false);
  if (cfg.is_discarded() || !cfg.is_object()) {
    throw FormatError("manifest at '" + root + "' holds an unreadable config block");
  }
  return cfg;
}

std::string config_string(const json& cfg, const std::string& key, const std::string& root) {
  if (!cfg.contains(key) || !cfg[key].is_string()) {
    throw FormatError("manifest at '" + root + "' lacks the '" + key + "' config entry");
  }
  return cfg[key].get<std::string>();
}

// Artifacts record the manifest hash of each input they were derived from;
// a mismatch means the input changed after the artifact was produced.
void check_input_hash(const json& cfg, const std::string& key, const std::string& input_root,
                      const std::string& artifact_root) {
  const std::string stored = config_string(cfg, key, artifact_root);
  if (stored != manifest_hash(input_root)) {
    throw StaleArtifactError("artifacts at '" + artifact_root +
                             "' were produced from a different state of '" + input_root + "'");
  }
}

std::string dataset_file(const std::string& dataset, const std::string& relative_path) {
  return (fs::path(dataset) / relative_path).string();
}

config::RunSettings dataset_settings(const io::RunManifest& manifest, const std::string& root) {
  if (manifest.command != "phantom") {
    throw ValidationError("'" + root + "' holds a '" + manifest.command +
                          "' manifest, not a phantom dataset");
  }
  return config::settings_from_json(manifest.config_json);
}

std::vector<FloatImage> load_frames(const std::string& dataset, int n_frames) {
  std::vector<FloatImage> frames;
  frames.reserve(static_cast<size_t>(n_frames));
  for (int t = 0; t < n_frames; ++t) {
    const std::string path = dataset_file(dataset, frame_name("frames/frame_", t, ".pgm"));
    frames.push_back(speckle::to_float(io::pgm_from_bytes(io::read_file(path), t)));
  }
  return frames;
}

std::vector<geom::MyocardialMesh> load_gt_meshes(const std::string& dataset, int n_frames) {
  std::vector<geom::MyocardialMesh> meshes;
  meshes.reserve(static_cast<size_t>(n_frames));
  for (int t = 0; t < n_frames; ++t) {
    const std::string path = dataset_file(dataset, frame_name("gt/mesh_", t, ".json"));
    meshes.push_back(io::mesh_from_json(io::read_file(path)));
  }
  return meshes;
}

geom::SegmentLayout layout_for(const geom::MyocardialMesh& ed_mesh, geom::View view) {
  return geom::build_segment_layout(geom::compute_midline(ed_mesh), ed_mesh.apex_index, view);
}

// Wraps one polyline as a mesh with coincident walls so midline-only data
// (point trajectories) flows through the mesh-based strain and distance
// code unchanged.
geom::MyocardialMesh midline_mesh(const std::vector<geom::Point2D>& points, int apex_index,
                                  int frame_index) {
  geom::MyocardialMesh mesh;
  mesh.endo.points = points;
  mesh.epi.points = points;
  mesh.apex_index = apex_index;
  mesh.frame_index = frame_index;
  return mesh;
}

std::vector<std::pair<double, double>> peak_sls_pairs(const strain::StrainSummary& reference,
                                                      const strain::StrainSummary& tracked,
                                                      const std::vector<std::string>& levels) {
  if (reference.segment_labels != tracked.segment_labels) {
    throw StructuralError("reference and tracked strain summaries disagree on segment labels");
  }
  std::vector<std::pair<double, double>> pairs;
  for (size_t s = 0; s < reference.segment_labels.size(); ++s) {
    if (level_selected(levels, reference.segment_labels[s])) {
      pairs.emplace_back(reference.peak_systolic_sls[s], tracked.peak_systolic_sls[s]);
    }
  }
  if (pairs.empty()) {
    throw ValidationError("no segments match the requested levels");
  }
  return pairs;
}

eval::DistanceErrorReport filter_segments(const eval::DistanceErrorReport& report,
                                          const std::vector<std::string>& levels) {
  if (levels.empty()) {
    return report;
  }
  eval::DistanceErrorReport filtered = report;
  filtered.segment_labels.clear();
  filtered.per_segment_mean.clear();
  for (size_t s = 0; s < report.segment_labels.size(); ++s) {
    if (level_selected(levels, report.segment_labels[s])) {
      filtered.segment_labels.push_back(report.segment_labels[s]);
      filtered.per_segment_mean.push_back(report.per_segment_mean[s]);
    }
  }
  if (filtered.segment_labels.empty()) {
    throw ValidationError("no segments match the requested levels");
  }
  return filtered;
}

// ---------------------------------------------------------------------------
// phantom

void write_dataset(const config::RunSettings& s, const std::string& dir) {
  const phantom::MotionEngine engine(s.geometry, s.motion, s.infarcts, s.view);
  const phantom::GroundTruth gt =
      phantom::build_ground_truth(s.geometry, s.motion, s.infarcts, s.view);
  const phantom::ScattererField ed_field =
      phantom::seed_scatterers(s.geometry, s.grid, s.scatterers, s.seed);
  const std::vector<speckle::BModeFrame> frames =
      speckle::render_sequence(engine, ed_field, s.seed, s.grid, s.psf, s.jobs);

  Written out{dir, {}};
  const int n = s.motion.n_frames;
  for (int t = 0; t < n; ++t) {
    out.put(frame_name("frames/frame_", t, ".pgm"), io::pgm_to_bytes(frames[static_cast<size_t>(t)]));
    const phantom::ScattererField field_t = phantom::advance_scatterers(ed_field, t, engine, s.seed);
    out.put(frame_name("scatterers/frame_", t, ".bin"), io::scatterers_to_bytes(field_t));
    out.put(frame_name("gt/mesh_", t, ".json"), io::mesh_to_json(gt.meshes[static_cast<size_t>(t)]));
  }
  out.put("gt/trajectories.bin", io::trajectories_to_bytes(gt.trajectories));
  out.put("gt/strain.csv", io::strain_curve_to_csv(gt.reference_sls));
  const strain::StrainSummary summary = strain::summarize(gt.reference_sls, gt.reference_gls);
  out.put("gt/summary.json", io::strain_summary_to_json(summary));
  out.finish("phantom", s.seed, config::settings_to_json(s));

  std::cout << "wrote dataset '" << dir << "': " << n << " frames of " << s.grid.width << "x"
            << s.grid.height << " px, " << ed_field.positions.size() << " scatterers, coherence "
            << format_compact(s.scatterers.coherence_ratio) << ", peak GLS "
            << format_compact(summary.peak_gls) << "%\n";
}

int cmd_phantom(const config::RunSettings& settings, const std::string& out_dir) {
  std::vector<double> ratios = settings.ratios;
  if (ratios.empty()) {
    ratios = {settings.scatterers.coherence_ratio};
  }
  const bool multi = ratios.size() > 1;
  for (const double ratio : ratios) {
    config::RunSettings cell = settings;
    cell.ratios.clear();
    cell.scatterers.coherence_ratio = ratio;
    const std::string dir =
        multi ? (fs::path(out_dir) / ("ratio_" + format_compact(ratio))).string() : out_dir;
    write_dataset(cell, dir);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// verify

int count_with_prefix(const std::vector<io::FileRecord>& files, std::string_view prefix) {
  int count = 0;
  for (const io::FileRecord& record : files) {
    if (record.path.rfind(prefix, 0) == 0) {
      ++count;
    }
  }
  return count;
}

void deep_verify_dataset(const std::string& root, const io::RunManifest& manifest) {
  const config::RunSettings s = config::settings_from_json(manifest.config_json);
  const int n = s.motion.n_frames;

  const int n_frames = count_with_prefix(manifest.files, "frames/");
  const int n_scatterers = count_with_prefix(manifest.files, "scatterers/");
  if (n_frames != n || n_scatterers != n) {
    throw ValidationError("dataset '" + root + "' records " + std::to_string(n_frames) +
                          " frames and " + std::to_string(n_scatterers) + " scatterer files for a " +
                          std::to_string(n) + "-frame sequence");
  }

  for (int t = 0; t < n; ++t) {
    const speckle::BModeFrame frame =
        io::pgm_from_bytes(io::read_file(dataset_file(root, frame_name("frames/frame_", t, ".pgm"))), t);
    if (frame.width != s.grid.width || frame.height != s.grid.height) {
      throw ValidationError("frame " + std::to_string(t) + " is " + std::to_string(frame.width) +
                            "x" + std::to_string(frame.height) + " px but the config grid is " +
                            std::to_string(s.grid.width) + "x" + std::to_string(s.grid.height));
    }
    const phantom::ScattererField field = io::scatterers_from_bytes(
        io::read_file(dataset_file(root, frame_name("scatterers/frame_", t, ".bin"))));
    if (field.frame_index != t) {
      throw ValidationError("scatterer file for frame " + std::to_string(t) +
                            " is labeled frame " + std::to_string(field.frame_index));
    }
    const geom::MyocardialMesh mesh =
        io::mesh_from_json(io::read_file(dataset_file(root, frame_name("gt/mesh_", t, ".json"))));
    if (mesh.frame_index != t) {
      throw ValidationError("ground-truth mesh for frame " + std::to_string(t) +
                            " is labeled frame " + std::to_string(mesh.frame_index));
    }
  }

  const tracking::PointTrajectories traj =
      io::trajectories_from_bytes(io::read_file(dataset_file(root, "gt/trajectories.bin")));
  if (traj.n_frames != n) {
    throw ValidationError("ground-truth trajectories span " + std::to_string(traj.n_frames) +
                          " frames in a " + std::to_string(n) + "-frame dataset");
  }
  if (traj.reference_frame != s.motion.es_index) {
    throw ValidationError("ground-truth trajectories anchor at frame " +
                          std::to_string(traj.reference_frame) + " but the config end-systole is " +
                          std::to_string(s.motion.es_index));
  }

  const strain::StrainCurve curve =
      io::strain_curve_from_csv(io::read_file(dataset_file(root, "gt/strain.csv")),
                                s.motion.ed_index, s.motion.es_index);
  for (const std::vector<double>& values : curve.values) {
    if (static_cast<int>(values.size()) != n) {
      throw ValidationError("reference strain covers " + std::to_string(values.size()) +
                            " frames in a " + std::to_string(n) + "-frame dataset");
    }
  }
  const strain::StrainSummary summary =
      io::strain_summary_from_json(io::read_file(dataset_file(root, "gt/summary.json")));
  if (summary.segment_labels != curve.segment_labels) {
    throw ValidationError("reference strain summary and curve disagree on segment labels");
  }
}

int cmd_verify(const std::string& root) {
  const io::RunManifest manifest = load_verified(root);
  if (manifest.command == "phantom") {
    deep_verify_dataset(root, manifest);
  }
  std::cout << "ok: '" << root << "' verified (" << manifest.files.size() << " files, command "
            << manifest.command << ", " << manifest.tool_name << " " << manifest.tool_version
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// track

int cmd_track(const std::string& dataset, const std::string& mode, const std::string& input,
              const std::string& kind, const config::RunSettings& overrides, bool tracker_overridden,
              int jobs, const std::string& out_dir) {
  const io::RunManifest dm = load_verified(dataset);
  const config::RunSettings ds = dataset_settings(dm, dataset);
  const tracking::TrackerConfig tracker = tracker_overridden ? overrides.tracker : ds.tracker;
  const int n = ds.motion.n_frames;
  const double pitch = ds.grid.pixel_pitch_mm;

  Written out{out_dir, {}};
  json cfg;
  cfg["mode"] = mode;
  cfg["dataset"] = dataset;
  cfg["dataset_manifest_hash"] = manifest_hash(dataset);
  cfg["tracker"] = {{"pyramid_levels", tracker.pyramid_levels},
                    {"block_radius", tracker.block_radius},
                    {"search_radius", tracker.search_radius},
                    {"window_length", tracker.window_length},
                    {"subpixel", tracker.subpixel}};

  if (mode == "baseline-flow") {
    const std::vector<FloatImage> frames = load_frames(dataset, n);
    const size_t n_pairs = static_cast<size_t>(n - 1);
    std::vector<tracking::DisplacementField> fields(2 * n_pairs);
    parallel_for(2 * n_pairs, jobs, [&](size_t i) {
      const int t = static_cast<int>(i / 2);
      const bool forward = i % 2 == 0;
      const int from = forward ? t : t + 1;
      const int to = forward ? t + 1 : t;
      fields[i] = tracking::estimate_flow(frames[static_cast<size_t>(from)],
                                          frames[static_cast<size_t>(to)], tracker, pitch, from, to);
    });
    for (const tracking::DisplacementField& field : fields) {
      out.put(pair_name(field.from_frame, field.to_frame), io::flow_to_bytes(field));
    }
    cfg["representation"] = "flow";
    out.finish("track", ds.seed, cfg.dump());
    std::cout << "wrote " << fields.size() << " flow fields for " << n_pairs
              << " adjacent frame pairs to '" << out_dir << "'\n";
  } else if (mode == "baseline-track") {
    const std::vector<FloatImage> frames = load_frames(dataset, n);
    const int es = ds.motion.es_index;
    const geom::MyocardialMesh query =
        io::mesh_from_json(io::read_file(dataset_file(dataset, frame_name("gt/mesh_", es, ".json"))));
    const tracking::PointTrajectories traj = tracking::track_points(frames, pitch, query, tracker);
    out.put("trajectories.bin", io::trajectories_to_bytes(traj));
    cfg["representation"] = "trajectories";
    out.finish("track", ds.seed, cfg.dump());
    std::cout << "tracked " << traj.n_points << " midline points over " << traj.n_frames
              << " frames anchored at end-systole frame " << es << "; wrote '" << out_dir << "'\n";
  } else {  // external
    if (input.empty()) {
      throw ValidationError("external mode needs --input <file>");
    }
    if (kind != "flow" && kind != "trajectories") {
      throw ValidationError("external mode needs --kind flow or --kind trajectories");
    }
    cfg["representation"] = kind;
    cfg["input"] = input;
    const auto artifacts = io::ingest_external(
        input, kind == "flow" ? io::ExternalKind::Flow : io::ExternalKind::Trajectory);
    if (kind == "flow") {
      const auto& fields = std::get<std::vector<tracking::DisplacementField>>(artifacts);
      int lo = n;
      int hi = -1;
      for (const tracking::DisplacementField& field : fields) {
        if (field.width != ds.grid.width || field.height != ds.grid.height) {
          throw ValidationError("ingested field " + std::to_string(field.from_frame) + " -> " +
                                std::to_string(field.to_frame) + " is " +
                                std::to_string(field.width) + "x" + std::to_string(field.height) +
                                " px but the dataset grid is " + std::to_string(ds.grid.width) +
                                "x" + std::to_string(ds.grid.height));
        }
        if (static_cast<float>(field.pixel_pitch) != static_cast<float>(pitch)) {
          throw ValidationError("ingested field pitch " + format_compact(field.pixel_pitch) +
                                " mm does not match the dataset pitch " + format_compact(pitch) +
                                " mm");
        }
        if (field.from_frame < 0 || field.from_frame >= n || field.to_frame < 0 ||
            field.to_frame >= n) {
          throw ValidationError("ingested field " + std::to_string(field.from_frame) + " -> " +
                                std::to_string(field.to_frame) + " lies outside the " +
                                std::to_string(n) + "-frame dataset");
        }
        lo = std::min({lo, field.from_frame, field.to_frame});
        hi = std::max({hi, field.from_frame, field.to_frame});
      }
      for (const tracking::DisplacementField& field : fields) {
        out.put(pair_name(field.from_frame, field.to_frame), io::flow_to_bytes(field));
      }
      out.finish("track", ds.seed, cfg.dump());
      std::cout << "ingested " << fields.size() << " flow fields covering frames " << lo << ".."
                << hi << " from '" << input << "'; wrote '" << out_dir << "'\n";
    } else {
      const auto& traj = std::get<tracking::PointTrajectories>(artifacts);
      if (traj.n_frames != n) {
        throw ValidationError("trajectory file spans " + std::to_string(traj.n_frames) +
                              " frames but the dataset has " + std::to_string(n));
      }
      const geom::MyocardialMesh ed_mesh = io::mesh_from_json(
          io::read_file(dataset_file(dataset, frame_name("gt/mesh_", ds.motion.ed_index, ".json"))));
      const int midline_points = static_cast<int>(ed_mesh.endo.points.size());
      if (traj.n_points != midline_points) {
        throw ValidationError("trajectory file tracks " + std::to_string(traj.n_points) +
                              " points but the dataset midline has " +
                              std::to_string(midline_points) + " vertices");
      }
      out.put("trajectories.bin", io::trajectories_to_bytes(traj));
      out.finish("track", ds.seed, cfg.dump());
      std::cout << "ingested trajectories: " << traj.n_points << " points over " << traj.n_frames
                << " frames, reference frame " << traj.reference_frame << "; wrote '" << out_dir
                << "'\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// strain

int cmd_strain(const std::string& dataset, const std::string& motion, int smoothing_window,
               const std::string& out_dir) {
  const io::RunManifest dm = load_verified(dataset);
  const config::RunSettings ds = dataset_settings(dm, dataset);
  const int n = ds.motion.n_frames;
  const int ed = ds.motion.ed_index;
  const int es = ds.motion.es_index;
  const int window = smoothing_window > 0 ? smoothing_window : ds.smoothing_window;

  const geom::MyocardialMesh ed_mesh =
      io::mesh_from_json(io::read_file(dataset_file(dataset, frame_name("gt/mesh_", ed, ".json"))));
  const geom::SegmentLayout layout = layout_for(ed_mesh, ds.view);

  json cfg;
  cfg["dataset"] = dataset;
  cfg["dataset_manifest_hash"] = manifest_hash(dataset);
  cfg["motion"] = motion;
  cfg["smoothing_window"] = window;

  Written out{out_dir, {}};
  std::vector<geom::MyocardialMesh> meshes;
  std::string representation;

  if (motion == "gt") {
    meshes = load_gt_meshes(dataset, n);
    representation = "meshes";
  } else {
    const io::RunManifest mm = load_verified(motion);
    const json mcfg = parse_manifest_config(mm, motion);
    check_input_hash(mcfg, "dataset_manifest_hash", dataset, motion);
    cfg["motion_manifest_hash"] = manifest_hash(motion);
    representation = config_string(mcfg, "representation", motion);
    if (representation == "trajectories") {
      const tracking::PointTrajectories traj = io::trajectories_from_bytes(
          io::read_file((fs::path(motion) / "trajectories.bin").string()));
      if (traj.n_frames != n) {
        throw ValidationError("trajectories span " + std::to_string(traj.n_frames) +
                              " frames but the dataset has " + std::to_string(n));
      }
      if (traj.n_points != static_cast<int>(ed_mesh.endo.points.size())) {
        throw ValidationError("trajectories track " + std::to_string(traj.n_points) +
                              " points but the dataset midline has " +
                              std::to_string(ed_mesh.endo.points.size()) + " vertices");
      }
      meshes.reserve(static_cast<size_t>(n));
      for (int t = 0; t < n; ++t) {
        meshes.push_back(
            midline_mesh(traj.positions[static_cast<size_t>(t)], ed_mesh.apex_index, t));
      }
      out.put("trajectories.bin", io::trajectories_to_bytes(traj));
    } else if (representation == "flow") {
      std::vector<tracking::DisplacementField> fields;
      for (const io::FileRecord& record : mm.files) {
        if (record.path.rfind("flow/", 0) == 0) {
          const std::vector<tracking::DisplacementField> parsed =
              io::flow_sequence_from_bytes(io::read_file((fs::path(motion) / record.path).string()));
          fields.insert(fields.end(), parsed.begin(), parsed.end());
        }
      }
      if (fields.empty()) {
        throw ValidationError("motion artifacts at '" + motion + "' hold no flow fields");
      }
      geom::MyocardialMesh anchor = ed_mesh;
      anchor.frame_index = ed;
      meshes = tracking::propagate_mesh_flow(anchor, fields, n);
    } else {
      throw FormatError("motion artifacts at '" + motion + "' declare unknown representation '" +
                        representation + "'");
    }
  }

  strain::StrainCurve curve = strain::compute_sls(meshes, layout, ed, es);
  if (window > 1) {
    curve = strain::moving_average(curve, window);
  }
  const std::vector<double> gls = strain::compute_gls(meshes, ed);
  const strain::StrainSummary summary = strain::summarize(curve, gls);

  cfg["representation"] = representation;
  out.put("strain.csv", io::strain_curve_to_csv(curve));
  out.put("summary.json", io::strain_summary_to_json(summary));
  if (representation == "meshes" || representation == "flow") {
    for (int t = 0; t < n; ++t) {
      out.put(frame_name("meshes/mesh_", t, ".json"),
              io::mesh_to_json(meshes[static_cast<size_t>(t)]));
    }
  }
  out.finish("strain", ds.seed, cfg.dump());

  std::cout << "wrote strain for " << curve.segment_labels.size() << " segments over " << n
            << " frames to '" << out_dir << "'; peak GLS " << format_compact(summary.peak_gls)
            << "%\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval_dataset(const std::string& dataset, const std::string& strain_dir,
                     const std::vector<std::string>& levels, const std::string& out_dir) {
  const io::RunManifest dm = load_verified(dataset);
  const config::RunSettings ds = dataset_settings(dm, dataset);
  const int n = ds.motion.n_frames;

  const io::RunManifest sm = load_verified(strain_dir);
  const json scfg = parse_manifest_config(sm, strain_dir);
  check_input_hash(scfg, "dataset_manifest_hash", dataset, strain_dir);
  const std::string representation = config_string(scfg, "representation", strain_dir);

  const std::vector<geom::MyocardialMesh> ref = load_gt_meshes(dataset, n);
  const geom::SegmentLayout layout = layout_for(ref[static_cast<size_t>(ds.motion.ed_index)], ds.view);

  eval::DistanceErrorReport distance;
  if (representation == "trajectories") {
    const tracking::PointTrajectories est_traj = io::trajectories_from_bytes(
        io::read_file((fs::path(strain_dir) / "trajectories.bin").string()));
    const tracking::PointTrajectories ref_traj =
        io::trajectories_from_bytes(io::read_file(dataset_file(dataset, "gt/trajectories.bin")));
    const int apex = ref[0].apex_index;
    std::vector<geom::MyocardialMesh> est_meshes;
    std::vector<geom::MyocardialMesh> ref_meshes;
    est_meshes.reserve(static_cast<size_t>(n));
    ref_meshes.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
      est_meshes.push_back(midline_mesh(est_traj.positions[static_cast<size_t>(t)], apex, t));
      ref_meshes.push_back(midline_mesh(ref_traj.positions[static_cast<size_t>(t)], apex, t));
    }
    distance = eval::mean_distance_error(est_meshes, ref_meshes, layout);
  } else {
    std::vector<geom::MyocardialMesh> est;
    est.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
      est.push_back(io::mesh_from_json(
          io::read_file((fs::path(strain_dir) / frame_name("meshes/mesh_", t, ".json")).string())));
    }
    distance = eval::mean_distance_error(est, ref, layout);
  }
  const eval::DistanceErrorReport filtered = filter_segments(distance, levels);

  const strain::StrainSummary ref_summary =
      io::strain_summary_from_json(io::read_file(dataset_file(dataset, "gt/summary.json")));
  const strain::StrainSummary trk_summary = io::strain_summary_from_json(
      io::read_file((fs::path(strain_dir) / "summary.json").string()));
  const eval::AgreementReport agreement =
      eval::bland_altman(peak_sls_pairs(ref_summary, trk_summary, levels));

  json cfg;
  cfg["dataset"] = dataset;
  cfg["dataset_manifest_hash"] = manifest_hash(dataset);
  cfg["strain"] = strain_dir;
  cfg["strain_manifest_hash"] = manifest_hash(strain_dir);
  cfg["levels"] = levels.empty() ? kLevels : levels;

  Written out{out_dir, {}};
  out.put("distance.csv", io::distance_report_to_csv(filtered));
  out.put("agreement.csv", io::agreement_to_csv(agreement));
  out.finish("eval", ds.seed, cfg.dump());

  std::cout << "mean distance error " << format_compact(filtered.sequence_mean) << " mm (SD "
            << format_compact(filtered.sequence_sd) << "); SLS bias "
            << format_compact(agreement.bias) << "% with limits of agreement ["
            << format_compact(agreement.loa_low) << ", " << format_compact(agreement.loa_high)
            << "] over " << agreement.n_pairs << " segments; wrote '" << out_dir << "'\n";
  return 0;
}

int cmd_eval_sweep(const std::string& sweep_dir, const std::vector<std::string>& levels,
                   const std::string& out_dir) {
  const io::RunManifest sm = load_verified(sweep_dir);
  if (sm.command != "sweep") {
    throw ValidationError("'" + sweep_dir + "' holds a '" + sm.command +
                          "' manifest, not a sweep");
  }
  const std::vector<eval::SweepCell> cells = io::sweep_cells_from_long_csv(
      io::read_file((fs::path(sweep_dir) / "cells.csv").string()));

  std::vector<double> ratios;
  for (const eval::SweepCell& cell : cells) {
    bool seen = false;
    for (const double ratio : ratios) {
      if (ratio == cell.coherence_ratio) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      ratios.push_back(cell.coherence_ratio);
    }
  }
  const std::vector<std::string> selected = levels.empty() ? kLevels : levels;

  std::string csv = "coherence_ratio,level,n_pairs,bias_percent,sd_percent,loa_low_percent,loa_high_percent\n";
  size_t n_rows = 0;
  for (const double ratio : ratios) {
    for (const std::string& level : selected) {
      std::vector<std::pair<double, double>> pairs;
      for (const eval::SweepCell& cell : cells) {
        if (cell.coherence_ratio != ratio) {
          continue;
        }
        for (size_t s = 0; s < cell.segment_labels.size(); ++s) {
          if (level_of(cell.segment_labels[s]) == level) {
            pairs.emplace_back(cell.reference_peak_sls[s], cell.tracked_peak_sls[s]);
          }
        }
      }
      if (pairs.empty()) {
        throw ValidationError("sweep cells hold no segments at level '" + level + "'");
      }
      const eval::AgreementReport agreement = eval::bland_altman(pairs);
      csv += format_compact(ratio) + "," + level + "," + std::to_string(agreement.n_pairs) + "," +
             format_compact(agreement.bias) + "," + format_compact(agreement.sd_of_differences) +
             "," + format_compact(agreement.loa_low) + "," + format_compact(agreement.loa_high) +
             "\n";
      ++n_rows;
    }
  }

  json cfg;
  cfg["sweep"] = sweep_dir;
  cfg["sweep_manifest_hash"] = manifest_hash(sweep_dir);
  cfg["levels"] = selected;

  Written out{out_dir, {}};
  out.put("agreement_by_level.csv", csv);
  out.finish("eval", sm.seed, cfg.dump());

  std::cout << "wrote " << n_rows << " agreement rows (" << ratios.size() << " ratios x "
            << selected.size() << " levels) to '" << out_dir << "'\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const config::RunSettings& settings, const std::string& out_dir) {
  if (settings.ratios.empty()) {
    throw ValidationError("sweep needs coherence ratios (config 'ratios' or --ratios)");
  }
  std::vector<uint64_t> seeds = settings.seeds;
  if (seeds.empty()) {
    seeds = {settings.seed};
  }

  eval::SweepConfig sweep_config;
  sweep_config.geometry = settings.geometry;
  sweep_config.motion = settings.motion;
  sweep_config.infarcts = settings.infarcts;
  sweep_config.view = settings.view;
  sweep_config.grid = settings.grid;
  sweep_config.scatterers = settings.scatterers;
  sweep_config.psf = settings.psf;
  sweep_config.jobs = settings.jobs;

  const eval::SweepReport report =
      eval::decorrelation_sweep(sweep_config, settings.ratios, seeds, settings.tracker);

  config::RunSettings recorded = settings;
  recorded.seeds = seeds;

  Written out{out_dir, {}};
  out.put("rows.csv", io::sweep_rows_to_csv(report.rows));
  out.put("cells.csv", io::sweep_cells_to_long_csv(report.cells));
  out.finish("sweep", settings.seed, config::settings_to_json(recorded));

  for (const eval::SweepRow& row : report.rows) {
    std::cout << "ratio " << format_compact(row.coherence_ratio) << ": mean error "
              << format_compact(row.mean_error_mm) << " mm (SD "
              << format_compact(row.sd_error_mm) << ") over " << row.n_seeds << " seeds, SLS bias "
              << format_compact(row.sls_agreement.bias) << "%\n";
  }
  std::cout << "wrote sweep report (" << report.cells.size() << " cells) to '" << out_dir << "'\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"synthetic cardiac speckle phantom, motion tracking, and strain evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);

  std::string config_path;
  std::string out;
  std::string dataset;
  std::string mode;
  std::string input;
  std::string kind;
  std::string motion;
  std::string strain_dir;
  std::string sweep_dir;
  std::string ratios_csv;
  std::string levels_csv;
  uint64_t seed = 0;
  int jobs = 0;
  int smoothing_window = 0;
  bool deterministic = false;

  CLI::App* p_phantom = app.add_subcommand("phantom", "generate a synthetic dataset");
  p_phantom->add_option("--config", config_path, "json settings file");
  p_phantom->add_option("--out", out, "output directory (default $ECHOSTRAIN_OUT/dataset)");
  CLI::Option* phantom_seed = p_phantom->add_option("--seed", seed, "override the config seed");
  CLI::Option* phantom_jobs = p_phantom->add_option("--jobs", jobs, "parallel jobs");
  p_phantom->add_flag("--deterministic", deterministic, "force serial execution");
  p_phantom->add_option("--ratios", ratios_csv,
                        "comma-separated coherence ratios; writes one dataset per ratio");

  CLI::App* p_verify = app.add_subcommand("verify", "check an artifact directory against its manifest");
  p_verify->add_option("root", dataset, "artifact directory")->required();

  CLI::App* p_track = app.add_subcommand("track", "estimate motion on a dataset");
  p_track->add_option("dataset", dataset, "dataset directory")->required();
  p_track->add_option("--mode", mode, "baseline-flow, baseline-track, or external")
      ->required()
      ->check(CLI::IsMember({"baseline-flow", "baseline-track", "external"}));
  p_track->add_option("--input", input, "externally produced motion file (external mode)");
  p_track->add_option("--kind", kind, "external file kind: flow or trajectories");
  p_track->add_option("--config", config_path, "json settings file for tracker parameters");
  p_track->add_option("--out", out, "output directory (default $ECHOSTRAIN_OUT/motion)");
  CLI::Option* track_jobs = p_track->add_option("--jobs", jobs, "parallel jobs");
  p_track->add_flag("--deterministic", deterministic, "force serial execution");

  CLI::App* p_strain = app.add_subcommand("strain", "compute strain curves from motion artifacts");
  p_strain->add_option("dataset", dataset, "dataset directory")->required();
  p_strain->add_option("--motion", motion, "motion artifact directory, or 'gt' for ground truth")
      ->required();
  p_strain->add_option("--smoothing-window", smoothing_window,
                       "odd moving-average window for strain curves");
  p_strain->add_option("--out", out, "output directory (default $ECHOSTRAIN_OUT/strain)");

  CLI::App* p_eval = app.add_subcommand("eval", "score strain artifacts against ground truth");
  p_eval->add_option("dataset", dataset, "dataset directory");
  p_eval->add_option("--strain", strain_dir, "strain artifact directory");
  p_eval->add_option("--sweep", sweep_dir, "sweep artifact directory");
  p_eval->add_option("--levels", levels_csv, "comma-separated segment levels (basal, mid, apical)");
  p_eval->add_option("--out", out, "output directory (default $ECHOSTRAIN_OUT/eval)");

  CLI::App* p_sweep = app.add_subcommand("sweep", "run a coherence-ratio sweep end to end");
  p_sweep->add_option("--config", config_path, "json settings file")->required();
  p_sweep->add_option("--ratios", ratios_csv, "comma-separated coherence ratios");
  CLI::Option* sweep_seed = p_sweep->add_option("--seed", seed, "override the config seed");
  CLI::Option* sweep_jobs = p_sweep->add_option("--jobs", jobs, "parallel cells");
  p_sweep->add_flag("--deterministic", deterministic, "force serial execution");
  p_sweep->add_option("--out", out, "output directory (default $ECHOSTRAIN_OUT/sweep)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::Validation);
  }

  try {
    const auto load_settings = [&](const CLI::Option* seed_opt, const CLI::Option* jobs_opt) {
      config::RunSettings settings;
      if (!config_path.empty()) {
        settings = config::settings_from_json(io::read_file(config_path));
      }
      if (seed_opt != nullptr && seed_opt->count() > 0) {
        settings.seed = seed;
      }
      if (jobs_opt != nullptr && jobs_opt->count() > 0) {
        if (jobs < 1) {
          throw ValidationError("--jobs must be at least 1");
        }
        settings.jobs = jobs;
      }
      if (deterministic) {
        settings.deterministic = true;
        settings.jobs = 1;
      }
      if (!ratios_csv.empty()) {
        settings.ratios = parse_ratio_list(ratios_csv);
      }
      return settings;
    };

    if (p_phantom->parsed()) {
      return cmd_phantom(load_settings(phantom_seed, phantom_jobs), resolve_out(out, "dataset"));
    }
    if (p_verify->parsed()) {
      return cmd_verify(dataset);
    }
    if (p_track->parsed()) {
      const config::RunSettings overrides = load_settings(nullptr, track_jobs);
      return cmd_track(dataset, mode, input, kind, overrides, !config_path.empty(), overrides.jobs,
                       resolve_out(out, "motion"));
    }
    if (p_strain->parsed()) {
      if (smoothing_window != 0 && (smoothing_window < 1 || smoothing_window % 2 == 0)) {
        throw ValidationError("--smoothing-window must be a positive odd integer");
      }
      return cmd_strain(dataset, motion, smoothing_window, resolve_out(out, "strain"));
    }
    if (p_eval->parsed()) {
      const std::vector<std::string> levels =
          levels_csv.empty() ? std::vector<std::string>{} : parse_level_list(levels_csv);
      const bool dataset_form = !dataset.empty() || !strain_dir.empty();
      const bool sweep_form = !sweep_dir.empty();
      if (dataset_form == sweep_form) {
        throw ValidationError("eval needs either a dataset with --strain, or --sweep");
      }
      if (sweep_form) {
        return cmd_eval_sweep(sweep_dir, levels, resolve_out(out, "eval"));
      }
      if (dataset.empty() || strain_dir.empty()) {
        throw ValidationError("eval needs both a dataset and --strain");
      }
      return cmd_eval_dataset(dataset, strain_dir, levels, resolve_out(out, "eval"));
    }
    if (p_sweep->parsed()) {
      return cmd_sweep(load_settings(sweep_seed, sweep_jobs), resolve_out(out, "sweep"));
    }
    throw ValidationError("no subcommand selected");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Internal);
  }
}

}  // namespace echostrain::cli

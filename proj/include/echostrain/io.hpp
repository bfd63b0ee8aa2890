#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "echostrain/evaluation.hpp"
#include "echostrain/geometry.hpp"
#include "echostrain/phantom.hpp"
#include "echostrain/speckle.hpp"
#include "echostrain/strain.hpp"
#include "echostrain/tracking.hpp"

namespace echostrain::io {

// Serializers are deterministic: the same value always produces the same
// bytes, and write -> read -> write reproduces files byte for byte. Doubles
// are printed with the shortest representation that parses back exactly.

std::string read_file(const std::string& path);

// Writes to path + ".partial" and renames into place, so a failed write
// never leaves a readable file at the final path.
void write_file_atomic(const std::string& path, std::string_view bytes);

uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Structured text with endo/epi vertex arrays, apex_index, frame_index,
// and a units tag fixed to millimeters.
std::string mesh_to_json(const geom::MyocardialMesh& mesh);
geom::MyocardialMesh mesh_from_json(const std::string& text);

// Binary PGM, P5 with maxval 255.
std::string pgm_to_bytes(const speckle::BModeFrame& frame);
speckle::BModeFrame pgm_from_bytes(const std::string& bytes, int frame_index = 0);

// Flow record: magic "STRNFLW1", then width, height, from_frame, to_frame
// as u32 and pixel_pitch as f32, all little-endian, then row-major f32
// dx,dy pairs. A file may hold several records back to back.
std::string flow_to_bytes(const tracking::DisplacementField& field);
std::string flow_sequence_to_bytes(const std::vector<tracking::DisplacementField>& fields);
std::vector<tracking::DisplacementField> flow_sequence_from_bytes(const std::string& bytes);

// Trajectory file: magic "STRNTRJ1", header n_points, n_frames,
// reference_frame as u32, then per frame per point f32 x,y in mm and a u8
// visibility flag.
std::string trajectories_to_bytes(const tracking::PointTrajectories& traj);
tracking::PointTrajectories trajectories_from_bytes(const std::string& bytes);

// Scatterer file: magic "STRNSCT1", header frame_index and count as u32
// and coherence_ratio as f32, then per scatterer f32 x,y,amplitude, u8
// coherent flag, u8 region.
std::string scatterers_to_bytes(const phantom::ScattererField& field);
phantom::ScattererField scatterers_from_bytes(const std::string& bytes);

enum class ExternalKind { Flow, Trajectory };

// Entry point for externally produced motion artifacts. Parses, checks
// magic, shapes, and finiteness, and reports the offending record on
// failure.
std::variant<std::vector<tracking::DisplacementField>, tracking::PointTrajectories> ingest_external(
    const std::string& path, ExternalKind kind);

// CSV with header frame,segment,strain_percent, frame-major rows. The ed
// and es indices travel in the summary document, not the CSV.
std::string strain_curve_to_csv(const strain::StrainCurve& curve);
strain::StrainCurve strain_curve_from_csv(const std::string& text, int ed_index = 0,
                                          int es_index = 0);

std::string strain_summary_to_json(const strain::StrainSummary& summary);
strain::StrainSummary strain_summary_from_json(const std::string& text);

// Long-format CSV with header scope,key,value_mm covering per-frame means,
// sequence mean and sd, and per-segment means.
std::string distance_report_to_csv(const eval::DistanceErrorReport& report);
eval::DistanceErrorReport distance_report_from_csv(const std::string& text);

std::string agreement_to_csv(const eval::AgreementReport& report);
eval::AgreementReport agreement_from_csv(const std::string& text);

// Seed-aggregated sweep table, one row per coherence ratio.
std::string sweep_rows_to_csv(const std::vector<eval::SweepRow>& rows);
std::vector<eval::SweepRow> sweep_rows_from_csv(const std::string& text);

// Plot-ready long format with header coherence_ratio,seed,metric,value and
// one metric per line; per-segment peaks use metric names like
// tracked_peak_sls/mid_septal.
std::string sweep_cells_to_long_csv(const std::vector<eval::SweepCell>& cells);
std::vector<eval::SweepCell> sweep_cells_from_long_csv(const std::string& text);

struct FileRecord {
  std::string path;  // relative to the manifest directory
  uint64_t bytes = 0;
  std::string hash;  // fnv1a64 hex
};

// Reproducibility record for one command invocation: configuration, seed,
// tool version, and content hashes of every artifact it wrote.
struct RunManifest {
  std::string tool_name;
  std::string tool_version;
  std::string command;
  uint64_t seed = 0;
  std::string config_json = "{}";
  std::vector<FileRecord> files;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

FileRecord record_file(const std::string& root, const std::string& relative_path);
void write_manifest(const std::string& root, const RunManifest& manifest);
RunManifest read_manifest(const std::string& root);

// Rehashes every recorded file and reports missing or modified artifacts
// as staleness.
void verify_manifest(const std::string& root, const RunManifest& manifest);

}  // namespace echostrain::io

#include "echostrain/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <system_error>

#include "echostrain/errors.hpp"
#include "json.hpp"

namespace echostrain::io {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_u64(uint64_t v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError(what + ": '" + std::string(text) + "' is not a number");
  }
  return v;
}

uint64_t parse_u64(std::string_view text, const std::string& what) {
  uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError(what + ": '" + std::string(text) + "' is not a non-negative integer");
  }
  return v;
}

int parse_int(std::string_view text, const std::string& what) {
  int v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError(what + ": '" + std::string(text) + "' is not an integer");
  }
  return v;
}

void check_csv_token(std::string_view token, const std::string& what) {
  if (token.find_first_of(",\r\n") != std::string_view::npos) {
    throw FormatError(what + " '" + std::string(token) + "' cannot be stored in CSV");
  }
}

std::vector<std::string_view> split_lines(const std::string& text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      end = text.size();
    }
    lines.emplace_back(text.data() + start, end - start);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  for (;;) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void expect_header(const std::vector<std::string_view>& lines, std::string_view header,
                   const std::string& what) {
  if (lines.empty() || lines.front() != header) {
    throw FormatError(what + ": expected header '" + std::string(header) + "'");
  }
}

const std::vector<std::string_view> fields_of(std::string_view line, size_t expected,
                                              const std::string& what) {
  std::vector<std::string_view> fields = split_fields(line);
  if (fields.size() != expected) {
    throw FormatError(what + ": expected " + std::to_string(expected) + " fields, got " +
                      std::to_string(fields.size()));
  }
  return fields;
}

// Little-endian binary layer.

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

struct Reader {
  std::string_view bytes;
  size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }
  size_t remaining() const { return bytes.size() - pos; }

  void need(size_t n, const std::string& what) {
    if (pos + n > bytes.size()) {
      throw FormatError(what + " is truncated");
    }
  }

  void magic(std::string_view expected, const std::string& what) {
    need(expected.size(), what);
    if (bytes.substr(pos, expected.size()) != expected) {
      throw FormatError(what + ": bad magic, expected '" + std::string(expected) + "'");
    }
    pos += expected.size();
  }

  uint32_t u32_raw() {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    pos += 4;
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  }

  uint32_t u32(const std::string& what) {
    need(4, what);
    return u32_raw();
  }

  float f32_raw() { return std::bit_cast<float>(u32_raw()); }

  float f32(const std::string& what) {
    need(4, what);
    return f32_raw();
  }

  uint8_t u8_raw() { return static_cast<uint8_t>(bytes[pos++]); }
};

void check_no_trailing(const Reader& reader, const std::string& what) {
  if (!reader.eof()) {
    throw FormatError(what + " has " + std::to_string(reader.remaining()) + " trailing bytes");
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

const json& field_of(const json& j, const char* key, const std::string& what) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw FormatError(what + ": missing field '" + key + "'");
  }
  return *it;
}

geom::Contour contour_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array()) {
    throw FormatError(what + " must be an array of [x, y] pairs");
  }
  geom::Contour contour;
  contour.points.reserve(arr.size());
  for (const json& entry : arr) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() || !entry[1].is_number()) {
      throw FormatError(what + " must be an array of [x, y] pairs");
    }
    contour.points.push_back({entry[0].get<double>(), entry[1].get<double>()});
  }
  return contour;
}

json contour_to_json(const geom::Contour& contour) {
  json arr = json::array();
  for (const geom::Point2D& p : contour.points) {
    arr.push_back(json::array({p.x, p.y}));
  }
  return arr;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read '" + path + "'");
  }
  std::string bytes;
  in.seekg(0, std::ios::end);
  const std::streampos end = in.tellg();
  if (end < 0) {
    throw IoError("cannot read '" + path + "'");
  }
  bytes.resize(static_cast<size_t>(end));
  in.seekg(0, std::ios::beg);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!in) {
    throw IoError("failed while reading '" + path + "'");
  }
  return bytes;
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
  const std::string partial = path + ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open '" + partial + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(partial, ec);
      throw IoError("failed while writing '" + partial + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(partial, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(partial, ignored);
    throw IoError("cannot move '" + partial + "' into place: " + ec.message());
  }
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t hash = 0xcbf29ce484222325ull;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string fnv1a64_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  uint64_t hash = fnv1a64(bytes);
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i) {
    hex[static_cast<size_t>(i)] = digits[hash & 0xF];
    hash >>= 4;
  }
  return hex;
}

std::string mesh_to_json(const geom::MyocardialMesh& mesh) {
  geom::validate_mesh(mesh);
  json j;
  j["endo"] = contour_to_json(mesh.endo);
  j["epi"] = contour_to_json(mesh.epi);
  j["apex_index"] = mesh.apex_index;
  j["frame_index"] = mesh.frame_index;
  j["units"] = "mm";
  return j.dump(2) + "\n";
}

geom::MyocardialMesh mesh_from_json(const std::string& text) {
  const json j = parse_json(text, "mesh file");
  if (!j.is_object()) {
    throw FormatError("mesh file: top level must be an object");
  }
  const json& units = field_of(j, "units", "mesh file");
  if (!units.is_string() || units.get<std::string>() != "mm") {
    throw FormatError("mesh file: units must be \"mm\"");
  }
  geom::MyocardialMesh mesh;
  mesh.endo = contour_from_json(field_of(j, "endo", "mesh file"), "mesh file: endo");
  mesh.epi = contour_from_json(field_of(j, "epi", "mesh file"), "mesh file: epi");
  const json& apex = field_of(j, "apex_index", "mesh file");
  const json& frame = field_of(j, "frame_index", "mesh file");
  if (!apex.is_number_integer() || !frame.is_number_integer()) {
    throw FormatError("mesh file: apex_index and frame_index must be integers");
  }
  mesh.apex_index = apex.get<int>();
  mesh.frame_index = frame.get<int>();
  geom::validate_mesh(mesh);
  return mesh;
}

std::string pgm_to_bytes(const speckle::BModeFrame& frame) {
  if (frame.width <= 0 || frame.height <= 0 ||
      frame.px.size() != static_cast<size_t>(frame.width) * static_cast<size_t>(frame.height)) {
    throw ValidationError("frame dimensions do not match its pixel buffer");
  }
  std::string out = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(frame.px.data()), frame.px.size());
  return out;
}

speckle::BModeFrame pgm_from_bytes(const std::string& bytes, int frame_index) {
  size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < bytes.size() && (bytes[pos] == ' ' || bytes[pos] == '\t' || bytes[pos] == '\n' ||
                                  bytes[pos] == '\r')) {
      ++pos;
    }
  };
  const auto token = [&](const char* what) {
    skip_space();
    const size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != ' ' && bytes[pos] != '\t' && bytes[pos] != '\n' &&
           bytes[pos] != '\r') {
      ++pos;
    }
    if (start == pos) {
      throw FormatError(std::string("pgm file: missing ") + what);
    }
    return std::string_view(bytes.data() + start, pos - start);
  };

  if (token("magic") != "P5") {
    throw FormatError("pgm file: bad magic, expected 'P5'");
  }
  const int width = parse_int(token("width"), "pgm file: width");
  const int height = parse_int(token("height"), "pgm file: height");
  const int maxval = parse_int(token("maxval"), "pgm file: maxval");
  if (width <= 0 || height <= 0) {
    throw FormatError("pgm file: non-positive dimensions");
  }
  if (maxval != 255) {
    throw FormatError("pgm file: maxval must be 255");
  }
  if (pos >= bytes.size()) {
    throw FormatError("pgm file is truncated");
  }
  ++pos;  // single whitespace byte separating header and raster

  const size_t n = static_cast<size_t>(width) * static_cast<size_t>(height);
  if (bytes.size() - pos < n) {
    throw FormatError("pgm file is truncated");
  }
  if (bytes.size() - pos > n) {
    throw FormatError("pgm file has trailing bytes");
  }
  speckle::BModeFrame frame;
  frame.width = width;
  frame.height = height;
  frame.frame_index = frame_index;
  frame.px.resize(n);
  std::memcpy(frame.px.data(), bytes.data() + pos, n);
  return frame;
}

std::string flow_to_bytes(const tracking::DisplacementField& field) {
  tracking::validate_field(field);
  std::string out;
  out.reserve(24 + field.dx.size() * 8);
  out += "STRNFLW1";
  put_u32(out, static_cast<uint32_t>(field.width));
  put_u32(out, static_cast<uint32_t>(field.height));
  put_u32(out, static_cast<uint32_t>(field.from_frame));
  put_u32(out, static_cast<uint32_t>(field.to_frame));
  put_f32(out, static_cast<float>(field.pixel_pitch));
  for (size_t i = 0; i < field.dx.size(); ++i) {
    put_f32(out, field.dx[i]);
    put_f32(out, field.dy[i]);
  }
  return out;
}

std::string flow_sequence_to_bytes(const std::vector<tracking::DisplacementField>& fields) {
  std::string out;
  for (const tracking::DisplacementField& field : fields) {
    out += flow_to_bytes(field);
  }
  return out;
}

std::vector<tracking::DisplacementField> flow_sequence_from_bytes(const std::string& bytes) {
  Reader reader{bytes};
  std::vector<tracking::DisplacementField> fields;
  while (!reader.eof()) {
    const std::string record = "flow record " + std::to_string(fields.size());
    reader.magic("STRNFLW1", record);
    const uint32_t width = reader.u32(record);
    const uint32_t height = reader.u32(record);
    const uint32_t from_frame = reader.u32(record);
    const uint32_t to_frame = reader.u32(record);
    const float pitch = reader.f32(record);

    const std::string where = record + " (frames " + std::to_string(from_frame) + " -> " +
                              std::to_string(to_frame) + ")";
    if (width == 0 || height == 0) {
      throw FormatError(where + ": empty field");
    }
    const int64_t gap = static_cast<int64_t>(to_frame) - static_cast<int64_t>(from_frame);
    if (gap != 1 && gap != -1) {
      throw FormatError(where + ": frames are not adjacent");
    }
    if (!(std::isfinite(pitch) && pitch > 0.0f)) {
      throw FormatError(where + ": pixel pitch must be a positive finite number");
    }

    const size_t n = static_cast<size_t>(width) * static_cast<size_t>(height);
    reader.need(8 * n, where);
    tracking::DisplacementField field;
    field.width = static_cast<int>(width);
    field.height = static_cast<int>(height);
    field.from_frame = static_cast<int>(from_frame);
    field.to_frame = static_cast<int>(to_frame);
    field.pixel_pitch = static_cast<double>(pitch);
    field.dx.resize(n);
    field.dy.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const float dx = reader.f32_raw();
      const float dy = reader.f32_raw();
      if (!std::isfinite(dx) || !std::isfinite(dy)) {
        const size_t x = i % width;
        const size_t y = i / width;
        throw FormatError(where + ": non-finite " + (std::isfinite(dx) ? "dy" : "dx") +
                          " at pixel (" + std::to_string(x) + ", " + std::to_string(y) + ")");
      }
      field.dx[i] = dx;
      field.dy[i] = dy;
    }
    fields.push_back(std::move(field));
  }
  return fields;
}

std::string trajectories_to_bytes(const tracking::PointTrajectories& traj) {
  tracking::validate_trajectories(traj);
  std::string out;
  out.reserve(20 + traj.positions.size() * traj.positions.front().size() * 9);
  out += "STRNTRJ1";
  put_u32(out, static_cast<uint32_t>(traj.n_points));
  put_u32(out, static_cast<uint32_t>(traj.n_frames));
  put_u32(out, static_cast<uint32_t>(traj.reference_frame));
  for (int t = 0; t < traj.n_frames; ++t) {
    const auto& frame = traj.positions[static_cast<size_t>(t)];
    const auto& vis = traj.visibility[static_cast<size_t>(t)];
    for (int p = 0; p < traj.n_points; ++p) {
      put_f32(out, static_cast<float>(frame[static_cast<size_t>(p)].x));
      put_f32(out, static_cast<float>(frame[static_cast<size_t>(p)].y));
      out.push_back(static_cast<char>(vis[static_cast<size_t>(p)]));
    }
  }
  return out;
}

tracking::PointTrajectories trajectories_from_bytes(const std::string& bytes) {
  Reader reader{bytes};
  reader.magic("STRNTRJ1", "trajectory file");
  const uint32_t n_points = reader.u32("trajectory file header");
  const uint32_t n_frames = reader.u32("trajectory file header");
  const uint32_t reference = reader.u32("trajectory file header");
  if (n_points == 0 || n_frames == 0) {
    throw FormatError("trajectory file: empty point or frame count");
  }
  if (reference >= n_frames) {
    throw FormatError("trajectory file: reference frame " + std::to_string(reference) +
                      " is outside the " + std::to_string(n_frames) + " frames");
  }

  tracking::PointTrajectories traj;
  traj.n_points = static_cast<int>(n_points);
  traj.n_frames = static_cast<int>(n_frames);
  traj.reference_frame = static_cast<int>(reference);
  traj.positions.resize(n_frames);
  traj.visibility.resize(n_frames);
  for (uint32_t t = 0; t < n_frames; ++t) {
    const std::string where = "trajectory file ends before frame " + std::to_string(t);
    if (reader.remaining() < 9ull * n_points) {
      throw FormatError(where);
    }
    auto& frame = traj.positions[t];
    auto& vis = traj.visibility[t];
    frame.resize(n_points);
    vis.resize(n_points);
    for (uint32_t p = 0; p < n_points; ++p) {
      const float x = reader.f32_raw();
      const float y = reader.f32_raw();
      const uint8_t visible = reader.u8_raw();
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw FormatError("trajectory file: non-finite position at frame " + std::to_string(t) +
                          " point " + std::to_string(p));
      }
      if (visible > 1) {
        throw FormatError("trajectory file: visibility flag at frame " + std::to_string(t) +
                          " point " + std::to_string(p) + " must be 0 or 1");
      }
      frame[p] = {static_cast<double>(x), static_cast<double>(y)};
      vis[p] = visible;
    }
  }
  check_no_trailing(reader, "trajectory file");
  return traj;
}

std::string scatterers_to_bytes(const phantom::ScattererField& field) {
  const size_t count = field.positions.size();
  if (field.amplitudes.size() != count || field.coherent.size() != count ||
      field.regions.size() != count) {
    throw ValidationError("scatterer field arrays disagree in length");
  }
  std::string out;
  out.reserve(24 + count * 14);
  out += "STRNSCT1";
  put_u32(out, static_cast<uint32_t>(field.frame_index));
  put_u32(out, static_cast<uint32_t>(count));
  put_f32(out, static_cast<float>(field.coherence_ratio));
  for (size_t i = 0; i < count; ++i) {
    put_f32(out, static_cast<float>(field.positions[i].x));
    put_f32(out, static_cast<float>(field.positions[i].y));
    put_f32(out, field.amplitudes[i]);
    out.push_back(static_cast<char>(field.coherent[i] ? 1 : 0));
    out.push_back(static_cast<char>(static_cast<uint8_t>(field.regions[i])));
  }
  return out;
}

phantom::ScattererField scatterers_from_bytes(const std::string& bytes) {
  Reader reader{bytes};
  reader.magic("STRNSCT1", "scatterer file");
  const uint32_t frame_index = reader.u32("scatterer file header");
  const uint32_t count = reader.u32("scatterer file header");
  const float ratio = reader.f32("scatterer file header");
  if (!(std::isfinite(ratio) && ratio >= 0.0f && ratio <= 1.0f)) {
    throw FormatError("scatterer file: coherence ratio must lie in [0, 1]");
  }

  phantom::ScattererField field;
  field.frame_index = static_cast<int>(frame_index);
  field.coherence_ratio = static_cast<double>(ratio);
  field.positions.resize(count);
  field.amplitudes.resize(count);
  field.coherent.resize(count);
  field.regions.resize(count);
  reader.need(14ull * count, "scatterer file");
  for (uint32_t i = 0; i < count; ++i) {
    const std::string record = "scatterer record " + std::to_string(i);
    const float x = reader.f32_raw();
    const float y = reader.f32_raw();
    const float amp = reader.f32_raw();
    const uint8_t coherent = reader.u8_raw();
    const uint8_t region = reader.u8_raw();
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw FormatError(record + ": non-finite position");
    }
    if (!(std::isfinite(amp) && amp >= 0.0f)) {
      throw FormatError(record + ": amplitude must be finite and non-negative");
    }
    if (coherent > 1) {
      throw FormatError(record + ": coherent flag must be 0 or 1");
    }
    if (region > 2) {
      throw FormatError(record + ": unknown region code " + std::to_string(region));
    }
    field.positions[i] = {static_cast<double>(x), static_cast<double>(y)};
    field.amplitudes[i] = amp;
    field.coherent[i] = coherent;
    field.regions[i] = static_cast<phantom::Region>(region);
  }
  check_no_trailing(reader, "scatterer file");
  return field;
}

std::variant<std::vector<tracking::DisplacementField>, tracking::PointTrajectories> ingest_external(
    const std::string& path, ExternalKind kind) {
  const std::string bytes = read_file(path);
  try {
    if (kind == ExternalKind::Flow) {
      std::vector<tracking::DisplacementField> fields = flow_sequence_from_bytes(bytes);
      if (fields.empty()) {
        throw FormatError("flow file '" + path + "' holds no records");
      }
      for (const tracking::DisplacementField& field : fields) {
        tracking::validate_field(field);
      }
      return fields;
    }
    tracking::PointTrajectories traj = trajectories_from_bytes(bytes);
    tracking::validate_trajectories(traj);
    return traj;
  } catch (const FormatError&) {
    throw;
  } catch (const ValidationError& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

std::string strain_curve_to_csv(const strain::StrainCurve& curve) {
  if (curve.segment_labels.size() != curve.values.size()) {
    throw ValidationError("strain curve labels and value rows disagree");
  }
  const size_t n_frames = curve.values.empty() ? 0 : curve.values.front().size();
  for (const auto& row : curve.values) {
    if (row.size() != n_frames) {
      throw ValidationError("strain curve rows have unequal frame counts");
    }
  }
  std::string out = "frame,segment,strain_percent\n";
  for (size_t t = 0; t < n_frames; ++t) {
    for (size_t s = 0; s < curve.segment_labels.size(); ++s) {
      check_csv_token(curve.segment_labels[s], "segment label");
      out += format_u64(t);
      out += ',';
      out += curve.segment_labels[s];
      out += ',';
      out += format_double(curve.values[s][t]);
      out += '\n';
    }
  }
  return out;
}

strain::StrainCurve strain_curve_from_csv(const std::string& text, int ed_index, int es_index) {
  const std::vector<std::string_view> lines = split_lines(text);
  expect_header(lines, "frame,segment,strain_percent", "strain csv");

  strain::StrainCurve curve;
  curve.ed_index = ed_index;
  curve.es_index = es_index;
  size_t n_segments = 0;
  for (size_t r = 1; r < lines.size(); ++r) {
    const std::string where = "strain csv line " + std::to_string(r + 1);
    const auto fields = fields_of(lines[r], 3, where);
    const uint64_t t = parse_u64(fields[0], where + ": frame");
    const std::string label(fields[1]);
    const double value = parse_double(fields[2], where + ": strain");

    const size_t row = r - 1;
    if (n_segments == 0 && t == 0) {
      curve.segment_labels.push_back(label);
      curve.values.push_back({value});
      continue;
    }
    if (n_segments == 0) {
      n_segments = curve.segment_labels.size();
    }
    if (n_segments == 0) {
      throw FormatError(where + ": rows must start at frame 0");
    }
    const size_t expected_t = row / n_segments;
    const size_t expected_s = row % n_segments;
    if (t != expected_t || label != curve.segment_labels[expected_s]) {
      throw FormatError(where + ": rows must iterate frames in order with a fixed segment set");
    }
    if (expected_s == 0) {
      for (auto& values : curve.values) {
        values.reserve(expected_t + 1);
      }
    }
    curve.values[expected_s].push_back(value);
  }
  if (curve.segment_labels.empty()) {
    throw FormatError("strain csv has no data rows");
  }
  const size_t n_frames = curve.values.front().size();
  for (const auto& row : curve.values) {
    if (row.size() != n_frames) {
      throw FormatError("strain csv ends mid-frame");
    }
  }
  return curve;
}

std::string strain_summary_to_json(const strain::StrainSummary& summary) {
  json j;
  j["segment_labels"] = summary.segment_labels;
  j["peak_systolic_sls"] = summary.peak_systolic_sls;
  j["gls_curve"] = summary.gls_curve;
  j["peak_gls"] = summary.peak_gls;
  return j.dump(2) + "\n";
}

strain::StrainSummary strain_summary_from_json(const std::string& text) {
  const json j = parse_json(text, "strain summary");
  strain::StrainSummary summary;
  try {
    field_of(j, "segment_labels", "strain summary").get_to(summary.segment_labels);
    field_of(j, "peak_systolic_sls", "strain summary").get_to(summary.peak_systolic_sls);
    field_of(j, "gls_curve", "strain summary").get_to(summary.gls_curve);
    field_of(j, "peak_gls", "strain summary").get_to(summary.peak_gls);
  } catch (const json::exception& e) {
    throw FormatError(std::string("strain summary: ") + e.what());
  }
  if (summary.segment_labels.size() != summary.peak_systolic_sls.size()) {
    throw FormatError("strain summary: labels and peaks disagree in length");
  }
  return summary;
}

std::string distance_report_to_csv(const eval::DistanceErrorReport& report) {
  if (report.segment_labels.size() != report.per_segment_mean.size()) {
    throw ValidationError("distance report labels and segment means disagree");
  }
  std::string out = "scope,key,value_mm\n";
  for (size_t f = 0; f < report.per_frame_mean.size(); ++f) {
    out += "frame," + format_u64(f) + ',' + format_double(report.per_frame_mean[f]) + '\n';
  }
  out += "sequence,mean," + format_double(report.sequence_mean) + '\n';
  out += "sequence,sd," + format_double(report.sequence_sd) + '\n';
  for (size_t s = 0; s < report.segment_labels.size(); ++s) {
    check_csv_token(report.segment_labels[s], "segment label");
    out += "segment," + report.segment_labels[s] + ',' +
           format_double(report.per_segment_mean[s]) + '\n';
  }
  return out;
}

eval::DistanceErrorReport distance_report_from_csv(const std::string& text) {
  const std::vector<std::string_view> lines = split_lines(text);
  expect_header(lines, "scope,key,value_mm", "distance report");
  eval::DistanceErrorReport report;
  bool saw_mean = false;
  bool saw_sd = false;
  for (size_t r = 1; r < lines.size(); ++r) {
    const std::string where = "distance report line " + std::to_string(r + 1);
    const auto fields = fields_of(lines[r], 3, where);
    const double value = parse_double(fields[2], where + ": value");
    if (fields[0] == "frame") {
      if (parse_u64(fields[1], where + ": frame") != report.per_frame_mean.size()) {
        throw FormatError(where + ": frame rows must be consecutive from 0");
      }
      report.per_frame_mean.push_back(value);
    } else if (fields[0] == "sequence") {
      if (fields[1] == "mean") {
        report.sequence_mean = value;
        saw_mean = true;
      } else if (fields[1] == "sd") {
        report.sequence_sd = value;
        saw_sd = true;
      } else {
        throw FormatError(where + ": unknown sequence key");
      }
    } else if (fields[0] == "segment") {
      report.segment_labels.emplace_back(fields[1]);
      report.per_segment_mean.push_back(value);
    } else {
      throw FormatError(where + ": unknown scope '" + std::string(fields[0]) + "'");
    }
  }
  if (!saw_mean || !saw_sd) {
    throw FormatError("distance report is missing the sequence rows");
  }
  return report;
}

std::string agreement_to_csv(const eval::AgreementReport& report) {
  std::string out = "bias,sd_of_differences,loa_low,loa_high,n_pairs\n";
  out += format_double(report.bias) + ',' + format_double(report.sd_of_differences) + ',' +
         format_double(report.loa_low) + ',' + format_double(report.loa_high) + ',' +
         format_u64(report.n_pairs) + '\n';
  return out;
}

eval::AgreementReport agreement_from_csv(const std::string& text) {
  const std::vector<std::string_view> lines = split_lines(text);
  expect_header(lines, "bias,sd_of_differences,loa_low,loa_high,n_pairs", "agreement report");
  if (lines.size() != 2) {
    throw FormatError("agreement report must hold exactly one data row");
  }
  const auto fields = fields_of(lines[1], 5, "agreement report row");
  eval::AgreementReport report;
  report.bias = parse_double(fields[0], "agreement report: bias");
  report.sd_of_differences = parse_double(fields[1], "agreement report: sd");
  report.loa_low = parse_double(fields[2], "agreement report: loa_low");
  report.loa_high = parse_double(fields[3], "agreement report: loa_high");
  report.n_pairs = parse_u64(fields[4], "agreement report: n_pairs");
  return report;
}

std::string sweep_rows_to_csv(const std::vector<eval::SweepRow>& rows) {
  std::string out =
      "coherence_ratio,n_seeds,mean_error_mm,sd_error_mm,sls_bias,sls_sd,sls_loa_low,sls_loa_high,"
      "sls_n_pairs\n";
  for (const eval::SweepRow& row : rows) {
    out += format_double(row.coherence_ratio) + ',' + format_u64(row.n_seeds) + ',' +
           format_double(row.mean_error_mm) + ',' + format_double(row.sd_error_mm) + ',' +
           format_double(row.sls_agreement.bias) + ',' +
           format_double(row.sls_agreement.sd_of_differences) + ',' +
           format_double(row.sls_agreement.loa_low) + ',' +
           format_double(row.sls_agreement.loa_high) + ',' +
           format_u64(row.sls_agreement.n_pairs) + '\n';
  }
  return out;
}

std::vector<eval::SweepRow> sweep_rows_from_csv(const std::string& text) {
  const std::vector<std::string_view> lines = split_lines(text);
  expect_header(
      lines,
      "coherence_ratio,n_seeds,mean_error_mm,sd_error_mm,sls_bias,sls_sd,sls_loa_low,sls_loa_high,"
      "sls_n_pairs",
      "sweep table");
  std::vector<eval::SweepRow> rows;
  for (size_t r = 1; r < lines.size(); ++r) {
    const std::string where = "sweep table line " + std::to_string(r + 1);
    const auto fields = fields_of(lines[r], 9, where);
    eval::SweepRow row;
    row.coherence_ratio = parse_double(fields[0], where + ": ratio");
    row.n_seeds = parse_u64(fields[1], where + ": n_seeds");
    row.mean_error_mm = parse_double(fields[2], where + ": mean error");
    row.sd_error_mm = parse_double(fields[3], where + ": sd error");
    row.sls_agreement.bias = parse_double(fields[4], where + ": sls bias");
    row.sls_agreement.sd_of_differences = parse_double(fields[5], where + ": sls sd");
    row.sls_agreement.loa_low = parse_double(fields[6], where + ": sls loa_low");
    row.sls_agreement.loa_high = parse_double(fields[7], where + ": sls loa_high");
    row.sls_agreement.n_pairs = parse_u64(fields[8], where + ": sls n_pairs");
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_cells_to_long_csv(const std::vector<eval::SweepCell>& cells) {
  std::string out = "coherence_ratio,seed,metric,value\n";
  for (const eval::SweepCell& cell : cells) {
    if (cell.segment_labels.size() != cell.reference_peak_sls.size() ||
        cell.segment_labels.size() != cell.tracked_peak_sls.size()) {
      throw ValidationError("sweep cell segment arrays disagree in length");
    }
    const std::string prefix = format_double(cell.coherence_ratio) + ',' + format_u64(cell.seed);
    out += prefix + ",sequence_mean_error_mm," + format_double(cell.sequence_mean_error_mm) + '\n';
    out += prefix + ",sequence_sd_error_mm," + format_double(cell.sequence_sd_error_mm) + '\n';
    out += prefix + ",reference_peak_gls," + format_double(cell.reference_peak_gls) + '\n';
    out += prefix + ",tracked_peak_gls," + format_double(cell.tracked_peak_gls) + '\n';
    for (size_t s = 0; s < cell.segment_labels.size(); ++s) {
      check_csv_token(cell.segment_labels[s], "segment label");
      out += prefix + ",reference_peak_sls/" + cell.segment_labels[s] + ',' +
             format_double(cell.reference_peak_sls[s]) + '\n';
    }
    for (size_t s = 0; s < cell.segment_labels.size(); ++s) {
      out += prefix + ",tracked_peak_sls/" + cell.segment_labels[s] + ',' +
             format_double(cell.tracked_peak_sls[s]) + '\n';
    }
  }
  return out;
}

std::vector<eval::SweepCell> sweep_cells_from_long_csv(const std::string& text) {
  const std::vector<std::string_view> lines = split_lines(text);
  expect_header(lines, "coherence_ratio,seed,metric,value", "sweep long table");

  std::vector<eval::SweepCell> cells;
  std::string current_key;
  for (size_t r = 1; r < lines.size(); ++r) {
    const std::string where = "sweep long table line " + std::to_string(r + 1);
    const auto fields = fields_of(lines[r], 4, where);
    const std::string key = std::string(fields[0]) + "," + std::string(fields[1]);
    if (key != current_key) {
      eval::SweepCell cell;
      cell.coherence_ratio = parse_double(fields[0], where + ": ratio");
      cell.seed = parse_u64(fields[1], where + ": seed");
      cells.push_back(cell);
      current_key = key;
    }
    eval::SweepCell& cell = cells.back();
    const std::string_view metric = fields[2];
    const double value = parse_double(fields[3], where + ": value");
    if (metric == "sequence_mean_error_mm") {
      cell.sequence_mean_error_mm = value;
    } else if (metric == "sequence_sd_error_mm") {
      cell.sequence_sd_error_mm = value;
    } else if (metric == "reference_peak_gls") {
      cell.reference_peak_gls = value;
    } else if (metric == "tracked_peak_gls") {
      cell.tracked_peak_gls = value;
    } else if (metric.rfind("reference_peak_sls/", 0) == 0) {
      cell.segment_labels.emplace_back(metric.substr(19));
      cell.reference_peak_sls.push_back(value);
    } else if (metric.rfind("tracked_peak_sls/", 0) == 0) {
      const size_t i = cell.tracked_peak_sls.size();
      if (i >= cell.segment_labels.size() ||
          cell.segment_labels[i] != metric.substr(17)) {
        throw FormatError(where + ": tracked segments must mirror the reference segments");
      }
      cell.tracked_peak_sls.push_back(value);
    } else {
      throw FormatError(where + ": unknown metric '" + std::string(metric) + "'");
    }
  }
  for (const eval::SweepCell& cell : cells) {
    if (cell.tracked_peak_sls.size() != cell.reference_peak_sls.size()) {
      throw FormatError("sweep long table: a cell is missing tracked segment rows");
    }
  }
  return cells;
}

std::string manifest_to_json(const RunManifest& manifest) {
  json j;
  j["tool"] = manifest.tool_name;
  j["version"] = manifest.tool_version;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["config"] = parse_json(manifest.config_json, "manifest config");
  json files = json::array();
  for (const FileRecord& record : manifest.files) {
    json entry;
    entry["path"] = record.path;
    entry["bytes"] = record.bytes;
    entry["hash"] = record.hash;
    files.push_back(entry);
  }
  j["files"] = files;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  const json j = parse_json(text, "manifest");
  RunManifest manifest;
  try {
    field_of(j, "tool", "manifest").get_to(manifest.tool_name);
    field_of(j, "version", "manifest").get_to(manifest.tool_version);
    field_of(j, "command", "manifest").get_to(manifest.command);
    field_of(j, "seed", "manifest").get_to(manifest.seed);
    manifest.config_json = field_of(j, "config", "manifest").dump();
    for (const json& entry : field_of(j, "files", "manifest")) {
      FileRecord record;
      field_of(entry, "path", "manifest file entry").get_to(record.path);
      field_of(entry, "bytes", "manifest file entry").get_to(record.bytes);
      field_of(entry, "hash", "manifest file entry").get_to(record.hash);
      manifest.files.push_back(std::move(record));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return manifest;
}

FileRecord record_file(const std::string& root, const std::string& relative_path) {
  const std::string bytes = read_file(root + "/" + relative_path);
  FileRecord record;
  record.path = relative_path;
  record.bytes = bytes.size();
  record.hash = fnv1a64_hex(bytes);
  return record;
}

void write_manifest(const std::string& root, const RunManifest& manifest) {
  write_file_atomic(root + "/manifest.json", manifest_to_json(manifest));
}

RunManifest read_manifest(const std::string& root) {
  return manifest_from_json(read_file(root + "/manifest.json"));
}

void verify_manifest(const std::string& root, const RunManifest& manifest) {
  for (const FileRecord& record : manifest.files) {
    std::string bytes;
    try {
      bytes = read_file(root + "/" + record.path);
    } catch (const IoError&) {
      throw StaleArtifactError("artifact '" + record.path + "' is missing");
    }
    if (bytes.size() != record.bytes || fnv1a64_hex(bytes) != record.hash) {
      throw StaleArtifactError("artifact '" + record.path +
                               "' changed since its manifest was written");
    }
  }
}

}  // namespace echostrain::io

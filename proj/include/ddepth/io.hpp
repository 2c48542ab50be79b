#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ddepth/binning.hpp"
#include "ddepth/distribution.hpp"
#include "ddepth/error.hpp"
#include "ddepth/geometry.hpp"
#include "ddepth/losses.hpp"
#include "ddepth/mapping.hpp"
#include "ddepth/model.hpp"
#include "ddepth/synthworld.hpp"

// Binary payloads are little-endian IEEE-754 float32 regardless of host order.
// Text headers use %.17g so every double survives a write/read round trip.

namespace ddepth::io {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline void append_f32(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

inline std::vector<float> parse_f32(const std::string& bytes, std::size_t offset, std::size_t count,
                                    const std::string& what) {
  if (bytes.size() < offset + 4 * count) throw IoError(what + ": truncated float payload");
  if (bytes.size() != offset + 4 * count) throw IoError(what + ": trailing bytes after payload");
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 4 * i + b])) << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

/// Splits off the first line; returns the offset of the payload after '\n'.
inline std::size_t header_line(const std::string& bytes, std::string& line, const std::string& what) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw IoError(what + ": missing header line");
  line = bytes.substr(0, nl);
  return nl + 1;
}

inline std::string peek_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string magic;
  in >> magic;
  return magic;
}

// ---------------------------------------------------------------------------
// DDMP: "DDMP1 H W K a b\n" + H*W*K float32 probabilities, row-major, bin-fastest.

struct DistributionDump {
  int height = 0;
  int width = 0;
  DepthBinning binning{1.0, 80.0, 64};
  std::vector<float> probs;

  std::span<const float> pixel(std::size_t i) const {
    const auto k = static_cast<std::size_t>(binning.bins());
    return {probs.data() + i * k, k};
  }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  /// Pixel distribution rescaled onto the simplex in double precision.
  DepthDistribution distribution(std::size_t i) const {
    const auto p = pixel(i);
    std::vector<double> w(p.begin(), p.end());
    return DepthDistribution::from_weights(w);
  }
};

inline std::string encode_ddmp(int height, int width, const DepthBinning& binning,
                               std::span<const DepthDistribution> dists) {
  require(dists.size() == static_cast<std::size_t>(height) * width, "ddmp: pixel count mismatch");
  std::string out = "DDMP1 " + std::to_string(height) + " " + std::to_string(width) + " " +
                    std::to_string(binning.bins()) + " " + fmt_double(binning.min_depth()) + " " +
                    fmt_double(binning.max_depth()) + "\n";
  for (const auto& d : dists) {
    require(d.bins() == binning.bins(), "ddmp: bin count mismatch");
    for (double p : d.probs()) append_f32(out, p);
  }
  return out;
}

inline DistributionDump decode_ddmp(const std::string& bytes) {
  std::string line;
  const std::size_t off = header_line(bytes, line, "ddmp");
  std::istringstream hs(line);
  std::string magic;
  int h = 0, w = 0, k = 0;
  double a = 0.0, b = 0.0;
  if (!(hs >> magic >> h >> w >> k >> a >> b) || magic != "DDMP1" || h <= 0 || w <= 0) {
    throw IoError("ddmp: malformed header '" + line + "'");
  }
  DistributionDump d{h, w, DepthBinning(a, b, k), {}};
  d.probs = parse_f32(bytes, off, d.pixels() * static_cast<std::size_t>(k), "ddmp");
  return d;
}

inline void write_ddmp(const std::string& path, int height, int width, const DepthBinning& binning,
                       std::span<const DepthDistribution> dists) {
  write_file(path, encode_ddmp(height, width, binning, dists));
}

inline DistributionDump read_ddmp(const std::string& path) { return decode_ddmp(read_file(path)); }

// ---------------------------------------------------------------------------
// Per-pixel float channels. DIMG: one depth per pixel; DGAU: (mean depth,
// log-space variance); DHYP: M depth hypotheses. "MAGIC H W [C]\n" + floats.

struct ChannelDump {
  std::string magic;
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> values;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  double at(std::size_t pixel, int channel = 0) const {
    return values[pixel * static_cast<std::size_t>(channels) + channel];
  }
};

inline std::string encode_channels(const std::string& magic, int height, int width, int channels,
                                   std::span<const double> values) {
  require(values.size() == static_cast<std::size_t>(height) * width * channels, magic + ": value count mismatch");
  std::string out = magic + " " + std::to_string(height) + " " + std::to_string(width);
  if (magic == "DHYP1") out += " " + std::to_string(channels);
  out += "\n";
  for (double v : values) append_f32(out, v);
  return out;
}

inline ChannelDump decode_channels(const std::string& bytes) {
  std::string line;
  const std::size_t off = header_line(bytes, line, "depth dump");
  std::istringstream hs(line);
  ChannelDump d;
  if (!(hs >> d.magic >> d.height >> d.width) || d.height <= 0 || d.width <= 0) {
    throw IoError("depth dump: malformed header '" + line + "'");
  }
  if (d.magic == "DIMG1") {
    d.channels = 1;
  } else if (d.magic == "DGAU1") {
    d.channels = 2;
  } else if (d.magic == "DHYP1") {
    if (!(hs >> d.channels) || d.channels < 1) throw IoError("depth dump: bad hypothesis count");
  } else {
    throw IoError("depth dump: unknown magic '" + d.magic + "'");
  }
  d.values = parse_f32(bytes, off, d.pixels() * static_cast<std::size_t>(d.channels), d.magic);
  return d;
}

inline void write_dimg(const std::string& path, int height, int width, std::span<const double> depth) {
  write_file(path, encode_channels("DIMG1", height, width, 1, depth));
}

inline ChannelDump read_channels(const std::string& path) { return decode_channels(read_file(path)); }

// ---------------------------------------------------------------------------
// Pixel datasets: "PIXD1 N F\n", a world line, then one text record per pixel:
// surface gt_depth n_modes (depth prob)... features...

inline std::string encode_world(const PixelWorld& w) {
  return "world " + fmt_double(w.min_depth) + " " + fmt_double(w.max_depth) + " " + fmt_double(w.cue_noise) + " " +
         fmt_double(w.depth_noise) + " " + std::to_string(w.nuisance_dims) + " " + fmt_double(w.nuisance_scale) +
         " " + fmt_double(w.min_mode_ratio) + " " + fmt_double(w.max_mode_ratio) + " " + fmt_double(w.near_prob) +
         " " + fmt_double(w.margin);
}

inline PixelWorld decode_world(const std::string& line) {
  std::istringstream s(line);
  std::string tag;
  PixelWorld w;
  if (!(s >> tag >> w.min_depth >> w.max_depth >> w.cue_noise >> w.depth_noise >> w.nuisance_dims >>
        w.nuisance_scale >> w.min_mode_ratio >> w.max_mode_ratio >> w.near_prob >> w.margin) ||
      tag != "world") {
    throw IoError("malformed world line '" + line + "'");
  }
  w.validate();
  return w;
}

struct PixelDataset {
  PixelWorld world;
  std::vector<PixelSample> samples;

  TrainingSet training_set() const {
    TrainingSet t;
    for (const auto& s : samples) {
      t.features.push_back(s.feature);
      t.depths.push_back(s.gt_depth);
    }
    return t;
  }
};

inline std::string encode_dataset(const PixelDataset& data) {
  const std::size_t dim = static_cast<std::size_t>(feature_dim(data.world));
  std::string out = "PIXD1 " + std::to_string(data.samples.size()) + " " + std::to_string(dim) + "\n";
  out += encode_world(data.world) + "\n";
  for (const auto& s : data.samples) {
    require(s.feature.size() == dim, "dataset: feature size mismatch");
    out += std::string(surface_name(s.surface)) + " " + fmt_double(s.gt_depth) + " " +
           std::to_string(s.gt_modes.size());
    for (const auto& m : s.gt_modes) out += " " + fmt_double(m.depth) + " " + fmt_double(m.prob);
    for (double f : s.feature) out += " " + fmt_double(f);
    out += "\n";
  }
  return out;
}

inline PixelDataset decode_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset: empty file");
  std::istringstream hs(line);
  std::string magic;
  std::size_t n = 0, dim = 0;
  if (!(hs >> magic >> n >> dim) || magic != "PIXD1") throw IoError("dataset: malformed header '" + line + "'");
  if (!std::getline(in, line)) throw IoError("dataset: missing world line");
  PixelDataset data;
  data.world = decode_world(line);
  if (dim != static_cast<std::size_t>(feature_dim(data.world))) throw IoError("dataset: feature size mismatch");
  data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw IoError("dataset: truncated after " + std::to_string(i) + " records");
    std::istringstream rs(line);
    PixelSample s;
    std::string surface;
    std::size_t modes = 0;
    if (!(rs >> surface >> s.gt_depth >> modes) || modes < 1 || modes > 2) {
      throw IoError("dataset: malformed record " + std::to_string(i));
    }
    s.surface = parse_surface(surface);
    s.ambiguous = modes == 2;
    s.gt_modes.resize(modes);
    for (auto& m : s.gt_modes) {
      if (!(rs >> m.depth >> m.prob)) throw IoError("dataset: malformed modes in record " + std::to_string(i));
    }
    s.feature.resize(dim);
    for (auto& f : s.feature) {
      if (!(rs >> f)) throw IoError("dataset: malformed features in record " + std::to_string(i));
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

inline void write_dataset(const std::string& path, const PixelDataset& data) { write_file(path, encode_dataset(data)); }
inline PixelDataset read_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

// ---------------------------------------------------------------------------
// Checkpoints: text header terminated by "end\n", then float32 parameters.

struct Checkpoint {
  LossKind loss = LossKind::binary;
  DepthBinning binning{1.0, 80.0, 64};
  double sigma = 0.0;    ///< effective target width used in training
  double dropout = 0.0;  ///< training dropout probability
  PixelWorld world;
  ModelParams params;
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
  const Architecture& arch = ck.params.architecture();
  std::string out = "DDCK1\n";
  out += "loss " + std::string(loss_name(ck.loss)) + "\n";
  out += "binning " + ck.binning.header() + "\n";
  out += "sigma " + fmt_double(ck.sigma) + "\n";
  out += "dropout " + fmt_double(ck.dropout) + "\n";
  out += encode_world(ck.world) + "\n";
  out += "arch " + std::to_string(arch.input_dim);
  for (int h : arch.hidden) out += " " + std::to_string(h);
  out += " " + std::to_string(arch.output_dim) + "\n";
  out += "params " + std::to_string(ck.params.size()) + "\nend\n";
  for (double v : ck.params.values()) append_f32(out, v);
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  const std::string terminator = "\nend\n";
  const auto stop = bytes.find(terminator);
  if (bytes.rfind("DDCK1\n", 0) != 0 || stop == std::string::npos) throw IoError("checkpoint: malformed header");
  std::istringstream in(bytes.substr(0, stop));
  std::string line;
  std::getline(in, line);
  Checkpoint ck;
  bool have_arch = false;
  std::size_t count = 0;
  Architecture arch;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "loss") {
      std::string name;
      ls >> name;
      ck.loss = parse_loss(name);
    } else if (key == "binning") {
      double a = 0.0, b = 0.0;
      int k = 0;
      if (!(ls >> a >> b >> k)) throw IoError("checkpoint: malformed binning");
      ck.binning = DepthBinning(a, b, k);
    } else if (key == "sigma") {
      ls >> ck.sigma;
    } else if (key == "dropout") {
      ls >> ck.dropout;
    } else if (key == "world") {
      ck.world = decode_world(line);
    } else if (key == "arch") {
      std::vector<int> dims;
      int d = 0;
      while (ls >> d) dims.push_back(d);
      if (dims.size() < 2) throw IoError("checkpoint: malformed architecture");
      arch.input_dim = dims.front();
      arch.output_dim = dims.back();
      arch.hidden.assign(dims.begin() + 1, dims.end() - 1);
      have_arch = true;
    } else if (key == "params") {
      ls >> count;
    } else {
      throw IoError("checkpoint: unknown header key '" + key + "'");
    }
  }
  if (!have_arch) throw IoError("checkpoint: missing architecture");
  ck.params = ModelParams(arch);
  if (count != ck.params.size()) throw IoError("checkpoint: parameter count does not match architecture");
  const auto raw = parse_f32(bytes, stop + terminator.size(), count, "checkpoint");
  auto v = ck.params.values();
  for (std::size_t i = 0; i < count; ++i) v[i] = raw[i];
  return ck;
}

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) { write_file(path, encode_checkpoint(ck)); }
inline Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

// ---------------------------------------------------------------------------
// Scenes (key-value lines, '#' comments):
//   world minx miny minz maxx maxy maxz
//   camera width height fx fy cx cy
//   box minx miny minz maxx maxy maxz surface
//   plane axis offset surface

inline std::string encode_scene(const SceneSpec& s) {
  auto vec = [](Vec3 v) { return fmt_double(v.x) + " " + fmt_double(v.y) + " " + fmt_double(v.z); };
  std::string out = "world " + vec(s.world.min) + " " + vec(s.world.max) + "\n";
  out += "camera " + std::to_string(s.camera.width) + " " + std::to_string(s.camera.height) + " " +
         fmt_double(s.camera.fx) + " " + fmt_double(s.camera.fy) + " " + fmt_double(s.camera.cx) + " " +
         fmt_double(s.camera.cy) + "\n";
  for (const auto& b : s.boxes) {
    out += "box " + vec(b.box.min) + " " + vec(b.box.max) + " " + std::string(surface_name(b.surface)) + "\n";
  }
  for (const auto& p : s.planes) {
    out += "plane " + std::to_string(p.axis) + " " + fmt_double(p.offset) + " " +
           std::string(surface_name(p.surface)) + "\n";
  }
  return out;
}

inline SceneSpec decode_scene(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  SceneSpec s;
  bool have_world = false;
  bool have_camera = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    const std::string where = "scene line " + std::to_string(lineno);
    auto read_vec = [&](Vec3& v) {
      if (!(ls >> v.x >> v.y >> v.z)) throw ValidationError(where + ": expected three numbers");
    };
    if (key == "world") {
      read_vec(s.world.min);
      read_vec(s.world.max);
      have_world = true;
    } else if (key == "camera") {
      Intrinsics& c = s.camera;
      if (!(ls >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy)) {
        throw ValidationError(where + ": malformed camera");
      }
      have_camera = true;
    } else if (key == "box") {
      SceneBox b;
      std::string surface;
      read_vec(b.box.min);
      read_vec(b.box.max);
      if (!(ls >> surface)) throw ValidationError(where + ": missing surface class");
      b.surface = parse_surface(surface);
      s.boxes.push_back(b);
    } else if (key == "plane") {
      ScenePlane p;
      std::string surface;
      if (!(ls >> p.axis >> p.offset >> surface)) throw ValidationError(where + ": malformed plane");
      p.surface = parse_surface(surface);
      s.planes.push_back(p);
    } else {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
  require(have_world && have_camera, "scene: 'world' and 'camera' lines are required");
  s.validate();
  return s;
}

inline SceneSpec read_scene(const std::string& path) { return decode_scene(read_file(path)); }

/// Trajectory: one pose per line, "tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22".
inline std::string encode_trajectory(std::span<const CameraPose> poses) {
  std::string out;
  for (const auto& p : poses) {
    out += fmt_double(p.translation.x) + " " + fmt_double(p.translation.y) + " " + fmt_double(p.translation.z);
    for (double r : p.rotation.m) out += " " + fmt_double(r);
    out += "\n";
  }
  return out;
}

inline std::vector<CameraPose> decode_trajectory(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<CameraPose> poses;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    CameraPose p;
    if (!(ls >> p.translation.x)) continue;
    bool ok = static_cast<bool>(ls >> p.translation.y >> p.translation.z);
    for (double& r : p.rotation.m) ok = ok && static_cast<bool>(ls >> r);
    if (!ok) throw ValidationError("trajectory line " + std::to_string(lineno) + ": expected 12 numbers");
    p.validate();
    poses.push_back(p);
  }
  return poses;
}

inline std::vector<CameraPose> read_trajectory(const std::string& path) { return decode_trajectory(read_file(path)); }

// ---------------------------------------------------------------------------
// Map dump: '#' header with resolution and bounds, then x,y,z,logodds for
// every non-prior cell (x,y,z are cell centers in meters).

inline std::string encode_map_csv(const VoxelGrid& grid) {
  char buf[160];
  const Aabb& b = grid.bounds();
  std::string out = "# resolution " + fmt_double(grid.resolution()) + "\n";
  out += "# bounds " + fmt_double(b.min.x) + " " + fmt_double(b.min.y) + " " + fmt_double(b.min.z) + " " +
         fmt_double(b.max.x) + " " + fmt_double(b.max.y) + " " + fmt_double(b.max.z) + "\n";
  out += "x,y,z,logodds\n";
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    if (grid.logodds(i) == 0.0) continue;
    const Vec3 c = grid.cell_center(grid.unlinear(i));
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", c.x, c.y, c.z, grid.logodds(i));
    out += buf;
  }
  return out;
}

}  // namespace ddepth::io

#include "trajwarp/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "png_codec.hpp"
#include "trajwarp/errors.hpp"

namespace trajwarp::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint32_t LoadU32(const std::uint8_t* p, bool little) {
  if (little) return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
  return std::uint32_t(p[3]) | std::uint32_t(p[2]) << 8 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[0]) << 24;
}

float LoadF32(const std::uint8_t* p, bool little = true) { return std::bit_cast<float>(LoadU32(p, little)); }

void StoreU32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void StoreF32(Bytes& out, float v) { StoreU32(out, std::bit_cast<std::uint32_t>(v)); }

void RequireLength(std::span<const std::uint8_t> bytes, std::size_t needed, std::size_t offset, const std::string& field) {
  if (bytes.size() < offset + needed) {
    throw FormatError(field,
                      "truncated: expected " + std::to_string(offset + needed) + " bytes, file has " +
                          std::to_string(bytes.size()),
                      static_cast<std::int64_t>(bytes.size()));
  }
}

bool IsSpace(std::uint8_t c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

// Next whitespace-delimited token of a PFM header.
std::string HeaderToken(std::span<const std::uint8_t> bytes, std::size_t& pos, const std::string& field) {
  while (pos < bytes.size() && IsSpace(bytes[pos])) ++pos;
  const std::size_t start = pos;
  while (pos < bytes.size() && !IsSpace(bytes[pos])) ++pos;
  if (start == pos) throw FormatError(field, "missing header token", static_cast<std::int64_t>(start));
  return std::string(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.begin() + static_cast<std::ptrdiff_t>(pos));
}

template <typename T>
T ParseNumber(const std::string& token, std::size_t offset, const std::string& field) {
  std::istringstream in(token);
  in.imbue(std::locale::classic());
  T v{};
  in >> v;
  if (!in || !in.eof()) throw FormatError(field, "malformed value '" + token + "'", static_cast<std::int64_t>(offset));
  return v;
}

fs::path ScaleSidecar(const fs::path& png_path) { return fs::path(png_path.string() + ".scale"); }

}  // namespace

Bytes ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void WriteFile(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// PFM

DepthMap DecodePfm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const std::string magic = HeaderToken(bytes, pos, "pfm.magic");
  if (magic == "PF") throw FormatError("pfm.magic", "3-channel 'PF' is not a depth map; expected 'Pf'", 0);
  if (magic != "Pf") throw FormatError("pfm.magic", "expected 'Pf', found '" + magic + "'", 0);
  std::size_t at = pos;
  const int width = ParseNumber<int>(HeaderToken(bytes, pos, "pfm.width"), at, "pfm.width");
  at = pos;
  const int height = ParseNumber<int>(HeaderToken(bytes, pos, "pfm.height"), at, "pfm.height");
  at = pos;
  const double scale = ParseNumber<double>(HeaderToken(bytes, pos, "pfm.scale"), at, "pfm.scale");
  if (width <= 0 || height <= 0) {
    throw FormatError("pfm.width", "non-positive dimensions " + std::to_string(width) + "x" + std::to_string(height),
                      static_cast<std::int64_t>(at));
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("pfm.scale", "scale must be non-zero", static_cast<std::int64_t>(at));
  if (pos >= bytes.size() || !IsSpace(bytes[pos])) {
    throw FormatError("pfm.header", "missing separator after scale", static_cast<std::int64_t>(pos));
  }
  ++pos;  // single whitespace byte ends the header
  const bool little = scale < 0.0;
  const std::size_t payload = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 4;
  if (bytes.size() - pos != payload) {
    throw FormatError("pfm.payload",
                      "expected " + std::to_string(payload) + " payload bytes, found " + std::to_string(bytes.size() - pos),
                      static_cast<std::int64_t>(pos));
  }
  Grid<double> values(width, height, 0.0);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;  // PFM stores the bottom row first
    for (int x = 0; x < width; ++x) {
      values(x, y) = LoadF32(bytes.data() + pos + (static_cast<std::size_t>(row) * width + x) * 4, little);
    }
  }
  return DepthMap::FromValues(std::move(values));
}

Bytes EncodePfm(const DepthMap& depth) {
  RequireSameShape(depth.values, depth.valid, "EncodePfm");
  const std::string header = "Pf\n" + std::to_string(depth.width()) + " " + std::to_string(depth.height()) + "\n-1.0\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + depth.values.size() * 4);
  for (int row = 0; row < depth.height(); ++row) {
    const int y = depth.height() - 1 - row;
    for (int x = 0; x < depth.width(); ++x) {
      double v = depth.values(x, y);
      if (!depth.valid(x, y) && v > 0.0) v = 0.0;  // keep existing non-positive markers, else write 0
      StoreF32(out, static_cast<float>(v));
    }
  }
  return out;
}

DepthMap ReadPfm(const fs::path& path) { return DecodePfm(ReadFile(path)); }
void WritePfm(const fs::path& path, const DepthMap& depth) { WriteFile(path, EncodePfm(depth)); }

DepthMap ReadDepthPng16(const fs::path& path) {
  const Bytes sidecar = ReadFile(ScaleSidecar(path));
  std::string text(sidecar.begin(), sidecar.end());
  while (!text.empty() && IsSpace(static_cast<std::uint8_t>(text.back()))) text.pop_back();
  const double scale = ParseNumber<double>(text, 0, "depth_png.scale");
  if (!(scale > 0.0)) throw FormatError("depth_png.scale", "scale must be positive", 0);
  const png::Image image = png::Decode(ReadFile(path), png::Layout::kGray16);
  Grid<double> values(image.width, image.height, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint16_t v;
    std::memcpy(&v, image.pixels.data() + 2 * i, 2);
    values[i] = v * scale;
  }
  return DepthMap::FromValues(std::move(values));
}

void WriteDepthPng16(const fs::path& path, const DepthMap& depth, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("WriteDepthPng16: scale must be positive");
  png::Image image{depth.width(), depth.height(), png::Layout::kGray16, {}};
  image.pixels.resize(depth.values.size() * 2);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    std::uint16_t v = 0;
    if (depth.valid[i]) {
      const double q = std::floor(depth.values[i] / scale + 0.5);
      if (q > 65535.0) throw InvalidArgument("WriteDepthPng16: depth exceeds 16-bit range at this scale");
      v = static_cast<std::uint16_t>(std::max(1.0, q));
    }
    std::memcpy(image.pixels.data() + 2 * i, &v, 2);
  }
  WriteFile(path, png::Encode(image));
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.precision(17);
  s << scale << "\n";
  const std::string text = s.str();
  WriteFile(ScaleSidecar(path), Bytes(text.begin(), text.end()));
}

DepthMap ReadDepth(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") return ReadPfm(path);
  if (ext == ".png") return ReadDepthPng16(path);
  throw InvalidArgument("unsupported depth format '" + ext + "' (expected .pfm or .png)");
}

// ---------------------------------------------------------------------------
// .flo

FlowField DecodeFlo(std::span<const std::uint8_t> bytes) {
  RequireLength(bytes, 12, 0, "flo.header");
  const float magic = LoadF32(bytes.data());
  if (magic != kFloMagic) {
    throw FormatError("flo.magic", "expected 202021.25, found " + std::to_string(magic), 0);
  }
  const auto width = static_cast<std::int32_t>(LoadU32(bytes.data() + 4, true));
  const auto height = static_cast<std::int32_t>(LoadU32(bytes.data() + 8, true));
  if (width <= 0 || height <= 0 || width > (1 << 20) || height > (1 << 20)) {
    throw FormatError("flo.width", "implausible dimensions " + std::to_string(width) + "x" + std::to_string(height), 4);
  }
  const std::size_t payload = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 8;
  if (bytes.size() - 12 != payload) {
    throw FormatError("flo.payload",
                      "expected " + std::to_string(payload) + " payload bytes, found " + std::to_string(bytes.size() - 12),
                      12);
  }
  FlowField flow(width, height);
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    const float u = LoadF32(bytes.data() + 12 + 8 * i);
    const float v = LoadF32(bytes.data() + 12 + 8 * i + 4);
    flow.vectors[i] = Eigen::Vector2d(u, v);
    flow.valid[i] = std::isfinite(u) && std::isfinite(v) && std::abs(u) <= 1e9f && std::abs(v) <= 1e9f;
  }
  return flow;
}

Bytes EncodeFlo(const FlowField& flow) {
  RequireSameShape(flow.vectors, flow.valid, "EncodeFlo");
  Bytes out;
  out.reserve(12 + flow.vectors.size() * 8);
  StoreF32(out, kFloMagic);
  StoreU32(out, static_cast<std::uint32_t>(flow.width()));
  StoreU32(out, static_cast<std::uint32_t>(flow.height()));
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    float u = static_cast<float>(flow.vectors[i].x());
    float v = static_cast<float>(flow.vectors[i].y());
    if (!flow.valid[i]) {
      // Keep a decoded unknown marker as-is; otherwise use the canonical one.
      const bool marked = std::abs(u) > 1e9f || std::abs(v) > 1e9f;
      if (!marked) u = v = kFloUnknown;
    }
    StoreF32(out, u);
    StoreF32(out, v);
  }
  return out;
}

FlowField ReadFlo(const fs::path& path) { return DecodeFlo(ReadFile(path)); }
void WriteFlo(const fs::path& path, const FlowField& flow) { WriteFile(path, EncodeFlo(flow)); }

// ---------------------------------------------------------------------------
// CAMT

std::size_t Tensor::Elements() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor DecodeTensor(std::span<const std::uint8_t> bytes) {
  RequireLength(bytes, 8, 0, "camt.header");
  if (std::memcmp(bytes.data(), "CAMT", 4) != 0) throw FormatError("camt.magic", "expected 'CAMT'", 0);
  const std::uint32_t ndim = LoadU32(bytes.data() + 4, true);
  if (ndim > 16) throw FormatError("camt.ndim", "unsupported rank " + std::to_string(ndim), 4);
  RequireLength(bytes, 4 * ndim, 8, "camt.dims");
  Tensor t;
  std::size_t elements = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.shape.push_back(LoadU32(bytes.data() + 8 + 4 * i, true));
    const std::size_t dim = t.shape.back();
    if (dim != 0 && elements > std::numeric_limits<std::size_t>::max() / 4 / dim) {
      throw FormatError("camt.dims", "element count overflows", static_cast<std::int64_t>(8 + 4 * i));
    }
    elements *= dim;
  }
  const std::size_t offset = 8 + 4 * static_cast<std::size_t>(ndim);
  const std::size_t payload = 4 * elements;
  if (bytes.size() - offset != payload) {
    throw FormatError("camt.payload",
                      "expected 4*" + std::to_string(elements) + " = " + std::to_string(payload) +
                          " payload bytes, found " + std::to_string(bytes.size() - offset),
                      static_cast<std::int64_t>(offset));
  }
  t.data.resize(elements);
  for (std::size_t i = 0; i < elements; ++i) t.data[i] = LoadF32(bytes.data() + offset + 4 * i);
  return t;
}

Bytes EncodeTensor(const Tensor& tensor) {
  if (tensor.Elements() != tensor.data.size()) throw InvalidArgument("EncodeTensor: shape does not match data length");
  Bytes out{'C', 'A', 'M', 'T'};
  out.reserve(8 + 4 * tensor.shape.size() + 4 * tensor.data.size());
  StoreU32(out, static_cast<std::uint32_t>(tensor.shape.size()));
  for (auto d : tensor.shape) StoreU32(out, d);
  for (float v : tensor.data) StoreF32(out, v);
  return out;
}

Tensor ReadTensor(const fs::path& path) { return DecodeTensor(ReadFile(path)); }
void WriteTensor(const fs::path& path, const Tensor& tensor) { WriteFile(path, EncodeTensor(tensor)); }

Tensor ToTensor(const ChannelGrid& grid, const Mask* valid) {
  Tensor t{{static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width()),
            static_cast<std::uint32_t>(grid.channels())},
           {}};
  t.data.reserve(grid.values().size());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const bool ok = valid == nullptr || (*valid)(x, y);
      for (int c = 0; c < grid.channels(); ++c) t.data.push_back(ok ? static_cast<float>(grid(x, y, c)) : static_cast<float>(kNaN));
    }
  }
  return t;
}

ChannelGrid ChannelGridFromTensor(const Tensor& tensor) {
  if (tensor.shape.size() != 3) throw FormatError("camt.ndim", "expected an (H, W, C) tensor");
  ChannelGrid g(static_cast<int>(tensor.shape[1]), static_cast<int>(tensor.shape[0]), static_cast<int>(tensor.shape[2]));
  for (std::size_t i = 0; i < tensor.data.size(); ++i) g.values()[i] = tensor.data[i];
  return g;
}

Tensor ToTensor(const Grid<double>& grid) {
  Tensor t{{static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width())}, {}};
  t.data.reserve(grid.size());
  for (double v : grid.values()) t.data.push_back(static_cast<float>(v));
  return t;
}

Tensor ToTensor(const Pointmap& pointmap) {
  Tensor t{{static_cast<std::uint32_t>(pointmap.height()), static_cast<std::uint32_t>(pointmap.width()), 3}, {}};
  t.data.reserve(pointmap.points.size() * 3);
  for (std::size_t i = 0; i < pointmap.points.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      t.data.push_back(pointmap.valid[i] ? static_cast<float>(pointmap.points[i][c]) : static_cast<float>(kNaN));
    }
  }
  return t;
}

Pointmap PointmapFromTensor(const Tensor& tensor, PointFrame frame) {
  if (tensor.shape.size() != 3 || tensor.shape[2] != 3) throw FormatError("camt.dims", "expected an (H, W, 3) pointmap");
  const int h = static_cast<int>(tensor.shape[0]), w = static_cast<int>(tensor.shape[1]);
  Pointmap pm{Grid<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero()), Mask(w, h, 0), frame};
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    const Eigen::Vector3d p(tensor.data[3 * i], tensor.data[3 * i + 1], tensor.data[3 * i + 2]);
    if (!p.allFinite()) continue;
    pm.points[i] = p;
    pm.valid[i] = 1;
  }
  return pm;
}

// ---------------------------------------------------------------------------
// JSON documents

namespace {

const json& Field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw FormatError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(path + "." + key, "missing field");
  return *it;
}

double Number(const json& j, const std::string& path) {
  if (!j.is_number()) throw FormatError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw FormatError(path, "expected a finite number");
  return v;
}

int Integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw FormatError(path, "expected an integer");
  return j.get<int>();
}

Eigen::Matrix3d Matrix3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw FormatError(path, "expected a 3x3 row-major array");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || row.size() != 3) throw FormatError(rp, "expected 3 numbers");
    for (int c = 0; c < 3; ++c) m(r, c) = Number(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

Eigen::Vector3d Vector3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw FormatError(path, "expected 3 numbers");
  return {Number(j[0], path + "[0]"), Number(j[1], path + "[1]"), Number(j[2], path + "[2]")};
}

Eigen::Vector2d Vector2(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw FormatError(path, "expected 2 numbers");
  return {Number(j[0], path + "[0]"), Number(j[1], path + "[1]")};
}

Pose PoseFrom(const json& obj, const std::string& path) {
  const Eigen::Matrix3d R = Matrix3(Field(obj, "R", path), path + ".R");
  const Eigen::Vector3d t = Vector3(Field(obj, "t", path), path + ".t");
  Pose::ValidateRotation(R, path + ".R");
  return Pose(R, t);
}

json PoseToJson(const Pose& pose) {
  json R = json::array();
  for (int r = 0; r < 3; ++r) R.push_back({pose.rotation()(r, 0), pose.rotation()(r, 1), pose.rotation()(r, 2)});
  return json{{"R", R}, {"t", {pose.translation().x(), pose.translation().y(), pose.translation().z()}}};
}

json Parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(what, std::string("invalid JSON: ") + e.what(), static_cast<std::int64_t>(e.byte));
  }
}

Intrinsics IntrinsicsFrom(const json& j) {
  const std::string p = "intrinsics";
  Intrinsics K{Number(Field(j, "fx", p), p + ".fx"), Number(Field(j, "fy", p), p + ".fy"),
               Number(Field(j, "cx", p), p + ".cx"), Number(Field(j, "cy", p), p + ".cy"),
               Integer(Field(j, "width", p), p + ".width"), Integer(Field(j, "height", p), p + ".height")};
  K.Validate();
  return K;
}

std::vector<std::pair<int, Pose>> IndexedPoses(const json& doc) {
  const json& frames = Field(doc, "frames", "camera");
  if (!frames.is_array()) throw FormatError("frames", "expected an array");
  std::vector<std::pair<int, Pose>> out;
  std::set<int> seen;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string p = "frames[" + std::to_string(i) + "]";
    const int index = Integer(Field(frames[i], "index", p), p + ".index");
    if (!seen.insert(index).second) throw FormatError(p + ".index", "duplicate frame index " + std::to_string(index));
    out.emplace_back(index, PoseFrom(frames[i], p));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

}  // namespace

CameraTrajectory ParseCameraJson(const std::string& text) {
  const json doc = Parse(text, "camera");
  CameraTrajectory traj;
  traj.intrinsics = IntrinsicsFrom(Field(doc, "intrinsics", "camera"));
  const auto poses = IndexedPoses(doc);
  if (poses.empty()) throw FormatError("frames", "at least one frame required");
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (poses[i].first != static_cast<int>(i)) {
      throw FormatError("frames.index", "frame indices must cover 0.." + std::to_string(poses.size() - 1) +
                                            "; missing " + std::to_string(i));
    }
    traj.poses.push_back(poses[i].second);
  }
  return traj;
}

std::string TrajectoryJson(const Intrinsics& K, std::span<const Keyframe> frames) {
  nlohmann::ordered_json doc;
  doc["intrinsics"] = {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
  doc["frames"] = nlohmann::ordered_json::array();
  for (const Keyframe& k : frames) {
    const json pose = PoseToJson(k.pose);
    doc["frames"].push_back({{"index", k.frame_index}, {"R", pose["R"]}, {"t", pose["t"]}});
  }
  return doc.dump(2) + "\n";
}

std::string CameraJson(const CameraTrajectory& trajectory) {
  std::vector<Keyframe> frames;
  for (std::size_t i = 0; i < trajectory.poses.size(); ++i) frames.push_back({static_cast<int>(i), trajectory.poses[i]});
  return TrajectoryJson(trajectory.intrinsics, frames);
}

CameraTrajectory ReadCamera(const fs::path& path) {
  const Bytes b = ReadFile(path);
  return ParseCameraJson(std::string(b.begin(), b.end()));
}

void WriteCamera(const fs::path& path, const CameraTrajectory& trajectory) {
  const std::string s = CameraJson(trajectory);
  WriteFile(path, Bytes(s.begin(), s.end()));
}

Intrinsics ParseIntrinsicsJson(const std::string& text) { return IntrinsicsFrom(Parse(text, "intrinsics")); }

Pose ParsePoseJson(const std::string& text, const std::string& field) { return PoseFrom(Parse(text, field), field); }

std::string PoseJson(const Pose& pose) { return PoseToJson(pose).dump(2) + "\n"; }

std::vector<Keyframe> ParseKeyframesJson(const std::string& text) {
  const json doc = Parse(text, "keyframes");
  std::vector<Keyframe> out;
  for (auto& [index, pose] : IndexedPoses(doc)) out.push_back(Keyframe{index, pose});
  return out;
}

std::vector<PixelMatch> ParseMatchesJson(const std::string& text) {
  const json doc = Parse(text, "matches");
  if (!doc.is_array()) throw FormatError("matches", "expected an array of {\"src\",\"tgt\"}");
  std::vector<PixelMatch> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string p = "matches[" + std::to_string(i) + "]";
    out.push_back({Vector2(Field(doc[i], "src", p), p + ".src"), Vector2(Field(doc[i], "tgt", p), p + ".tgt")});
  }
  return out;
}

std::string MatchesJson(std::span<const PixelMatch> matches) {
  json doc = json::array();
  for (const auto& m : matches) {
    doc.push_back({{"src", {m.source.x(), m.source.y()}}, {"tgt", {m.target.x(), m.target.y()}}});
  }
  return doc.dump() + "\n";
}

// ---------------------------------------------------------------------------
// PNG

Bytes EncodePngRgb(const Frame& frame) {
  png::Image image{frame.width(), frame.height(), png::Layout::kRgb8, {}};
  image.pixels.reserve(frame.size() * 3);
  for (const Rgb8& p : frame.values()) image.pixels.insert(image.pixels.end(), p.begin(), p.end());
  return png::Encode(image);
}

Frame DecodePngRgb(std::span<const std::uint8_t> bytes) {
  const png::Image image = png::Decode(bytes, png::Layout::kRgb8);
  Frame frame(image.width, image.height);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    frame[i] = Rgb8{image.pixels[3 * i], image.pixels[3 * i + 1], image.pixels[3 * i + 2]};
  }
  return frame;
}

Frame ReadPngRgb(const fs::path& path) { return DecodePngRgb(ReadFile(path)); }
void WritePngRgb(const fs::path& path, const Frame& frame) { WriteFile(path, EncodePngRgb(frame)); }

Bytes EncodeMaskPng(const Mask& mask) {
  png::Image image{mask.width(), mask.height(), png::Layout::kGray1, {}};
  image.pixels.assign(mask.values().begin(), mask.values().end());
  return png::Encode(image);
}

Mask DecodeMaskPng(std::span<const std::uint8_t> bytes) {
  const png::Image image = png::Decode(bytes, png::Layout::kGray1);
  Mask mask(image.width, image.height, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = image.pixels[i];
  return mask;
}

Mask ReadMaskPng(const fs::path& path) { return DecodeMaskPng(ReadFile(path)); }
void WriteMaskPng(const fs::path& path, const Mask& mask) { WriteFile(path, EncodeMaskPng(mask)); }

namespace {

// Baker et al. color wheel: RY, YG, GC, CB, BM, MR segment lengths.
std::vector<Eigen::Vector3d> ColorWheel() {
  const int segments[6] = {15, 6, 4, 11, 13, 6};
  std::vector<Eigen::Vector3d> wheel;
  auto ramp = [&](int n, auto&& fn) {
    for (int i = 0; i < n; ++i) wheel.push_back(fn(255.0 * i / n));
  };
  ramp(segments[0], [](double v) { return Eigen::Vector3d(255, v, 0); });
  ramp(segments[1], [](double v) { return Eigen::Vector3d(255 - v, 255, 0); });
  ramp(segments[2], [](double v) { return Eigen::Vector3d(0, 255, v); });
  ramp(segments[3], [](double v) { return Eigen::Vector3d(0, 255 - v, 255); });
  ramp(segments[4], [](double v) { return Eigen::Vector3d(v, 0, 255); });
  ramp(segments[5], [](double v) { return Eigen::Vector3d(255, 0, 255 - v); });
  return wheel;
}

}  // namespace

Frame FlowToColor(const FlowField& flow, double max_magnitude) {
  static const std::vector<Eigen::Vector3d> wheel = ColorWheel();
  const int ncols = static_cast<int>(wheel.size());
  double maxrad = max_magnitude;
  if (!(maxrad > 0.0)) {
    maxrad = 0.0;
    for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
      if (flow.valid[i]) maxrad = std::max(maxrad, flow.vectors[i].norm());
    }
  }
  if (!(maxrad > 0.0)) maxrad = 1.0;

  Frame out(flow.width(), flow.height(), Rgb8{0, 0, 0});
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    if (!flow.valid[i]) continue;
    const double fx = flow.vectors[i].x() / maxrad;
    const double fy = flow.vectors[i].y() / maxrad;
    const double rad = std::sqrt(fx * fx + fy * fy);
    const double a = std::atan2(-fy, -fx) / std::numbers::pi;
    const double fk = (a + 1.0) / 2.0 * (ncols - 1);
    const int k0 = static_cast<int>(std::floor(fk));
    const int k1 = (k0 + 1) % ncols;
    const double f = fk - k0;
    Rgb8 px{};
    for (int c = 0; c < 3; ++c) {
      const double col0 = wheel[static_cast<std::size_t>(k0)][c] / 255.0;
      const double col1 = wheel[static_cast<std::size_t>(k1)][c] / 255.0;
      double col = (1.0 - f) * col0 + f * col1;
      col = rad <= 1.0 ? 1.0 - rad * (1.0 - col) : col * 0.75;
      px[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::clamp(std::floor(255.0 * col + 0.5), 0.0, 255.0));
    }
    out[i] = px;
  }
  return out;
}

}  // namespace trajwarp::io

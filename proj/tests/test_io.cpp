#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "support.hpp"
#include "trajwarp/errors.hpp"
#include "trajwarp/io.hpp"

using namespace trajwarp;
namespace fs = std::filesystem;

namespace {

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("trajwarp_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

template <class Fn>
FormatError CatchFormat(Fn&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e;
  }
  FAIL("expected FormatError");
  return FormatError("", "");
}

// Float values that survive the float32 round trip exactly.
DepthMap RandomDepth(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0.25f, 20.0f);
  Grid<double> v(w, h, 0.0);
  for (auto& x : v.values()) x = d(rng);
  v(1, 0) = 0.0;
  return DepthMap::FromValues(std::move(v));
}

}  // namespace

TEST_CASE("pfm: round trip, orientation, malformed input") {
  const DepthMap depth = RandomDepth(7, 5, 1);
  const io::Bytes bytes = io::EncodePfm(depth);
  const std::string header(bytes.begin(), bytes.begin() + 3);
  CHECK(header == "Pf\n");
  const DepthMap back = io::DecodePfm(bytes);
  CHECK(back.values == depth.values);
  CHECK(back.valid == depth.valid);
  // The last payload float is the top-right pixel (bottom-up rows).
  float last;
  std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
  CHECK(last == static_cast<float>(depth.values(6, 0)));

  io::Bytes truncated(bytes.begin(), bytes.end() - 4);
  const FormatError e = CatchFormat([&] { io::DecodePfm(truncated); });
  CHECK(e.field() == "pfm.payload");
  CHECK(e.offset() > 0);
  io::Bytes color = bytes;
  color[1] = 'F';
  CHECK(CatchFormat([&] { io::DecodePfm(color); }).field() == "pfm.magic");
  const std::string junk = "Pf\nx 5\n-1.0\n";
  CHECK(CatchFormat([&] { io::DecodePfm(io::Bytes(junk.begin(), junk.end())); }).field() == "pfm.width");
}

TEST_CASE("16-bit png depth: round trip through the scale sidecar") {
  const fs::path dir = TempDir("png16");
  const DepthMap depth = RandomDepth(9, 4, 2);
  const double scale = 1.0 / 1000.0;
  io::WriteDepthPng16(dir / "d.png", depth, scale);
  CHECK(fs::exists(dir / "d.png.scale"));
  const DepthMap back = io::ReadDepth(dir / "d.png");
  CHECK(back.valid == depth.valid);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    if (depth.valid[i]) CHECK(std::abs(back.values[i] - depth.values[i]) <= scale / 2 + 1e-12);
  }
  CHECK_THROWS_AS(io::ReadDepth(dir / "d.exr"), InvalidArgument);
}

TEST_CASE("flo: round trip with unknown markers") {
  FlowField flow(6, 3);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-40.0f, 40.0f);
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    flow.vectors[i] = {u(rng), u(rng)};
    flow.valid[i] = i % 5 != 0;
  }
  const io::Bytes bytes = io::EncodeFlo(flow);
  CHECK(bytes.size() == 12 + 6 * 3 * 8);
  const FlowField back = io::DecodeFlo(bytes);
  CHECK(back.valid == flow.valid);
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    if (flow.valid[i]) CHECK(back.vectors[i] == flow.vectors[i]);
  }
  float marker;
  std::memcpy(&marker, bytes.data() + 12, 4);
  CHECK(marker == io::kFloUnknown);

  io::Bytes bad = bytes;
  bad[0] ^= 0xff;
  CHECK(CatchFormat([&] { io::DecodeFlo(bad); }).field() == "flo.magic");
  const io::Bytes shorter(bytes.begin(), bytes.end() - 8);
  CHECK(CatchFormat([&] { io::DecodeFlo(shorter); }).field() == "flo.payload");
}

TEST_CASE("camt: round trip, shape and payload errors") {
  io::Tensor t;
  t.shape = {2, 3, 4};
  for (int i = 0; i < 24; ++i) t.data.push_back(0.5f * static_cast<float>(i) - 3.0f);
  t.data[5] = std::numeric_limits<float>::quiet_NaN();
  const io::Bytes bytes = io::EncodeTensor(t);
  CHECK(bytes.size() == 4 + 4 + 3 * 4 + 24 * 4);
  const io::Tensor back = io::DecodeTensor(bytes);
  CHECK(back.shape == t.shape);
  for (std::size_t i = 0; i < 24; ++i) {
    if (i == 5) CHECK(std::isnan(back.data[i]));
    else CHECK(back.data[i] == t.data[i]);
  }

  // A (12, 96, 128) header with a short payload names the expected size.
  io::Tensor big;
  big.shape = {12, 96, 128};
  big.data.assign(12 * 96 * 128, 1.0f);
  io::Bytes cut = io::EncodeTensor(big);
  cut.resize(cut.size() - 10);
  const FormatError e = CatchFormat([&] { io::DecodeTensor(cut); });
  CHECK(e.field() == "camt.payload");
  CHECK(e.offset() == 8 + 12);
  CHECK(std::string(e.what()).find("4*147456 = 589824") != std::string::npos);

  io::Bytes wrong = bytes;
  wrong[0] = 'X';
  CHECK(CatchFormat([&] { io::DecodeTensor(wrong); }).field() == "camt.magic");
  io::Bytes huge = bytes;
  huge[4] = 200;
  CHECK(CatchFormat([&] { io::DecodeTensor(huge); }).field() == "camt.ndim");
}

TEST_CASE("camt: channel grids and pointmaps") {
  ChannelGrid g(4, 3, 2);
  for (std::size_t i = 0; i < g.values().size(); ++i) g.values()[i] = static_cast<double>(i) * 0.25;
  const io::Tensor t = io::ToTensor(g);
  CHECK(t.shape == std::vector<std::uint32_t>{3, 4, 2});
  CHECK(io::ChannelGridFromTensor(t) == g);

  const Intrinsics K{5.0, 5.0, 2.0, 1.0, 4, 3};
  const Pointmap pm = LiftDepth(RandomDepth(4, 3, 4), K);
  const Pointmap back = io::PointmapFromTensor(io::ToTensor(pm), PointFrame::kSourceCamera);
  CHECK(back.valid == pm.valid);
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    if (pm.valid[i]) CHECK(test::MaxAbs(back.points[i] - pm.points[i]) <= 1e-6 * pm.points[i].norm());
  }
  CHECK(std::isnan(io::ToTensor(pm).data[3 * 1]));
}

TEST_CASE("camera json: round trip and validation") {
  std::mt19937_64 rng(5);
  CameraTrajectory traj{test::SmallIntrinsics(), {}};
  for (int i = 0; i < 6; ++i) traj.poses.push_back(test::RandomPose(rng));
  const CameraTrajectory back = io::ParseCameraJson(io::CameraJson(traj));
  CHECK(back.intrinsics == traj.intrinsics);
  REQUIRE(back.poses.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(test::MaxAbs(back.poses[i].rotation() - traj.poses[i].rotation()) < 1e-15);
    CHECK(test::MaxAbs(back.poses[i].translation() - traj.poses[i].translation()) < 1e-15);
  }

  const std::string intr = R"("intrinsics":{"fx":100,"fy":100,"cx":64,"cy":48,"width":128,"height":96})";
  const std::string reflect = "{" + intr + R"(,"frames":[{"index":0,"R":[[1,0,0],[0,1,0],[0,0,-1]],"t":[0,0,0]}]})";
  try {
    io::ParseCameraJson(reflect);
    FAIL("expected InvariantViolation");
  } catch (const InvariantViolation& e) {
    CHECK(e.field() == "frames[0].R");
  }
  const std::string gap = "{" + intr + R"(,"frames":[{"index":1,"R":[[1,0,0],[0,1,0],[0,0,1]],"t":[0,0,0]}]})";
  CHECK(CatchFormat([&] { io::ParseCameraJson(gap); }).field() == "frames.index");
  const std::string no_t = "{" + intr + R"(,"frames":[{"index":0,"R":[[1,0,0],[0,1,0],[0,0,1]]}]})";
  CHECK(CatchFormat([&] { io::ParseCameraJson(no_t); }).field() == "frames[0].t");
  const std::string bad_fx = R"({"intrinsics":{"fx":"a","fy":1,"cx":0,"cy":0,"width":2,"height":2},"frames":[]})";
  CHECK(CatchFormat([&] { io::ParseCameraJson(bad_fx); }).field() == "intrinsics.fx");
  CHECK_THROWS_AS(io::ParseCameraJson("{not json"), FormatError);
}

TEST_CASE("keyframes and matches json") {
  const std::string text =
      R"({"frames":[{"index":5,"R":[[1,0,0],[0,1,0],[0,0,1]],"t":[1,2,3]},{"index":0,"R":[[1,0,0],[0,1,0],[0,0,1]],"t":[0,0,0]}]})";
  const std::vector<Keyframe> keys = io::ParseKeyframesJson(text);
  REQUIRE(keys.size() == 2);
  CHECK(keys[0].frame_index == 0);
  CHECK(keys[1].pose.translation() == Eigen::Vector3d(1, 2, 3));
  const std::string dup =
      R"({"frames":[{"index":1,"R":[[1,0,0],[0,1,0],[0,0,1]],"t":[0,0,0]},{"index":1,"R":[[1,0,0],[0,1,0],[0,0,1]],"t":[0,0,0]}]})";
  CHECK(CatchFormat([&] { io::ParseKeyframesJson(dup); }).field() == "frames[1].index");

  const std::vector<PixelMatch> m{{{1.5, 2.0}, {3.0, 4.25}}};
  const std::vector<PixelMatch> m2 = io::ParseMatchesJson(io::MatchesJson(m));
  REQUIRE(m2.size() == 1);
  CHECK(m2[0].source == m[0].source);
  CHECK(m2[0].target == m[0].target);
}

TEST_CASE("png: rgb and mask round trips") {
  Frame f(5, 4);
  std::mt19937_64 rng(6);
  for (auto& p : f.values()) p = Rgb8{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                                      static_cast<std::uint8_t>(rng())};
  CHECK(io::DecodePngRgb(io::EncodePngRgb(f)) == f);
  Mask m(7, 3, 0);
  m(2, 1) = 1;
  m(6, 2) = 1;
  CHECK(io::DecodeMaskPng(io::EncodeMaskPng(m)) == m);
  const io::Bytes garbage{1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK_THROWS_AS(io::DecodePngRgb(garbage), FormatError);
}

TEST_CASE("flow visualization: zero is white, invalid is black") {
  FlowField flow = FlowField::Uniform(3, 1, {0.0, 0.0});
  flow.valid(2, 0) = 0;
  const Frame c = io::FlowToColor(flow);
  CHECK(c(0, 0) == Rgb8{255, 255, 255});
  CHECK(c(2, 0) == Rgb8{0, 0, 0});
}

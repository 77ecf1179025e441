#include "cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajwarp/errors.hpp"
#include "trajwarp/io.hpp"
#include "trajwarp/metrics.hpp"
#include "trajwarp/pe.hpp"
#include "trajwarp/pose.hpp"
#include "trajwarp/service.hpp"
#include "trajwarp/session.hpp"
#include "trajwarp/synth.hpp"

namespace trajwarp::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Bad flag combinations detected after parsing; reported like parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::map<std::string, double> ParseParams(const std::vector<std::string>& items, const std::string& flag) {
  std::map<std::string, double> params;
  for (const std::string& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError(flag + " expects key=value, got '" + item + "'");
    try {
      std::size_t used = 0;
      const std::string value = item.substr(eq + 1);
      params[item.substr(0, eq)] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw UsageError(flag + " value for '" + item.substr(0, eq) + "' is not a number");
    }
  }
  return params;
}

std::string ReadText(const fs::path& path) {
  const io::Bytes b = io::ReadFile(path);
  return std::string(b.begin(), b.end());
}

void WriteText(const fs::path& path, const std::string& text) {
  io::WriteFile(path, io::Bytes(text.begin(), text.end()));
}

fs::path Numbered(const fs::path& dir, const char* stem, int t, const char* ext) {
  char name[64];
  std::snprintf(name, sizeof(name), "%s_%04d%s", stem, t, ext);
  return dir / name;
}

std::vector<fs::path> SortedPngs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// How the target view of every frame is specified.
struct TargetOptions {
  std::string target;  // absolute trajectory JSON (1 or T poses)
  std::string rel;     // one relative pose for every frame
  std::string preset;
  std::vector<std::string> preset_params;

  void Register(CLI::App* app) {
    app->add_option("--target", target, "Target camera trajectory JSON (absolute poses)")->check(CLI::ExistingFile);
    app->add_option("--rel", rel, "Relative pose JSON {R,t} applied to every frame")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "Preset camera move: orbit, dolly, truck, arc, static");
    app->add_option("--preset-param", preset_params, "Preset parameter key=value (repeatable)");
  }

  bool Given() const { return !target.empty() || !rel.empty() || !preset.empty(); }

  std::vector<RelativeTransform> Resolve(const CameraTrajectory& source) const {
    const int given = int(!target.empty()) + int(!rel.empty()) + int(!preset.empty());
    if (given != 1) throw UsageError("exactly one of --target, --rel or --preset is required");
    const int T = static_cast<int>(source.poses.size());
    std::vector<RelativeTransform> rels;
    if (!target.empty()) {
      const CameraTrajectory tgt = io::ReadCamera(target);
      if (tgt.poses.size() != 1 && static_cast<int>(tgt.poses.size()) != T) {
        throw InvalidArgument("--target holds " + std::to_string(tgt.poses.size()) + " poses; expected 1 or " +
                              std::to_string(T));
      }
      for (int t = 0; t < T; ++t) {
        rels.push_back(RelativePose(source.poses[static_cast<std::size_t>(t)],
                                    tgt.poses[tgt.poses.size() == 1 ? 0 : static_cast<std::size_t>(t)]));
      }
    } else if (!rel.empty()) {
      rels.assign(static_cast<std::size_t>(T), RelativeTransform{io::ParsePoseJson(ReadText(rel), "rel")});
    } else {
      rels = PresetRelativeTransforms(ParsePresetKind(preset), ParseParams(preset_params, "--preset-param"), T);
    }
    return rels;
  }
};

// ---------------------------------------------------------------------------

struct SynthCmd {
  std::string scene = "checker_plane";
  int frames = kDefaultFrameCount;
  std::string out;
  std::vector<std::string> params;
  std::string preset = "static";
  std::vector<std::string> preset_params;
  std::string camera;

  void Register(CLI::App* app) {
    app->add_option("--scene", scene, "checker_plane, two_planes, textured_sphere, moving_box");
    app->add_option("--frames", frames, "Frame count")->check(CLI::PositiveNumber);
    app->add_option("--out", out, "Output scene directory")->required();
    app->add_option("--param", params, "Scene parameter key=value (repeatable)");
    app->add_option("--preset", preset, "Camera move of the source video");
    app->add_option("--preset-param", preset_params, "Preset parameter key=value (repeatable)");
    app->add_option("--camera", camera, "Source trajectory JSON (overrides --preset)")->check(CLI::ExistingFile);
  }

  int Run(std::ostream& out_stream) const {
    CameraTrajectory base;
    if (!camera.empty()) {
      base = io::ReadCamera(camera);
    } else {
      base.intrinsics = DefaultIntrinsics();
      base.poses = {Pose::Identity()};
      base = PresetTrajectory(ParsePresetKind(preset), ParseParams(preset_params, "--preset-param"), frames, base);
    }
    const SyntheticScene s = MakeScene(ParseSceneKind(scene), ParseParams(params, "--param"), frames, base);
    WriteSceneDirectory(out, s);
    out_stream << "wrote " << s.frames.size() << " frames to " << out << "\n";
    return kExitOk;
  }
};

struct LiftCmd {
  std::string scene;
  std::string out;
  std::string frame = "world";

  void Register(CLI::App* app) {
    app->add_option("--scene", scene, "Scene directory")->required()->check(CLI::ExistingDirectory);
    app->add_option("--out", out, "Output directory for pointmap_NNNN.camt")->required();
    app->add_option("--frame", frame, "Coordinate frame of the points")->check(CLI::IsMember({"world", "camera"}));
  }

  int Run(std::ostream& out_stream) const {
    const SceneSession s = LoadSceneSession(scene);
    for (int t = 0; t < s.frame_count(); ++t) {
      const auto i = static_cast<std::size_t>(t);
      const Pointmap pm = frame == "world" ? s.world_pointmaps[i] : LiftDepth(s.depths[i], s.intrinsics());
      io::WriteTensor(Numbered(out, "pointmap", t, ".camt"), io::ToTensor(pm));
    }
    out_stream << "wrote " << s.frame_count() << " pointmaps to " << out << "\n";
    return kExitOk;
  }
};

struct FlowCmd {
  std::string scene;
  std::string camera;
  TargetOptions target;
  std::string out;
  bool vis = false;

  void Register(CLI::App* app) {
    app->add_option("--scene", scene, "Scene directory (frames, depth, camera.json)")->required()->check(
        CLI::ExistingDirectory);
    app->add_option("--camera", camera, "Source trajectory JSON (default: <scene>/camera.json)")->check(
        CLI::ExistingFile);
    target.Register(app);
    app->add_option("--out", out, "Output directory for flow_NNNN.flo")->required();
    app->add_flag("--vis", vis, "Also write color-wheel PNGs");
  }

  int Run(std::ostream& out_stream) const {
    SceneSession s = LoadSceneSession(scene);
    if (!camera.empty()) {
      CameraTrajectory source = io::ReadCamera(camera);
      if (source.poses.size() != s.trajectory.poses.size() || !(source.intrinsics == s.intrinsics())) {
        throw InvalidArgument("--camera does not match the scene's frame count or intrinsics");
      }
      for (int t = 0; t < s.frame_count(); ++t) {
        const auto i = static_cast<std::size_t>(t);
        s.world_pointmaps[i] = LiftDepth(s.depths[i], source.intrinsics, source.poses[i]);
      }
      s.trajectory = std::move(source);
    }
    const auto rels = target.Resolve(s.trajectory);
    for (int t = 0; t < s.frame_count(); ++t) {
      const FlowField flow = PreviewFlow(s, t, rels[static_cast<std::size_t>(t)]);
      io::WriteFlo(Numbered(out, "flow", t, ".flo"), flow);
      if (vis) io::WritePngRgb(Numbered(out, "flow", t, ".png"), io::FlowToColor(flow));
    }
    out_stream << "wrote " << s.frame_count() << " flow fields to " << out << "\n";
    return kExitOk;
  }
};

struct WarpCmd {
  std::string scene;
  std::string mode = "per-frame";
  std::string splat = "nearest";
  TargetOptions target;
  std::string flow_dir;
  std::string out;

  void Register(CLI::App* app) {
    app->add_option("--scene", scene, "Scene directory")->required()->check(CLI::ExistingDirectory);
    app->add_option("--mode", mode, "per-frame or all-frame")->check(CLI::IsMember({"per-frame", "all-frame"}));
    app->add_option("--splat", splat, "nearest or bilinear")->check(CLI::IsMember({"nearest", "bilinear"}));
    target.Register(app);
    app->add_option("--flow", flow_dir, "Directory of flow_NNNN.flo (per-frame mode only)")->check(
        CLI::ExistingDirectory);
    app->add_option("--out", out, "Output directory")->required();
  }

  int Run(std::ostream& out_stream) const {
    const WarpMode warp_mode = ParseWarpMode(mode);
    const SplatMode splat_mode = ParseSplatMode(splat);
    if (!flow_dir.empty() && (target.Given() || warp_mode == WarpMode::kAllFrame)) {
      throw UsageError("--flow is only valid in per-frame mode without a target pose option");
    }
    const SceneSession s = LoadSceneSession(scene);
    std::vector<RelativeTransform> rels;
    if (flow_dir.empty()) rels = target.Resolve(s.trajectory);

    ordered_json report;
    report["mode"] = mode;
    report["splat"] = splat;
    report["frames"] = ordered_json::array();
    std::vector<double> fractions;
    for (int t = 0; t < s.frame_count(); ++t) {
      const auto i = static_cast<std::size_t>(t);
      WarpResult w;
      if (flow_dir.empty()) {
        w = RenderPreview(s, t, rels[i], warp_mode, splat_mode);
      } else {
        FlowField flow = io::ReadFlo(Numbered(flow_dir, "flow", t, ".flo"));
        RequireSameShape(flow.vectors, s.frames[i], "flow " + std::to_string(t));
        // .flo carries no depth; order splats by source depth.
        flow.target_depth = s.depths[i].values;
        for (std::size_t p = 0; p < flow.valid.size(); ++p) flow.valid[p] = flow.valid[p] && s.depths[i].valid[p];
        w = ForwardWarp(s.frames[i], flow, splat_mode);
      }
      io::WritePngRgb(Numbered(fs::path(out) / "frames", "frame", t, ".png"), w.image);
      io::WriteMaskPng(Numbered(fs::path(out) / "holes", "hole", t, ".png"), w.hole_mask);
      fractions.push_back(w.HoleFraction());
      report["frames"].push_back({{"index", t}, {"hole_fraction", fractions.back()}});
    }
    report["mean_hole_fraction"] = CompensatedMean(fractions);
    WriteText(fs::path(out) / "report.json", report.dump(2) + "\n");
    out_stream << mode << " warp of " << s.frame_count() << " frames, mean hole fraction "
               << FormatDouble(CompensatedMean(fractions)) << "\n";
    return kExitOk;
  }
};

struct PoseCmd {
  std::string depth;
  std::string matches;
  std::string camera;
  std::string out;
  RansacConfig config;

  void Register(CLI::App* app) {
    app->add_option("--depth", depth, "Source depth map (.pfm or .png)")->required()->check(CLI::ExistingFile);
    app->add_option("--matches", matches, "Matches JSON [{src:[u,v],tgt:[u,v]}]")->required()->check(
        CLI::ExistingFile);
    app->add_option("--camera", camera, "Camera JSON supplying intrinsics")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output JSON {R,t,inliers,iterations}")->required();
    app->add_option("--threshold", config.inlier_threshold, "Inlier threshold in pixels");
    app->add_option("--confidence", config.confidence, "RANSAC confidence");
    app->add_option("--max-iterations", config.max_iterations, "RANSAC iteration cap");
  }

  int Run(std::ostream& out_stream, std::uint64_t seed) {
    config.seed = seed;
    const Intrinsics K = io::ReadCamera(camera).intrinsics;
    const auto m = io::ParseMatchesJson(ReadText(matches));
    const PnpResult r = PoseFromDepthMatches(io::ReadDepth(depth), m, K, config);
    ordered_json doc = ordered_json::parse(io::PoseJson(r.pose));
    doc["inliers"] = r.inliers;
    doc["iterations"] = r.iterations;
    WriteText(out, doc.dump(2) + "\n");
    out_stream << r.inliers.size() << " / " << m.size() << " inliers after " << r.iterations << " iterations\n";
    return kExitOk;
  }
};

struct TrajCmd {
  std::string keyframes;
  std::string base;
  std::string preset;
  std::vector<std::string> preset_params;
  int frames = kDefaultFrameCount;
  std::string out;

  void Register(CLI::App* app) {
    app->add_option("--keyframes", keyframes, "Keyframe JSON {intrinsics, frames:[{index,R,t}]}")->check(
        CLI::ExistingFile);
    app->add_option("--preset", preset, "Preset camera move");
    app->add_option("--preset-param", preset_params, "Preset parameter key=value (repeatable)");
    app->add_option("--base", base, "Base trajectory for --preset (default: identity, default intrinsics)")->check(
        CLI::ExistingFile);
    app->add_option("--frames", frames, "Frame count")->check(CLI::PositiveNumber);
    app->add_option("--out", out, "Output trajectory JSON")->required();
  }

  int Run(std::ostream& out_stream) const {
    if (keyframes.empty() == preset.empty()) throw UsageError("exactly one of --keyframes or --preset is required");
    CameraTrajectory traj;
    if (!keyframes.empty()) {
      const std::string text = ReadText(keyframes);
      const auto doc = nlohmann::json::parse(text, nullptr, false);
      traj.intrinsics = doc.is_object() && doc.contains("intrinsics") ? io::ParseIntrinsicsJson(doc["intrinsics"].dump())
                                                                      : DefaultIntrinsics();
      const auto keys = io::ParseKeyframesJson(text);
      traj.poses = InterpolateTrajectory(keys, frames);
    } else {
      CameraTrajectory b;
      if (!base.empty()) {
        b = io::ReadCamera(base);
      } else {
        b.intrinsics = DefaultIntrinsics();
        b.poses = {Pose::Identity()};
      }
      traj = PresetTrajectory(ParsePresetKind(preset), ParseParams(preset_params, "--preset-param"), frames, b);
    }
    io::WriteCamera(out, traj);
    out_stream << "wrote " << traj.poses.size() << " poses to " << out << "\n";
    return kExitOk;
  }
};

struct PeCmd {
  int height = 96;
  int width = 128;
  int channels = 64;
  double base = kDefaultPeBase;
  std::string flow;
  std::string out;

  void Register(CLI::App* app) {
    app->add_option("--height", height, "Rows")->check(CLI::PositiveNumber);
    app->add_option("--width", width, "Columns")->check(CLI::PositiveNumber);
    app->add_option("--channels", channels, "Channel count (multiple of 4)")->check(CLI::PositiveNumber);
    app->add_option("--base", base, "Frequency base");
    app->add_option("--flow", flow, "Flow (.flo) for the re-aligned PE and warped coordinate map")->check(
        CLI::ExistingFile);
    app->add_option("--out", out, "Output directory")->required();
  }

  int Run(std::ostream& out_stream) const {
    const PEMap pe = SinusoidalPe(height, width, channels, base);
    io::WriteTensor(fs::path(out) / "pe.camt", io::ToTensor(pe.values));
    if (!flow.empty()) {
      const FlowField f = io::ReadFlo(flow);
      const PEMap realigned = RealignPe(pe, f);
      io::WriteTensor(fs::path(out) / "pe_realigned.camt", io::ToTensor(realigned.values, &realigned.valid));
      const CoordinateMaps maps = MakeCoordinateMaps(height, width, f);
      io::WriteTensor(fs::path(out) / "coords.camt", io::ToTensor(maps.identity.values));
      io::WriteTensor(fs::path(out) / "coords_warped.camt", io::ToTensor(maps.warped.values, &maps.warped.valid));
    }
    out_stream << "wrote positional encodings to " << out << "\n";
    return kExitOk;
  }
};

struct EvalCmd {
  std::string generated;
  std::string target;
  std::string input;
  std::string holes;
  std::string metrics = "psnr,ssim";
  std::string mask = "full";
  std::string distance = "1-ssim";
  int bins = 10;
  std::string out;

  void Register(CLI::App* app) {
    app->add_option("--generated", generated, "Directory of generated PNGs")->required()->check(
        CLI::ExistingDirectory);
    app->add_option("--target", target, "Directory of ground-truth PNGs")->required()->check(CLI::ExistingDirectory);
    app->add_option("--metrics", metrics, "Comma-separated subset of psnr,ssim");
    app->add_option("--mask", mask, "full, covisible or occluded")->check(
        CLI::IsMember({"full", "covisible", "occluded"}));
    app->add_option("--holes", holes, "Directory of hole-mask PNGs (required unless --mask full)")->check(
        CLI::ExistingDirectory);
    app->add_option("--input", input, "Directory of input PNGs; enables the difficulty/distortion curve")->check(
        CLI::ExistingDirectory);
    app->add_option("--distance", distance, "Curve distance: 1-ssim, mae, rmse");
    app->add_option("--bins", bins, "Curve bin count")->check(CLI::PositiveNumber);
    app->add_option("--out", out, "Output report JSON")->required();
  }

  int Run(std::ostream& out_stream) const {
    if (mask != "full" && holes.empty()) throw UsageError("--mask " + mask + " needs --holes");
    std::vector<std::string> names;
    for (std::size_t start = 0; start <= metrics.size();) {
      const auto comma = std::min(metrics.find(',', start), metrics.size());
      const std::string name = metrics.substr(start, comma - start);
      if (name != "psnr" && name != "ssim") throw UsageError("unknown metric '" + name + "' (expected psnr, ssim)");
      names.push_back(name);
      start = comma + 1;
    }
    const auto gen = SortedPngs(generated);
    const auto tgt = SortedPngs(target);
    if (gen.empty() || gen.size() != tgt.size()) {
      throw InvalidArgument("--generated and --target must hold the same non-zero number of PNGs");
    }
    const auto hole_files = holes.empty() ? std::vector<fs::path>{} : SortedPngs(holes);
    if (!holes.empty() && hole_files.size() != gen.size()) throw InvalidArgument("--holes count differs from frames");
    const auto in_files = input.empty() ? std::vector<fs::path>{} : SortedPngs(input);
    if (!input.empty() && in_files.size() != gen.size()) throw InvalidArgument("--input count differs from frames");

    MetricReport report;
    report.mask = mask;
    std::vector<FrameTriple> triples;
    for (std::size_t i = 0; i < gen.size(); ++i) {
      Frame g = io::ReadPngRgb(gen[i]);
      Frame y = io::ReadPngRgb(tgt[i]);
      std::optional<Mask> m;
      if (mask != "full") {
        m = io::ReadMaskPng(hole_files[i]);
        if (mask == "covisible") {
          for (auto& v : m->values()) v = v ? 0 : 1;
        }
      }
      const Mask* mp = m ? &*m : nullptr;
      for (const auto& name : names) {
        report.metrics[name].per_frame.push_back(name == "psnr" ? Psnr(g, y, mp) : Ssim(g, y, mp));
      }
      if (!in_files.empty()) triples.push_back({io::ReadPngRgb(in_files[i]), std::move(g), std::move(y)});
    }
    for (auto& [name, series] : report.metrics) series.mean = CompensatedMean(series.per_frame);
    if (!triples.empty()) {
      report.curve = DifficultyDistortion(triples, MakeDistance(ParseDistanceKind(distance)), bins);
    }
    WriteText(out, MetricReportToJson(report));
    for (const auto& [name, series] : report.metrics) out_stream << name << " " << FormatDouble(series.mean) << "\n";
    return kExitOk;
  }
};

HttpServer* g_server = nullptr;

void StopServer(int) {
  if (g_server != nullptr) g_server->Stop();
}

struct ServeCmd {
  std::string scene;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";

  void Register(CLI::App* app) {
    app->add_option("--scene", scene, "Scene directory")->required()->check(CLI::ExistingDirectory);
    app->add_option("--host", host, "Bind address");
    app->add_option("--port", port, "TCP port (0 = ephemeral)")->check(CLI::Range(0, 65535));
    app->add_option("--cors-origin", cors_origin, "Access-Control-Allow-Origin value");
  }

  int Run(std::ostream& out_stream) const {
    PreviewService service(cors_origin);
    HttpServer server(service);
    const int bound = server.Bind(host, port);
    service.LoadAsync(scene);
    out_stream << "listening on http://" << host << ":" << bound << "/v1" << std::endl;
    g_server = &server;
    std::signal(SIGINT, StopServer);
    std::signal(SIGTERM, StopServer);
    server.Listen();
    g_server = nullptr;
    return kExitOk;
  }
};

}  // namespace

int Dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"trajwarp: depth-based reprojection, flow, pose recovery and evaluation for camera trajectory edits"};
  app.name("trajwarp");
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every stochastic step")->default_val(0);

  SynthCmd synth;
  LiftCmd lift;
  FlowCmd flow;
  WarpCmd warp;
  PoseCmd pose;
  TrajCmd traj;
  PeCmd pe;
  EvalCmd eval;
  ServeCmd serve;
  auto* synth_app = app.add_subcommand("synth", "Render a synthetic scene directory");
  auto* lift_app = app.add_subcommand("lift", "Lift depth maps to pointmaps");
  auto* flow_app = app.add_subcommand("flow", "Flow induced by a target camera trajectory");
  auto* warp_app = app.add_subcommand("warp", "Forward-warp frames to target views");
  auto* pose_app = app.add_subcommand("pose", "Relative pose from depth and pixel matches");
  auto* traj_app = app.add_subcommand("traj", "Build a trajectory from keyframes or a preset");
  auto* pe_app = app.add_subcommand("pe", "Sinusoidal and re-aligned positional encodings");
  auto* eval_app = app.add_subcommand("eval", "PSNR / SSIM and difficulty-distortion curves");
  auto* serve_app = app.add_subcommand("serve", "HTTP preview service");
  synth.Register(synth_app);
  lift.Register(lift_app);
  flow.Register(flow_app);
  warp.Register(warp_app);
  pose.Register(pose_app);
  traj.Register(traj_app);
  pe.Register(pe_app);
  eval.Register(eval_app);
  serve.Register(serve_app);
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> argv_store{"trajwarp"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_app) return synth.Run(out);
    if (*lift_app) return lift.Run(out);
    if (*flow_app) return flow.Run(out);
    if (*warp_app) return warp.Run(out);
    if (*pose_app) return pose.Run(out, seed);
    if (*traj_app) return traj.Run(out);
    if (*pe_app) return pe.Run(out);
    if (*eval_app) return eval.Run(out);
    if (*serve_app) return serve.Run(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitProcessing;
  }
  return kExitUsage;
}

}  // namespace trajwarp::cli

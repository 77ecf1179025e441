#include "trajwarp/service.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include <httplib.h>
#include <json.hpp>

#include "trajwarp/errors.hpp"
#include "trajwarp/io.hpp"

namespace trajwarp {

using nlohmann::json;

namespace {

struct HttpError {
  int status;
  std::string message;
  std::string field;
  std::string invariant;
};

HttpResponse JsonResponse(int status, const json& body) {
  HttpResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

HttpResponse ErrorResponse(const HttpError& e) {
  json body{{"error", e.message}, {"field", e.field}};
  if (!e.invariant.empty()) body["invariant"] = e.invariant;
  return JsonResponse(e.status, body);
}

json ParseBody(const std::string& text) {
  try {
    json body = json::parse(text);
    if (!body.is_object()) throw HttpError{400, "request body must be a JSON object", "body", ""};
    return body;
  } catch (const json::parse_error& e) {
    throw HttpError{400, std::string("invalid JSON: ") + e.what(), "body", ""};
  }
}

int FrameIndex(const json& body, const SceneSession& session) {
  auto it = body.find("frame");
  if (it == body.end()) throw HttpError{400, "missing field", "frame", ""};
  if (!it->is_number_integer()) throw HttpError{400, "expected an integer", "frame", ""};
  const auto frame = it->get<long long>();
  if (frame < 0 || frame >= session.frame_count()) {
    throw HttpError{404, "frame " + std::to_string(frame) + " not in [0, " + std::to_string(session.frame_count() - 1) + "]",
                    "frame", ""};
  }
  return static_cast<int>(frame);
}

// Exactly one of "rel" (source camera -> target camera) or "pose" (absolute
// world -> camera) selects the target view.
RelativeTransform TargetTransform(const json& body, const SceneSession& session, int frame) {
  const bool has_rel = body.contains("rel");
  const bool has_pose = body.contains("pose");
  if (has_rel == has_pose) throw HttpError{400, "exactly one of 'rel' or 'pose' is required", "rel", ""};
  if (has_rel) return RelativeTransform{io::ParsePoseJson(body["rel"].dump(), "rel")};
  const Pose target = io::ParsePoseJson(body["pose"].dump(), "pose");
  return RelativePose(session.trajectory.poses[static_cast<std::size_t>(frame)], target);
}

std::string StringField(const json& body, const std::string& key, const std::string& fallback) {
  auto it = body.find(key);
  if (it == body.end()) return fallback;
  if (!it->is_string()) throw HttpError{400, "expected a string", key, ""};
  return it->get<std::string>();
}

std::string AsText(const io::Bytes& bytes) { return std::string(bytes.begin(), bytes.end()); }

HttpResponse Preview(const json& body, const SceneSession& session) {
  const int frame = FrameIndex(body, session);
  const RelativeTransform rel = TargetTransform(body, session, frame);
  WarpMode mode;
  SplatMode splat;
  try {
    mode = ParseWarpMode(StringField(body, "mode", "per-frame"));
  } catch (const InvalidArgument& e) {
    throw HttpError{400, e.what(), "mode", ""};
  }
  try {
    splat = ParseSplatMode(StringField(body, "splat", "nearest"));
  } catch (const InvalidArgument& e) {
    throw HttpError{400, e.what(), "splat", ""};
  }
  const auto start = std::chrono::steady_clock::now();
  const WarpResult warp = RenderPreview(session, frame, rel, mode, splat);
  const io::Bytes png = io::EncodePngRgb(warp.image);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  HttpResponse r;
  r.content_type = "image/png";
  r.body = AsText(png);
  r.headers.emplace_back("X-Hole-Fraction", FormatDouble(warp.HoleFraction()));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", ms);
  r.headers.emplace_back("X-Render-Ms", buf);
  return r;
}

HttpResponse Flow(const HttpRequest& request, const json& body, const SceneSession& session) {
  const int frame = FrameIndex(body, session);
  const RelativeTransform rel = TargetTransform(body, session, frame);
  const FlowField flow = PreviewFlow(session, frame, rel);
  HttpResponse r;
  auto vis = request.query.find("vis");
  if (vis != request.query.end() && vis->second != "0") {
    r.content_type = "image/png";
    r.body = AsText(io::EncodePngRgb(io::FlowToColor(flow)));
  } else {
    r.content_type = "application/octet-stream";
    r.body = AsText(io::EncodeFlo(flow));
  }
  return r;
}

HttpResponse Trajectory(const json& body, const SceneSession* session) {
  Intrinsics K;
  if (body.contains("intrinsics")) {
    K = io::ParseIntrinsicsJson(body["intrinsics"].dump());
  } else if (session != nullptr) {
    K = session->intrinsics();
  } else {
    throw HttpError{400, "missing field (no scene loaded to supply it)", "intrinsics", ""};
  }
  const std::vector<Keyframe> frames = io::ParseKeyframesJson(body.dump());
  if (frames.empty()) throw HttpError{400, "at least one frame required", "frames", ""};
  if (session != nullptr) {
    for (const Keyframe& k : frames) {
      if (k.frame_index < 0 || k.frame_index >= session->frame_count()) {
        throw HttpError{400, "index " + std::to_string(k.frame_index) + " outside [0, " +
                                 std::to_string(session->frame_count() - 1) + "]",
                        "frames.index", ""};
      }
    }
  }
  HttpResponse r;
  r.body = io::TrajectoryJson(K, frames);
  return r;
}

HttpResponse Meta(const SceneSession& session) {
  const json camera = json::parse(io::CameraJson(session.trajectory));
  nlohmann::ordered_json body;
  body["session_id"] = session.id;
  body["T"] = session.frame_count();
  body["H"] = session.intrinsics().height;
  body["W"] = session.intrinsics().width;
  body["intrinsics"] = camera["intrinsics"];
  body["trajectory"] = camera["frames"];
  HttpResponse r;
  r.body = body.dump();
  return r;
}

HttpResponse FrameImage(const std::string& index_text, const SceneSession& session) {
  long long t = -1;
  const auto* end = index_text.data() + index_text.size();
  const auto res = std::from_chars(index_text.data(), end, t);
  if (index_text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw HttpError{400, "frame index must be an integer", "t", ""};
  }
  if (t < 0 || t >= session.frame_count()) throw HttpError{404, "frame " + index_text + " not found", "t", ""};
  HttpResponse r;
  r.content_type = "image/png";
  r.body = AsText(io::EncodePngRgb(session.frames[static_cast<std::size_t>(t)]));
  return r;
}

constexpr std::string_view kPrefix = "/v1";

}  // namespace

std::string HttpResponse::Header(const std::string& name) const {
  for (const auto& [k, v] : headers) {
    if (k == name) return v;
  }
  return {};
}

PreviewService::PreviewService(std::string cors_origin) : cors_origin_(std::move(cors_origin)) {}

PreviewService::~PreviewService() {
  if (loader_.joinable()) loader_.join();
}

void PreviewService::Load(const std::filesystem::path& scene_dir) {
  {
    std::lock_guard lock(mutex_);
    state_ = State::kLoading;
    session_.reset();
  }
  try {
    auto session = std::make_shared<const SceneSession>(LoadSceneSession(scene_dir));
    std::lock_guard lock(mutex_);
    session_ = std::move(session);
    state_ = State::kReady;
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    state_ = State::kFailed;
    load_error_ = e.what();
    throw;
  }
}

void PreviewService::LoadAsync(const std::filesystem::path& scene_dir) {
  WaitForLoad();
  {
    std::lock_guard lock(mutex_);
    state_ = State::kLoading;
  }
  loader_ = std::thread([this, scene_dir] {
    try {
      Load(scene_dir);
    } catch (const std::exception&) {
      // Recorded in load_error_ and reported by /v1/health.
    }
  });
}

void PreviewService::WaitForLoad() {
  if (loader_.joinable()) loader_.join();
}

void PreviewService::SetSession(std::shared_ptr<const SceneSession> session) {
  std::lock_guard lock(mutex_);
  session_ = std::move(session);
  state_ = session_ ? State::kReady : State::kEmpty;
}

std::shared_ptr<const SceneSession> PreviewService::Session(State* state) const {
  std::lock_guard lock(mutex_);
  *state = state_;
  return session_;
}

HttpResponse PreviewService::Handle(const HttpRequest& request) const {
  HttpResponse response;
  try {
    if (request.method == "OPTIONS") {
      response.status = 204;
      response.content_type.clear();
      response.headers.emplace_back("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      response.headers.emplace_back("Access-Control-Allow-Headers", "Content-Type");
    } else {
      if (request.path.rfind(kPrefix, 0) != 0) throw HttpError{404, "unknown route " + request.path, "path", ""};
      const std::string route = request.path.substr(kPrefix.size());
      State state;
      const auto session = Session(&state);
      const bool is_get = request.method == "GET";
      const bool is_post = request.method == "POST";

      if (route == "/health" && is_get) {
        json body{{"status", state == State::kReady ? "ok" : state == State::kFailed ? "failed" : "loading"}};
        if (state == State::kFailed) {
          std::lock_guard lock(mutex_);
          body["error"] = load_error_;
        }
        if (state == State::kEmpty) body["status"] = "empty";
        response = JsonResponse(200, body);
      } else if (route == "/trajectory" && is_post) {
        if (state == State::kLoading) throw HttpError{503, "scene is loading", "", ""};
        response = Trajectory(ParseBody(request.body), session.get());
      } else {
        const bool known = (is_get && (route == "/meta" || route.rfind("/frames/", 0) == 0)) ||
                           (is_post && (route == "/preview" || route == "/flow"));
        if (!known) throw HttpError{404, "unknown route " + request.method + " " + request.path, "path", ""};
        if (!session) {
          throw HttpError{503, state == State::kFailed ? "scene failed to load" : "scene is loading", "", ""};
        }
        if (route == "/meta") {
          response = Meta(*session);
        } else if (route.rfind("/frames/", 0) == 0) {
          response = FrameImage(route.substr(8), *session);
        } else if (route == "/preview") {
          response = Preview(ParseBody(request.body), *session);
        } else {
          response = Flow(request, ParseBody(request.body), *session);
        }
      }
    }
  } catch (const HttpError& e) {
    response = ErrorResponse(e);
  } catch (const InvariantViolation& e) {
    response = ErrorResponse({422, e.what(), e.field(), e.invariant()});
  } catch (const FormatError& e) {
    response = ErrorResponse({400, e.what(), e.field(), ""});
  } catch (const InvalidArgument& e) {
    response = ErrorResponse({400, e.what(), "", ""});
  } catch (const std::exception& e) {
    response = ErrorResponse({500, e.what(), "", ""});
  }
  response.headers.emplace_back("Access-Control-Allow-Origin", cors_origin_);
  response.headers.emplace_back("Access-Control-Expose-Headers", "X-Hole-Fraction, X-Render-Ms");
  return response;
}

struct HttpServer::Impl {
  explicit Impl(const PreviewService& s) : service(s) {}
  const PreviewService& service;
  httplib::Server server;
};

HttpServer::HttpServer(const PreviewService& service) : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest request{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) request.query.emplace(k, v);
    const HttpResponse response = impl_->service.Handle(request);
    res.status = response.status;
    for (const auto& [k, v] : response.headers) res.set_header(k, v);
    if (!response.content_type.empty()) res.set_content(response.body, response.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Options(".*", handler);
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::Listen() { impl_->server.listen_after_bind(); }

void HttpServer::WaitUntilReady() { impl_->server.wait_until_ready(); }

void HttpServer::Stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace trajwarp

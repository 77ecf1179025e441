#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "trajwarp/session.hpp"

namespace trajwarp {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;

  std::string Header(const std::string& name) const;
};

/// Request handling for the preview API, independent of any socket. All
/// routes live under /v1:
///   GET  /v1/health                 {"status":"ok"|"loading"|"failed"}
///   GET  /v1/meta                   {session_id,T,H,W,intrinsics,trajectory}
///   GET  /v1/frames/{t}             PNG
///   POST /v1/preview                {frame, rel|pose, mode, splat?} -> PNG
///   POST /v1/flow[?vis=1]           {frame, rel|pose} -> .flo or PNG
///   POST /v1/trajectory             {intrinsics?, frames:[{index,R,t}]} -> normalized JSON
/// Errors are JSON {"error","field"[, "invariant"]} with 400 (malformed),
/// 404 (unknown frame or route), 422 (pose invariant) or 503 (scene loading).
class PreviewService {
 public:
  explicit PreviewService(std::string cors_origin = "*");
  ~PreviewService();

  PreviewService(const PreviewService&) = delete;
  PreviewService& operator=(const PreviewService&) = delete;

  /// Load synchronously; requests made meanwhile get 503. Rethrows load errors.
  void Load(const std::filesystem::path& scene_dir);
  /// Load on a background thread.
  void LoadAsync(const std::filesystem::path& scene_dir);
  void WaitForLoad();
  void SetSession(std::shared_ptr<const SceneSession> session);

  HttpResponse Handle(const HttpRequest& request) const;

 private:
  enum class State { kEmpty, kLoading, kReady, kFailed };

  std::shared_ptr<const SceneSession> Session(State* state) const;

  std::string cors_origin_;
  mutable std::mutex mutex_;
  State state_ = State::kEmpty;
  std::string load_error_;
  std::shared_ptr<const SceneSession> session_;
  std::thread loader_;
};

/// cpp-httplib front end for a PreviewService.
class HttpServer {
 public:
  explicit HttpServer(const PreviewService& service);
  ~HttpServer();

  /// Port 0 picks an ephemeral port. Returns the bound port; throws on failure.
  int Bind(const std::string& host, int port);
  /// Blocks until Stop().
  void Listen();
  /// Returns once Listen() has started accepting.
  void WaitUntilReady();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace trajwarp

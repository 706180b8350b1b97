#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>

#include "shapemorph/service/jobs.hpp"
#include "shapemorph/service/sessions.hpp"

namespace httplib {
class Server;
}

namespace shapemorph::service {

struct ServiceConfig {
  std::filesystem::path data_dir = "shapemorph-data";
  std::size_t threads = 1;                      // job worker pool
  std::chrono::seconds ttl{24 * 3600};          // idle session lifetime
  std::size_t max_body = std::size_t{256} << 20;  // upload limit, bytes
  std::size_t preview_triangles = kPreviewTriangles;
};

/// The /api/v1 session API:
///   POST   /sessions                      mesh upload (OBJ/PLY body)      201
///   GET    /sessions/{id}                 session summary
///   DELETE /sessions/{id}
///   GET    /sessions/{id}/preview         binary preview mesh
///   POST   /sessions/{id}/keypoints       {"voxel_size"}
///   POST   /sessions/{id}/fit             {"spec"} 200 | {"deviation":[..]} 202
///   POST   /sessions/{id}/simulate        conditional ensemble job       202
///   GET    /sessions/{id}/ensemble/{k}.ply
///   GET    /jobs/{jid}                    DELETE cancels
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  /// Registers every route on srv and sets its payload limit.
  void mount(httplib::Server& srv);

  SessionStore& sessions() { return sessions_; }
  JobQueue& jobs() { return *jobs_; }
  const ServiceConfig& config() const { return config_; }

 private:
  ServiceConfig config_;
  SessionStore sessions_;
  std::unique_ptr<JobQueue> jobs_;
};

}  // namespace shapemorph::service

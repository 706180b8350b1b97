#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "shapemorph/estimation/fit.hpp"
#include "shapemorph/geometry/keypoints.hpp"
#include "shapemorph/geometry/mesh_io.hpp"
#include "shapemorph/io/json.hpp"
#include "shapemorph/service/preview.hpp"
#include "shapemorph/simulation/tolerance.hpp"

namespace shapemorph::service {

enum class SessionState { mesh_loaded, keys_selected, spec_ready, simulated };

const char* to_string(SessionState state);
SessionState parse_state(std::string_view name);

/// Everything persisted in <data_dir>/<id>/session.json.
struct SessionData {
  std::string id;
  SessionState state = SessionState::mesh_loaded;
  std::string mesh_file;  // mesh.obj or mesh.ply, the uploaded bytes
  std::string mesh_checksum;
  std::int64_t created_at = 0;  // unix seconds
  std::int64_t updated_at = 0;
  std::uint64_t revision = 0;   // bumped by every committed mutation
  std::optional<geometry::KeyPointSet> keys;
  std::optional<kernels::KernelSpec> spec;
  std::optional<estimation::FitResult> fit;  // set when the spec came from a fit
  std::optional<simulation::ToleranceSpec> tolerance;
  std::optional<geometry::ManipulatedKeySet> manipulated;
  std::optional<io::Json> ensemble;          // summary of the latest ensemble
};

io::Json to_json(const SessionData& d);
SessionData session_data_from_json(const io::Json& j);

/// One session: immutable mesh + preview, mutable data behind `mu`.
/// `job_mu` serialises the numerical jobs of this session.
struct Session {
  std::filesystem::path dir;
  std::shared_ptr<const geometry::Mesh> mesh;
  std::shared_ptr<const Preview> preview;
  std::string preview_bytes;

  mutable std::mutex mu;
  std::mutex job_mu;
  SessionData data;
};

/// Sessions under one data directory, one subdirectory each. Sessions are
/// loaded lazily, so a restarted store serves whatever is on disk.
class SessionStore {
 public:
  using Clock = std::chrono::system_clock;

  SessionStore(std::filesystem::path dir, std::chrono::seconds ttl,
               std::size_t preview_triangles = kPreviewTriangles);

  /// Parses and validates the upload (Error(format) etc. on bad bytes),
  /// builds the preview and writes the session directory.
  std::shared_ptr<Session> create(std::string_view mesh_bytes, geometry::MeshFormat format);

  /// nullptr if unknown or expired.
  std::shared_ptr<Session> find(const std::string& id);

  /// Writes session.json atomically; caller holds s.mu. Bumps revision and
  /// updated_at.
  void save(Session& s);

  bool remove(const std::string& id);

  /// Deletes sessions idle for longer than the TTL; returns how many.
  std::size_t collect_garbage(Clock::time_point now = Clock::now());

  const std::filesystem::path& dir() const { return dir_; }
  std::chrono::seconds ttl() const { return ttl_; }

 private:
  std::shared_ptr<Session> load(const std::string& id);
  bool expired(const SessionData& d, Clock::time_point now) const;

  std::filesystem::path dir_;
  std::chrono::seconds ttl_;
  std::size_t preview_triangles_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> cache_;
};

std::int64_t unix_seconds(SessionStore::Clock::time_point t);

}  // namespace shapemorph::service

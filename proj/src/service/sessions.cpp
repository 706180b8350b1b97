#include "shapemorph/service/sessions.hpp"

#include <fstream>

#include "shapemorph/error.hpp"
#include "shapemorph/service/jobs.hpp"

namespace fs = std::filesystem;

namespace shapemorph::service {
namespace {

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

}  // namespace

const char* to_string(SessionState s) {
  switch (s) {
    case SessionState::mesh_loaded: return "mesh_loaded";
    case SessionState::keys_selected: return "keys_selected";
    case SessionState::spec_ready: return "spec_ready";
    case SessionState::simulated: return "simulated";
  }
  return "unknown";
}

SessionState parse_state(std::string_view name) {
  for (auto s : {SessionState::mesh_loaded, SessionState::keys_selected, SessionState::spec_ready, SessionState::simulated})
    if (name == to_string(s)) return s;
  fail(ErrorCode::format, "unknown session state '" + std::string(name) + "'");
}

std::int64_t unix_seconds(SessionStore::Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::seconds>(t.time_since_epoch()).count();
}

io::Json to_json(const SessionData& d) {
  io::Json j = {{"schema", io::kSchema},     {"id", d.id},
                {"state", to_string(d.state)}, {"mesh_file", d.mesh_file},
                {"mesh_checksum", d.mesh_checksum}, {"created_at", d.created_at},
                {"updated_at", d.updated_at}, {"revision", d.revision}};
  if (d.keys) j["keypoints"] = io::to_json(*d.keys);
  if (d.spec) j["spec"] = io::to_json(*d.spec);
  if (d.fit) j["fit"] = io::to_json(*d.fit);
  if (d.tolerance) j["tolerance"] = io::to_json(*d.tolerance);
  if (d.manipulated) j["manipulated"] = io::to_json(*d.manipulated);
  if (d.ensemble) j["ensemble"] = *d.ensemble;
  return j;
}

SessionData session_data_from_json(const io::Json& j) {
  SessionData d;
  try {
    d.id = j.at("id").get<std::string>();
    d.state = parse_state(j.at("state").get<std::string>());
    d.mesh_file = j.at("mesh_file").get<std::string>();
    d.mesh_checksum = j.at("mesh_checksum").get<std::string>();
    d.created_at = j.at("created_at").get<std::int64_t>();
    d.updated_at = j.at("updated_at").get<std::int64_t>();
    d.revision = j.value("revision", std::uint64_t{0});
  } catch (const io::Json::exception& e) {
    fail(ErrorCode::format, std::string("session record: ") + e.what());
  }
  if (j.contains("keypoints")) d.keys = io::key_points_from_json(j["keypoints"]);
  if (j.contains("spec")) d.spec = io::kernel_spec_from_json(j["spec"]);
  if (j.contains("fit")) d.fit = io::fit_result_from_json(j["fit"]);
  if (j.contains("tolerance")) d.tolerance = io::tolerance_from_json(j["tolerance"]);
  if (j.contains("manipulated")) d.manipulated = io::manipulated_from_json(j["manipulated"]);
  if (j.contains("ensemble")) d.ensemble = j["ensemble"];
  return d;
}

SessionStore::SessionStore(fs::path dir, std::chrono::seconds ttl, std::size_t preview_triangles)
    : dir_(std::move(dir)), ttl_(ttl), preview_triangles_(preview_triangles) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::io, "cannot create data directory " + dir_.string() + ": " + ec.message());
}

std::shared_ptr<Session> SessionStore::create(std::string_view bytes, geometry::MeshFormat format) {
  auto mesh = std::make_shared<const geometry::Mesh>(geometry::parse_mesh(bytes, format));
  auto s = std::make_shared<Session>();
  s->mesh = mesh;
  s->preview = std::make_shared<const Preview>(decimate(*mesh, preview_triangles_));
  s->preview_bytes = encode_preview(*s->preview, *mesh);

  std::string id;
  do {
    id = random_token();
  } while (fs::exists(dir_ / id));
  s->dir = dir_ / id;
  fs::create_directories(s->dir);
  s->data.id = id;
  s->data.mesh_file = format == geometry::MeshFormat::obj ? "mesh.obj" : "mesh.ply";
  s->data.mesh_checksum = mesh->checksum();
  s->data.created_at = unix_seconds(Clock::now());
  geometry::write_file(s->dir / s->data.mesh_file, bytes);
  geometry::write_file(s->dir / "preview.bin", s->preview_bytes);
  {
    std::lock_guard lock(s->mu);
    save(*s);
  }
  std::lock_guard lock(mu_);
  cache_[id] = s;
  return s;
}

void SessionStore::save(Session& s) {
  s.data.updated_at = unix_seconds(Clock::now());
  ++s.data.revision;
  const fs::path tmp = s.dir / "session.json.tmp";
  io::write_json(tmp, to_json(s.data));
  std::error_code ec;
  fs::rename(tmp, s.dir / "session.json", ec);
  if (ec) fail(ErrorCode::io, "cannot update " + (s.dir / "session.json").string() + ": " + ec.message());
}

bool SessionStore::expired(const SessionData& d, Clock::time_point now) const {
  return unix_seconds(now) - d.updated_at > ttl_.count();
}

std::shared_ptr<Session> SessionStore::load(const std::string& id) {
  const fs::path dir = dir_ / id;
  if (!fs::exists(dir / "session.json")) return nullptr;
  auto s = std::make_shared<Session>();
  s->dir = dir;
  s->data = session_data_from_json(io::read_json(dir / "session.json"));
  const auto fmt = geometry::format_from_path(s->data.mesh_file);
  auto mesh = std::make_shared<const geometry::Mesh>(geometry::parse_mesh(geometry::read_file(dir / s->data.mesh_file), fmt));
  if (mesh->checksum() != s->data.mesh_checksum)
    fail(ErrorCode::checksum_mismatch, "stored mesh of session " + id + " does not match its checksum");
  s->mesh = mesh;
  // decimation is deterministic, so rebuilding gives the stored preview
  s->preview = std::make_shared<const Preview>(decimate(*mesh, preview_triangles_));
  s->preview_bytes = encode_preview(*s->preview, *mesh);
  return s;
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) {
  if (!valid_id(id)) return nullptr;
  std::lock_guard lock(mu_);
  auto it = cache_.find(id);
  std::shared_ptr<Session> s;
  if (it != cache_.end()) {
    s = it->second;
  } else {
    s = load(id);
    if (!s) return nullptr;
    cache_[id] = s;
  }
  std::lock_guard slock(s->mu);
  if (expired(s->data, Clock::now())) return nullptr;
  return s;
}

bool SessionStore::remove(const std::string& id) {
  if (!valid_id(id)) return false;
  std::lock_guard lock(mu_);
  cache_.erase(id);
  std::error_code ec;
  return fs::remove_all(dir_ / id, ec) > 0;
}

std::size_t SessionStore::collect_garbage(Clock::time_point now) {
  std::lock_guard lock(mu_);
  std::size_t removed = 0;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    const std::string id = entry.path().filename().string();
    if (!entry.is_directory() || !valid_id(id)) continue;
    SessionData d;
    const auto it = cache_.find(id);
    if (it != cache_.end()) {
      std::unique_lock slock(it->second->mu, std::try_to_lock);
      if (!slock.owns_lock()) continue;  // busy, certainly not idle
      std::unique_lock jlock(it->second->job_mu, std::try_to_lock);
      if (!jlock.owns_lock()) continue;  // a job is running on it
      d = it->second->data;
    } else {
      try {
        d = session_data_from_json(io::read_json(entry.path() / "session.json"));
      } catch (const Error&) {
        continue;  // half-written or foreign directory; leave it
      }
    }
    if (!expired(d, now)) continue;
    cache_.erase(id);
    fs::remove_all(entry.path(), ec);
    ++removed;
  }
  return removed;
}

}  // namespace shapemorph::service

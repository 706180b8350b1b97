#include "shapemorph/service/server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdio>

#include "shapemorph/error.hpp"
#include "shapemorph/estimation/fit.hpp"
#include "shapemorph/simulation/conditional.hpp"

namespace fs = std::filesystem;

namespace shapemorph::service {
namespace {

using io::Json;
using httplib::Request;
using httplib::Response;

constexpr std::size_t kMaxCount = 10000;

// HTTP-level failure carrying its own status.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void http_fail(int status, std::string code, std::string message) {
  throw HttpError{status, std::move(code), std::move(message)};
}

void send_json(Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

int status_for(const Error& e) {
  if (e.category() == ErrorCategory::io) return 500;
  return 422;
}

// Wraps a handler so every failure becomes a JSON error body.
template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const Request& req, Response& res) {
    try {
      fn(req, res);
    } catch (const HttpError& e) {
      send_error(res, e.status, e.code, e.message);
    } catch (const Error& e) {
      send_error(res, status_for(e), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      spdlog::error("unhandled: {}", e.what());
      send_error(res, 500, "internal", e.what());
    }
  };
}

Json body_json(const Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) http_fail(400, "format", "request body must be a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    http_fail(400, "format", std::string("invalid JSON: ") + e.what());
  }
}

Json bbox_json(const geometry::Mesh& mesh) {
  const auto b = mesh.bbox();
  return {{"min", {b.min.x(), b.min.y(), b.min.z()}}, {"max", {b.max.x(), b.max.y(), b.max.z()}}};
}

std::string base64(const std::string& bytes) { return httplib::detail::base64_encode(bytes); }

geometry::MeshFormat upload_format(const Request& req) {
  std::string f = req.has_param("format") ? req.get_param_value("format") : "";
  if (f.empty()) {
    const std::string ct = req.get_header_value("Content-Type");
    if (ct.find("ply") != std::string::npos) f = "ply";
    else if (ct.find("obj") != std::string::npos) f = "obj";
  }
  if (f.empty()) f = req.body.rfind("ply", 0) == 0 ? "ply" : "obj";
  if (f == "ply") return geometry::MeshFormat::ply;
  if (f == "obj") return geometry::MeshFormat::obj;
  http_fail(400, "format", "unknown mesh format '" + f + "'");
}

Json session_summary(const Session& s) {
  // caller holds s.mu
  const auto& d = s.data;
  Json j = {{"id", d.id},
            {"state", to_string(d.state)},
            {"n_nodes", s.mesh->node_count()},
            {"n_elems", s.mesh->element_count()},
            {"bbox", bbox_json(*s.mesh)},
            {"mesh_checksum", d.mesh_checksum},
            {"preview", {{"vertices", s.preview->vertex_count()}, {"triangles", s.preview->triangle_count()}}},
            {"created_at", d.created_at},
            {"updated_at", d.updated_at}};
  if (d.keys) j["keypoints"] = {{"count", d.keys->size()}, {"voxel_size", d.keys->voxel_size}};
  if (d.spec) j["spec"] = io::to_json(*d.spec);
  if (d.fit) j["fit"] = {{"nll", d.fit->nll}, {"converged", d.fit->converged}, {"iterations", d.fit->iterations}};
  if (d.tolerance) j["tolerance"] = io::to_json(*d.tolerance);
  if (d.manipulated) j["manipulated"] = io::to_json(*d.manipulated)["manipulated"];
  if (d.ensemble) j["ensemble"] = *d.ensemble;
  return j;
}

std::string instance_file(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "instance_%03zu.ply", k);
  return buf;
}

template <class T>
T number_field(const Json& body, const char* key, T fallback) {
  const auto it = body.find(key);
  if (it == body.end() || it->is_null()) return fallback;
  if (!it->is_number()) http_fail(422, "format", std::string("\"") + key + "\" must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) http_fail(422, "format", std::string("\"") + key + "\" must be an integer");
    if constexpr (std::is_unsigned_v<T>)
      if (it->get<long long>() < 0) http_fail(422, "domain", std::string("\"") + key + "\" must be non-negative");
  }
  return it->get<T>();
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      sessions_(config_.data_dir, config_.ttl, config_.preview_triangles),
      jobs_(std::make_unique<JobQueue>(config_.threads)) {}

Service::~Service() = default;

void Service::mount(httplib::Server& srv) {
  srv.set_payload_max_length(config_.max_body);
  const std::string api = "/api/v1";
  const std::string sid = R"(/sessions/([0-9a-f]+))";

  auto need_session = [this](const Request& req) {
    auto s = sessions_.find(req.matches[1]);
    if (!s) http_fail(404, "not_found", "unknown session " + std::string(req.matches[1]));
    return s;
  };

  srv.Post(api + "/sessions", guarded([this](const Request& req, Response& res) {
             const auto fmt = upload_format(req);
             std::shared_ptr<Session> s;
             try {
               s = sessions_.create(req.body, fmt);
             } catch (const Error& e) {
               if (e.category() == ErrorCategory::io) throw;
               http_fail(400, to_string(e.code()), e.what());
             }
             std::lock_guard lock(s->mu);
             spdlog::info("session {}: {} nodes, {} triangles", s->data.id, s->mesh->node_count(), s->mesh->element_count());
             send_json(res, 201, session_summary(*s));
           }));

  srv.Get(api + sid, guarded([=, this](const Request& req, Response& res) {
            auto s = need_session(req);
            std::lock_guard lock(s->mu);
            send_json(res, 200, session_summary(*s));
          }));

  srv.Delete(api + sid, guarded([this](const Request& req, Response& res) {
               if (!sessions_.remove(req.matches[1])) http_fail(404, "not_found", "unknown session");
               res.status = 204;
             }));

  srv.Get(api + sid + "/preview", guarded([=, this](const Request& req, Response& res) {
            auto s = need_session(req);
            res.set_header("X-Preview-Vertices", std::to_string(s->preview->vertex_count()));
            res.set_header("X-Preview-Triangles", std::to_string(s->preview->triangle_count()));
            res.set_content(s->preview_bytes, "application/octet-stream");
          }));

  srv.Get(api + sid + "/preview/nodes", guarded([=, this](const Request& req, Response& res) {
            auto s = need_session(req);
            send_json(res, 200, {{"nodes", s->preview->nodes}});
          }));

  srv.Post(api + sid + "/keypoints", guarded([=, this](const Request& req, Response& res) {
             auto s = need_session(req);
             const Json body = body_json(req);
             if (!body.contains("voxel_size") || !body["voxel_size"].is_number())
               http_fail(422, "domain", "\"voxel_size\" (mm) is required");
             const auto keys = geometry::select_key_points(*s->mesh, body["voxel_size"].get<double>());
             Json coords = Json::array(), idx = Json::array();
             for (Eigen::Index k : keys.indices) {
               idx.push_back(k);
               coords.push_back({s->mesh->nodes()(k, 0), s->mesh->nodes()(k, 1), s->mesh->nodes()(k, 2)});
             }
             {
               std::lock_guard lock(s->mu);
               s->data.keys = keys;
               s->data.manipulated.reset();  // positions refer to the old key list
               s->data.state = std::max(s->data.state, SessionState::keys_selected);
               sessions_.save(*s);
             }
             send_json(res, 200, {{"count", keys.size()}, {"voxel_size", keys.voxel_size}, {"mesh_checksum", keys.mesh_id},
                                  {"indices", idx}, {"coordinates", coords}});
           }));

  srv.Post(api + sid + "/fit", guarded([=, this](const Request& req, Response& res) {
             auto s = need_session(req);
             const Json body = body_json(req);
             geometry::KeyPointSet keys;
             std::uint64_t revision = 0;
             {
               std::lock_guard lock(s->mu);
               if (!s->data.keys) http_fail(409, "state", "select key points before fitting");
               keys = *s->data.keys;
               revision = s->data.revision;
             }
             if (body.contains("spec")) {
               const kernels::KernelSpec spec = io::kernel_spec_from_json(body["spec"]);
               std::lock_guard lock(s->mu);
               s->data.spec = spec;
               s->data.fit.reset();
               s->data.state = std::max(s->data.state, SessionState::spec_ready);
               sessions_.save(*s);
               send_json(res, 200, {{"spec", io::to_json(spec)}, {"state", to_string(s->data.state)}});
               return;
             }
             if (!body.contains("deviation")) http_fail(422, "format", "give \"spec\" or a per-node \"deviation\" array");
             Eigen::VectorXd dev;
             try {
               const auto v = body["deviation"].get<std::vector<double>>();
               dev = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
             } catch (const Json::exception&) {
               http_fail(422, "format", "\"deviation\" must be an array of numbers");
             }
             if (dev.size() != s->mesh->node_count())
               http_fail(422, "shape", "\"deviation\" has " + std::to_string(dev.size()) + " values for " +
                                           std::to_string(s->mesh->node_count()) + " nodes");
             if (!dev.allFinite()) http_fail(422, "domain", "\"deviation\" values must be finite");

             const int dim = number_field<int>(body, "dim", 3);
             kernels::KernelSpec tmpl;
             tmpl.dim = dim;
             if (dim < 1 || dim > 3) http_fail(422, "domain", "\"dim\" must be 1, 2 or 3");
             std::vector<std::string> families{"matern52"};
             if (body.contains("families")) {
               try {
                 families = body["families"].get<std::vector<std::string>>();
               } catch (const Json::exception&) {
                 http_fail(422, "format", "\"families\" must be an array of names");
               }
             }
             for (const auto& f : families) {
               kernels::KernelTerm t;
               t.family = kernels::parse_family(f);
               t.lengths = Eigen::VectorXd::Ones(dim);
               if (t.family == kernels::Family::periodic) t.periods = Eigen::VectorXd::Ones(dim);
               tmpl.terms.push_back(t);
             }
             estimation::FitConfig cfg;
             cfg.restarts = number_field<int>(body, "restarts", cfg.restarts);
             cfg.max_iters = number_field<int>(body, "max_iters", cfg.max_iters);
             cfg.seed = number_field<std::uint64_t>(body, "seed", 0);
             estimation::validate(cfg);

             const std::string jid = jobs_->submit("fit", s->data.id, [=, this](JobContext& ctx) {
               std::lock_guard serial(s->job_mu);
               const Eigen::MatrixXd X = kernels::as_points(geometry::key_coordinates(*s->mesh, keys), dim);
               Eigen::VectorXd z(X.rows());
               for (std::size_t k = 0; k < keys.size(); ++k) z[static_cast<Eigen::Index>(k)] = dev[keys.indices[k]];
               if (ctx.cancelled()) fail(ErrorCode::cancelled, "job cancelled");
               const auto fit = estimation::fit_params(X, z, tmpl, cfg);
               Json result = io::to_json(fit);
               ctx.commit([&] {
                 std::lock_guard lock(s->mu);
                 if (s->data.revision != revision) fail(ErrorCode::domain, "session changed while the fit ran");
                 s->data.spec = fit.spec;
                 s->data.fit = fit;
                 s->data.state = std::max(s->data.state, SessionState::spec_ready);
                 sessions_.save(*s);
               });
               return result;
             });
             send_json(res, 202, {{"job_id", jid}, {"status", "queued"}, {"poll", "/api/v1/jobs/" + jid}});
           }));

  srv.Post(api + sid + "/simulate", guarded([=, this](const Request& req, Response& res) {
             auto s = need_session(req);
             const Json body = body_json(req);
             geometry::KeyPointSet keys;
             kernels::KernelSpec spec;
             std::uint64_t revision = 0;
             {
               std::lock_guard lock(s->mu);
               if (!s->data.spec || !s->data.keys) http_fail(409, "state", "session has no covariance spec yet");
               keys = *s->data.keys;
               spec = *s->data.spec;
               revision = s->data.revision;
             }
             if (!body.contains("usl") || !body.contains("p")) http_fail(422, "domain", "\"usl\" and \"p\" are required");
             const auto tol = simulation::make_tolerance(number_field<double>(body, "usl", 0.0), number_field<double>(body, "p", 0.0));
             const long long count = number_field<long long>(body, "count", 1);
             if (count < 1 || static_cast<std::size_t>(count) > kMaxCount)
               http_fail(422, "domain", "\"count\" must lie in [1, " + std::to_string(kMaxCount) + "]");
             const std::uint64_t seed = number_field<std::uint64_t>(body, "seed", 0);

             // scenario first, then explicit keys override or extend it
             geometry::ManipulatedKeySet man;
             if (body.contains("scenario") && !body["scenario"].is_null())
               man = io::apply_scenario(io::scenario_from_json(body["scenario"]), keys, *s->mesh);
             if (body.contains("manipulated")) {
               const auto extra = io::manipulated_from_array(body["manipulated"]);
               for (std::size_t k = 0; k < extra.size(); ++k) {
                 const auto pos = std::find(man.selected.begin(), man.selected.end(), extra.selected[k]);
                 const double v = extra.deviations[static_cast<Eigen::Index>(k)];
                 if (pos != man.selected.end()) {
                   man.deviations[pos - man.selected.begin()] = v;
                 } else {
                   man.selected.push_back(extra.selected[k]);
                   man.deviations.conservativeResize(man.deviations.size() + 1);
                   man.deviations[man.deviations.size() - 1] = v;
                 }
               }
             }
             geometry::validate(man, keys);

             simulation::SimulationOptions opt;
             opt.energy = number_field<double>(body, "energy", 0.99);
             const std::string method = body.value("method", "auto");
             if (method == "auto")
               opt.method = static_cast<std::size_t>(s->mesh->node_count()) <= opt.dense_limit ? simulation::Method::cholesky
                                                                                                : simulation::Method::reduced;
             else
               opt.method = simulation::parse_method(method);

             const std::string jid = jobs_->submit("simulate", s->data.id, [=, this](JobContext& ctx) mutable {
               std::lock_guard serial(s->job_mu);
               opt.progress = [&ctx](std::size_t done, std::size_t total) {
                 ctx.set_progress(static_cast<double>(done) / static_cast<double>(total));
                 return !ctx.cancelled();
               };
               const auto ens = simulation::conditional_simulate(spec, *s->mesh, keys, man, tol, static_cast<std::size_t>(count), seed, opt);
               const fs::path staging = s->dir / ("ensemble.staging");
               fs::remove_all(staging);
               const Json manifest = io::write_ensemble(ens, *s->mesh, staging);

               const std::string base = "/api/v1/sessions/" + s->data.id + "/ensemble/";
               Json instances = Json::array();
               for (std::size_t k = 0; k < ens.instances.size(); ++k) {
                 Json m = manifest["instances"][k];
                 m["values_f32"] = base64(sample_float32(*s->preview, ens.instances[k].values));
                 m["ply"] = base + std::to_string(k) + ".ply";
                 instances.push_back(std::move(m));
               }
               Json mean = manifest["mean"];
               mean["values_f32"] = base64(sample_float32(*s->preview, ens.mean_field.values));
               Json result = {{"count", ens.instances.size()},
                              {"seed", seed},
                              {"method", simulation::to_string(ens.provenance.method)},
                              {"tolerance", io::to_json(ens.tolerance)},
                              {"conformance", manifest["conformance"]},
                              {"manipulated", io::to_json(man)["manipulated"]},
                              {"preview_vertices", s->preview->vertex_count()},
                              {"mean", std::move(mean)},
                              {"instances", std::move(instances)}};
               if (manifest.contains("basis")) result["basis"] = manifest["basis"];

               ctx.commit([&] {
                 std::lock_guard lock(s->mu);
                 if (s->data.revision != revision) fail(ErrorCode::domain, "session changed while the simulation ran");
                 const fs::path final_dir = s->dir / "ensemble";
                 fs::remove_all(final_dir);
                 fs::rename(staging, final_dir);
                 Json summary = manifest;
                 summary.erase("spec");
                 s->data.ensemble = std::move(summary);
                 s->data.tolerance = ens.tolerance;
                 s->data.manipulated = man;
                 s->data.state = SessionState::simulated;
                 sessions_.save(*s);
               });
               return result;
             });
             send_json(res, 202, {{"job_id", jid}, {"status", "queued"}, {"poll", "/api/v1/jobs/" + jid}});
           }));

  srv.Get(api + sid + R"(/ensemble/(\d+)\.ply)", guarded([=, this](const Request& req, Response& res) {
            auto s = need_session(req);
            const std::size_t k = std::stoul(req.matches[2]);
            fs::path file;
            {
              std::lock_guard lock(s->mu);
              if (!s->data.ensemble) http_fail(404, "not_found", "session has no ensemble");
              file = s->dir / "ensemble" / instance_file(k);
            }
            if (!fs::exists(file)) http_fail(404, "not_found", "no instance " + std::to_string(k));
            res.set_content(geometry::read_file(file), "application/octet-stream");
          }));

  auto job_json = [](const JobInfo& j) {
    Json out = {{"id", j.id}, {"kind", j.kind}, {"session", j.session}, {"status", to_string(j.status)}, {"progress", j.progress}};
    if (j.status == JobStatus::done) out["result"] = j.result;
    if (j.status == JobStatus::failed || j.status == JobStatus::cancelled)
      out["error"] = {{"code", j.error_code.empty() ? "cancelled" : j.error_code}, {"message", j.error}};
    return out;
  };

  srv.Get(api + R"(/jobs/([0-9a-f]+))", guarded([=, this](const Request& req, Response& res) {
            const auto j = jobs_->get(req.matches[1]);
            if (!j) http_fail(404, "not_found", "unknown job");
            send_json(res, 200, job_json(*j));
          }));

  srv.Delete(api + R"(/jobs/([0-9a-f]+))", guarded([=, this](const Request& req, Response& res) {
               if (!jobs_->get(req.matches[1])) http_fail(404, "not_found", "unknown job");
               const bool accepted = jobs_->cancel(req.matches[1]);
               send_json(res, accepted ? 202 : 409, job_json(*jobs_->get(req.matches[1])));
             }));
}

}  // namespace shapemorph::service

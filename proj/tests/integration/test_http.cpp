// Drives the /api/v1 routes through a real socket against an in-process server.
#include "shapemorph/geometry/mesh_io.hpp"
#include "shapemorph/service/server.hpp"
#include "support/test_util.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <chrono>
#include <cstring>
#include <sstream>
#include <thread>

using namespace shapemorph;
using io::Json;

namespace {

std::string decode_base64(const std::string& text) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::string s = text;
  const auto pad = std::count(s.begin(), s.end(), '=');
  std::replace(s.begin(), s.end(), '=', 'A');
  std::string out(It(s.cbegin()), It(s.cend()));
  out.erase(out.size() - static_cast<std::size_t>(pad));
  return out;
}

std::vector<float> floats(const std::string& bytes) {
  std::vector<float> v(bytes.size() / 4);
  std::memcpy(v.data(), bytes.data(), v.size() * 4);
  return v;
}

std::string plate_obj(int n, double spacing) {
  std::ostringstream out;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out << "v " << i * spacing << ' ' << j * spacing << " 0\n";
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const int a = j * n + i + 1, b = a + 1, c = a + n, d = c + 1;
      out << "f " << a << ' ' << b << ' ' << d << "\nf " << a << ' ' << d << ' ' << c << '\n';
    }
  return out.str();
}

const char* kSpec = R"({"D":3,"schema":1,"terms":[{"family":"matern52","lengths":[8.0,8.0,8.0],"sigma_f2":1.0}]})";

class Http : public ::testing::Test {
 protected:
  Http() : dir_("http") {}

  void SetUp() override { start(); }
  void TearDown() override { stop(); }

  void start(std::size_t max_body = std::size_t{256} << 20) {
    service::ServiceConfig cfg;
    cfg.data_dir = dir_.path();
    cfg.max_body = max_body;
    service_ = std::make_unique<service::Service>(cfg);
    server_ = std::make_unique<httplib::Server>();
    service_->mount(*server_);
    port_ = server_->bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }

  void stop() {
    if (!server_) return;
    server_->stop();
    thread_.join();
    client_.reset();
    server_.reset();
    service_.reset();
  }

  httplib::Result post(const std::string& path, const std::string& body, const char* type = "application/json") {
    return client_->Post(("/api/v1" + path).c_str(), body, type);
  }
  httplib::Result get(const std::string& path) { return client_->Get(("/api/v1" + path).c_str()); }
  httplib::Result del(const std::string& path) { return client_->Delete(("/api/v1" + path).c_str()); }

  static Json json_of(const httplib::Result& r) { return Json::parse(r->body); }

  std::string upload(int n = 21) {
    auto r = post("/sessions", plate_obj(n, 1.0), "text/plain");
    EXPECT_EQ(r->status, 201) << r->body;
    return json_of(r)["id"];
  }

  // Session with 5 mm key points and a fixed spec.
  std::string ready_session() {
    const std::string id = upload();
    EXPECT_EQ(post("/sessions/" + id + "/keypoints", R"({"voxel_size":5})")->status, 200);
    EXPECT_EQ(post("/sessions/" + id + "/fit", std::string(R"({"spec":)") + kSpec + "}")->status, 200);
    return id;
  }

  Json finish(const httplib::Result& accepted) {
    EXPECT_EQ(accepted->status, 202) << accepted->body;
    if (accepted->status != 202) return Json::object();
    const std::string jid = json_of(accepted)["job_id"];
    EXPECT_EQ(json_of(accepted)["poll"], "/api/v1/jobs/" + jid);
    return finish_existing(jid);
  }

  Json finish_existing(const std::string& jid) {
    service_->jobs().wait(jid);
    auto r = get("/jobs/" + jid);
    EXPECT_EQ(r->status, 200);
    return json_of(r);
  }

  test::TempDir dir_;
  std::unique_ptr<service::Service> service_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_F(Http, UploadAndPreview) {
  auto r = post("/sessions", plate_obj(11, 2.0), "model/obj");
  ASSERT_EQ(r->status, 201);
  const Json s = json_of(r);
  EXPECT_EQ(s["n_nodes"], 121);
  EXPECT_EQ(s["n_elems"], 200);
  EXPECT_EQ(s["state"], "mesh_loaded");
  EXPECT_EQ(s["bbox"]["max"], Json::array({20.0, 20.0, 0.0}));
  EXPECT_EQ(s["preview"]["triangles"], 200);

  auto p = get("/sessions/" + s["id"].get<std::string>() + "/preview");
  ASSERT_EQ(p->status, 200);
  EXPECT_EQ(p->get_header_value("Content-Type"), "application/octet-stream");
  EXPECT_EQ(p->body.substr(0, 4), "SMPV");
  EXPECT_EQ(p->body.size(), 16u + 12 * 121 + 12 * 200 + 12 * 121);
}

TEST_F(Http, UploadPlyByQuery) {
  const auto mesh = geometry::make_plate(4, 4, 1.0, 1.0);
  std::ostringstream ply;
  geometry::write_ply(ply, mesh, Eigen::VectorXd::Zero(16));
  // form-urlencoded is what browsers and curl send for raw bodies
  auto r = post("/sessions?format=ply", ply.str(), "application/x-www-form-urlencoded");
  ASSERT_EQ(r->status, 201) << r->body;
  EXPECT_EQ(json_of(r)["mesh_checksum"], mesh.checksum());
}

TEST_F(Http, RejectsBadUploads) {
  auto r = post("/sessions", "v 0 0 0\nf 1 2 3\n", "text/plain");
  EXPECT_EQ(r->status, 400);
  EXPECT_TRUE(json_of(r)["error"].contains("code"));
  EXPECT_EQ(post("/sessions?format=stl", "solid", "text/plain")->status, 400);

  stop();
  start(1024);
  EXPECT_EQ(post("/sessions", plate_obj(21, 1.0), "text/plain")->status, 413);
}

TEST_F(Http, UnknownResources) {
  EXPECT_EQ(get("/sessions/0123456789abcdef")->status, 404);
  EXPECT_EQ(json_of(get("/sessions/0123456789abcdef"))["error"]["code"], "not_found");
  EXPECT_EQ(post("/sessions/0123456789abcdef/keypoints", R"({"voxel_size":5})")->status, 404);
  EXPECT_EQ(get("/jobs/0123456789abcdef")->status, 404);
  EXPECT_EQ(del("/jobs/0123456789abcdef")->status, 404);
  EXPECT_EQ(del("/sessions/0123456789abcdef")->status, 404);
}

TEST_F(Http, KeyPointsRoute) {
  const std::string id = upload();
  auto r = post("/sessions/" + id + "/keypoints", R"({"voxel_size":5})");
  ASSERT_EQ(r->status, 200);
  const Json k = json_of(r);
  EXPECT_EQ(k["count"], 16);  // 20 mm plate, 4 x 4 voxels
  EXPECT_EQ(k["indices"].size(), 16u);
  EXPECT_EQ(k["coordinates"][0], Json::array({2.0, 2.0, 0.0}));
  EXPECT_EQ(json_of(get("/sessions/" + id))["state"], "keys_selected");

  EXPECT_EQ(post("/sessions/" + id + "/keypoints", R"({"voxel_size":-1})")->status, 422);
  EXPECT_EQ(post("/sessions/" + id + "/keypoints", R"({})")->status, 422);
  EXPECT_EQ(post("/sessions/" + id + "/keypoints", "{not json")->status, 400);
}

TEST_F(Http, StateOrderingIsEnforced) {
  const std::string id = upload();
  EXPECT_EQ(post("/sessions/" + id + "/fit", std::string(R"({"spec":)") + kSpec + "}")->status, 409);
  EXPECT_EQ(post("/sessions/" + id + "/simulate", R"({"usl":1,"p":0.99})")->status, 409);
  post("/sessions/" + id + "/keypoints", R"({"voxel_size":5})");
  EXPECT_EQ(post("/sessions/" + id + "/simulate", R"({"usl":1,"p":0.99})")->status, 409);
  EXPECT_EQ(get("/sessions/" + id + "/ensemble/0.ply")->status, 404);
}

TEST_F(Http, SpecRoundTripsByteEqual) {
  const std::string id = upload();
  post("/sessions/" + id + "/keypoints", R"({"voxel_size":5})");
  auto r = post("/sessions/" + id + "/fit", std::string(R"({"spec":)") + kSpec + "}");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r)["spec"].dump(), kSpec);
  EXPECT_EQ(json_of(get("/sessions/" + id))["spec"].dump(), kSpec);

  EXPECT_EQ(post("/sessions/" + id + "/fit", R"({"spec":{"D":3,"terms":[]}})")->status, 422);
  EXPECT_EQ(post("/sessions/" + id + "/fit", R"({"spec":{"D":3,"schema":9,"terms":[]}})")->status, 422);
}

TEST_F(Http, FitJob) {
  const std::string id = upload();
  post("/sessions/" + id + "/keypoints", R"({"voxel_size":4})");
  Json dev = Json::array();
  for (int j = 0; j < 21; ++j)
    for (int i = 0; i < 21; ++i) dev.push_back(0.3 * std::sin(i / 3.0) * std::cos(j / 4.0));
  EXPECT_EQ(post("/sessions/" + id + "/fit", Json{{"deviation", {1.0, 2.0}}}.dump())->status, 422);
  const Json job = finish(post("/sessions/" + id + "/fit",
                               Json{{"deviation", dev}, {"families", {"squared_exponential"}}, {"dim", 2}, {"restarts", 2}}.dump()));
  ASSERT_EQ(job["status"], "done") << job.dump();
  EXPECT_EQ(job["kind"], "fit");
  EXPECT_TRUE(std::isfinite(job["result"]["nll"].get<double>()));
  const Json s = json_of(get("/sessions/" + id));
  EXPECT_EQ(s["state"], "spec_ready");
  EXPECT_EQ(s["spec"]["terms"], job["result"]["terms"]);
  EXPECT_EQ(s["spec"]["D"], 2);
  EXPECT_EQ(s["fit"]["nll"], job["result"]["nll"]);
}

TEST_F(Http, SimulateValidatesSynchronously) {
  const std::string id = ready_session();
  const std::string base = "/sessions/" + id + "/simulate";
  EXPECT_EQ(post(base, R"({"usl":-1,"p":0.99})")->status, 422);
  EXPECT_EQ(post(base, R"({"usl":1,"p":1.5})")->status, 422);
  EXPECT_EQ(post(base, R"({"usl":1})")->status, 422);
  EXPECT_EQ(post(base, R"({"usl":1,"p":0.99,"count":0})")->status, 422);
  EXPECT_EQ(post(base, R"({"usl":1,"p":0.99,"manipulated":[{"key_index":99,"deviation":0.1}]})")->status, 422);
  EXPECT_EQ(post(base, R"({"usl":1,"p":0.99,"method":"magic"})")->status, 422);
  EXPECT_EQ(post(base, R"({"usl":1,"p":0.99,"scenario":{"type":"patch","box":{"min":[50,50,0],"max":[60,60,0]},"dev":0.2}})")->status, 422);
}

TEST_F(Http, SimulateEnsemble) {
  const std::string id = ready_session();
  const auto nodes = json_of(post("/sessions/" + id + "/keypoints", R"({"voxel_size":5})"))["indices"];
  const Json job = finish(post("/sessions/" + id + "/simulate",
                               R"({"usl":1,"p":0.99,"count":3,"seed":11,
                                   "scenario":{"type":"form_only"},
                                   "manipulated":[{"key_index":5,"deviation":0.4}]})"));
  ASSERT_EQ(job["status"], "done") << job.dump();
  const Json res = job["result"];
  EXPECT_EQ(res["count"], 3);
  EXPECT_EQ(res["method"], "cholesky");  // auto, small mesh
  EXPECT_EQ(res["instances"].size(), 3u);

  // key 5 follows the explicit override; form-only zeroes the other 15
  EXPECT_EQ(res["manipulated"].size(), 16u);
  const auto preview_nodes = json_of(get("/sessions/" + id + "/preview/nodes"))["nodes"].get<std::vector<int>>();

  for (std::size_t k = 0; k < 3; ++k) {
    const Json inst = res["instances"][k];
    EXPECT_EQ(inst["stream"], k);
    EXPECT_EQ(inst["ply"], "/api/v1/sessions/" + id + "/ensemble/" + std::to_string(k) + ".ply");
    const auto values = floats(decode_base64(inst["values_f32"]));
    ASSERT_EQ(values.size(), preview_nodes.size());

    auto ply = get("/sessions/" + id + "/ensemble/" + std::to_string(k) + ".ply");
    ASSERT_EQ(ply->status, 200);
    const auto data = geometry::parse_mesh_data(ply->body, geometry::MeshFormat::ply);
    const Eigen::VectorXd& dev = data.vertex_scalars.at("deviation");
    for (std::size_t v = 0; v < values.size(); ++v) EXPECT_EQ(values[v], static_cast<float>(dev[preview_nodes[v]]));
    EXPECT_NEAR(dev[nodes[5].get<int>()], 0.4, 1e-6);
    EXPECT_NEAR(dev[nodes[0].get<int>()], 0.0, 1e-6);
  }
  EXPECT_EQ(get("/sessions/" + id + "/ensemble/3.ply")->status, 404);

  const Json s = json_of(get("/sessions/" + id));
  EXPECT_EQ(s["state"], "simulated");
  EXPECT_EQ(s["manipulated"], res["manipulated"]);
  EXPECT_EQ(s["ensemble"]["count"], 3);
}

TEST_F(Http, SimulateIsReproducible) {
  const std::string id = ready_session();
  const std::string body = R"({"usl":0.8,"p":0.95,"count":2,"seed":5,"scenario":{"type":"bend","axis":{"point":[0,0,0],"direction":[0,1,0]},"max_dev":0.3}})";
  const Json a = finish(post("/sessions/" + id + "/simulate", body));
  const Json b = finish(post("/sessions/" + id + "/simulate", body));
  ASSERT_EQ(a["status"], "done") << a.dump();
  EXPECT_EQ(a["result"].dump(), b["result"].dump());
}

TEST_F(Http, CancelLeavesSessionUntouched) {
  const std::string id = ready_session();
  auto session = service_->sessions().find(id);
  std::string jid;
  {
    // hold the session's job lock so the job is parked inside its task
    std::lock_guard park(session->job_mu);
    auto r = post("/sessions/" + id + "/simulate", R"({"usl":1,"p":0.99,"count":50})");
    ASSERT_EQ(r->status, 202);
    jid = json_of(r)["job_id"];
    for (int i = 0; i < 200 && json_of(get("/jobs/" + jid))["status"] != "running"; ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    auto c = del("/jobs/" + jid);
    EXPECT_EQ(c->status, 202);
  }
  service_->jobs().wait(jid);
  const Json job = json_of(get("/jobs/" + jid));
  EXPECT_EQ(job["status"], "cancelled");
  EXPECT_EQ(job["error"]["code"], "cancelled");
  EXPECT_EQ(del("/jobs/" + jid)->status, 409);

  const Json s = json_of(get("/sessions/" + id));
  EXPECT_EQ(s["state"], "spec_ready");
  EXPECT_FALSE(s.contains("ensemble"));
}

TEST_F(Http, StaleJobDoesNotCommit) {
  const std::string id = ready_session();
  auto session = service_->sessions().find(id);
  std::string jid;
  {
    std::lock_guard park(session->job_mu);
    auto r = post("/sessions/" + id + "/simulate", R"({"usl":1,"p":0.99,"count":2})");
    jid = json_of(r)["job_id"];
    // a newer spec arrives while the job waits
    ASSERT_EQ(post("/sessions/" + id + "/fit", std::string(R"({"spec":)") + kSpec + "}")->status, 200);
  }
  const Json job = finish_existing(jid);
  EXPECT_EQ(job["status"], "failed");
  EXPECT_EQ(json_of(get("/sessions/" + id))["state"], "spec_ready");
}

TEST_F(Http, SessionsSurviveRestart) {
  const std::string id = ready_session();
  const std::string preview = get("/sessions/" + id + "/preview")->body;
  stop();
  start();
  auto r = get("/sessions/" + id);
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r)["state"], "spec_ready");
  EXPECT_EQ(json_of(r)["spec"].dump(), kSpec);
  EXPECT_EQ(get("/sessions/" + id + "/preview")->body, preview);
  const Json job = finish(post("/sessions/" + id + "/simulate", R"({"usl":1,"p":0.99,"count":1})"));
  EXPECT_EQ(job["status"], "done");
}

TEST_F(Http, DeleteSession) {
  const std::string id = upload();
  EXPECT_EQ(del("/sessions/" + id)->status, 204);
  EXPECT_EQ(get("/sessions/" + id)->status, 404);
  EXPECT_FALSE(std::filesystem::exists(dir_ / id));
}

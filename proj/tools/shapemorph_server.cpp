// HTTP front end for the session API. Configuration comes from
// SHAPEMORPH_DATA_DIR / SHAPEMORPH_PORT / SHAPEMORPH_THREADS, overridden by flags.
// project headers first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen
#include "shapemorph/service/server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <cstdlib>
#include <thread>

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  shapemorph::service::ServiceConfig cfg;
  cfg.data_dir = env_or("SHAPEMORPH_DATA_DIR", cfg.data_dir.string());
  int port = std::stoi(env_or("SHAPEMORPH_PORT", "8080"));
  cfg.threads = std::stoul(env_or("SHAPEMORPH_THREADS", "1"));
  std::string host = "127.0.0.1";
  long long ttl_hours = 24;
  std::size_t max_body_mb = cfg.max_body >> 20;
  int gc_minutes = 10;

  CLI::App app{"shapemorph session service"};
  app.add_option("--data-dir", cfg.data_dir, "session storage directory");
  app.add_option("--host", host, "bind address");
  app.add_option("--port", port, "listen port (0 picks a free one)")->check(CLI::Range(0, 65535));
  app.add_option("--threads", cfg.threads, "job worker threads")->check(CLI::PositiveNumber);
  app.add_option("--ttl-hours", ttl_hours, "idle session lifetime")->check(CLI::PositiveNumber);
  app.add_option("--max-body-mb", max_body_mb, "upload limit")->check(CLI::PositiveNumber);
  app.add_option("--gc-minutes", gc_minutes, "garbage collection interval")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  cfg.ttl = std::chrono::hours(ttl_hours);
  cfg.max_body = max_body_mb << 20;

  try {
    shapemorph::service::Service service(cfg);
    httplib::Server srv;
    service.mount(srv);
    srv.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::info("{} {} -> {}", req.method, req.path, res.status);
    });

    if (port == 0) {
      port = srv.bind_to_any_port(host);
    } else if (!srv.bind_to_port(host, port)) {
      spdlog::error("cannot bind {}:{}", host, port);
      return 3;
    }
    if (port < 0) {
      spdlog::error("cannot bind {}", host);
      return 3;
    }

    std::mutex gc_mu;
    std::condition_variable gc_cv;
    bool stopping = false;
    std::thread gc([&] {
      std::unique_lock lock(gc_mu);
      while (!gc_cv.wait_for(lock, std::chrono::minutes(gc_minutes), [&] { return stopping; })) {
        const auto n = service.sessions().collect_garbage();
        if (n) spdlog::info("expired {} session(s)", n);
      }
    });

    g_server = &srv;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    spdlog::info("listening on http://{}:{}/api/v1 (data in {})", host, port, cfg.data_dir.string());
    srv.listen_after_bind();

    {
      std::lock_guard lock(gc_mu);
      stopping = true;
    }
    gc_cv.notify_all();
    gc.join();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}

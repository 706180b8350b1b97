// shapemorph: file-based workflow from nominal mesh and measurements to
// fitted covariance and conditional part ensembles.
//
// Exit codes: 0 ok, 2 invalid input, 3 file I/O, 4 numerical failure.

#include <omp.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>

#include "shapemorph/error.hpp"
#include "shapemorph/estimation/batch.hpp"
#include "shapemorph/estimation/fit.hpp"
#include "shapemorph/geometry/deviation.hpp"
#include "shapemorph/geometry/keypoints.hpp"
#include "shapemorph/geometry/mesh_io.hpp"
#include "shapemorph/io/json.hpp"
#include "shapemorph/simulation/conditional.hpp"

namespace fs = std::filesystem;
using namespace shapemorph;
using io::Json;

namespace {

struct Globals {
  int threads = 0;
  std::uint64_t seed = 0;
  fs::path output_dir = ".";
  bool output_dir_given = false;  // an explicit flag beats a manifest's output_dir
  std::string log_level = "info";
};

fs::path out_path(const Globals& g, const std::string& given, const std::string& fallback) {
  if (!given.empty()) return given;
  return g.output_dir / fallback;
}

void ensure_dir(const fs::path& file) {
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  if (ec) fail(ErrorCode::io, "cannot create " + file.parent_path().string() + ": " + ec.message());
}

Eigen::VectorXd load_deviation(const fs::path& path, const geometry::Mesh& mesh) {
  geometry::MeshData d = geometry::read_mesh_data(path);
  const auto it = d.vertex_scalars.find("deviation");
  if (it == d.vertex_scalars.end()) fail(ErrorCode::format, path.string() + " has no per-vertex 'deviation' property");
  if (it->second.size() != mesh.node_count())
    fail(ErrorCode::shape, path.string() + " has " + std::to_string(it->second.size()) + " vertices, mesh has " +
                               std::to_string(mesh.node_count()));
  return it->second;
}

geometry::KeyPointSet load_keys(const fs::path& path, const geometry::Mesh& mesh) {
  geometry::KeyPointSet keys = io::key_points_from_json(io::read_json(path));
  geometry::validate(keys, mesh);
  return keys;
}

// --- deviation -------------------------------------------------------------

struct DeviationArgs {
  std::string mesh, cop, displacement, out, vtk;
  double max_dist = 0.0;
};

void cmd_deviation(const Globals& g, const DeviationArgs& a) {
  const geometry::Mesh mesh = geometry::load_mesh(a.mesh);
  geometry::DeviationField f;
  if (!a.cop.empty()) {
    if (!(a.max_dist > 0.0)) fail(ErrorCode::domain, "--max-dist must be positive with --cop");
    f = geometry::deviation_from_cop(mesh, geometry::load_point_cloud(a.cop), a.max_dist);
  } else {
    f = geometry::deviation_from_displacement(mesh, geometry::load_displacement(a.displacement));
  }
  const fs::path out = out_path(g, a.out, fs::path(a.mesh).stem().string() + "_dev.ply");
  ensure_dir(out);
  geometry::write_ply(out, mesh, f.values);
  if (!a.vtk.empty()) geometry::write_vtk(a.vtk, mesh, f.values);

  const auto st = geometry::field_stats(f.values);
  const Json summary = {{"schema", io::kSchema}, {"mesh_checksum", mesh.checksum()}, {"n_nodes", mesh.node_count()},
                        {"min", st.min},         {"max", st.max},                   {"rms", st.rms},
                        {"missing_count", f.missing_count()}, {"deviation_file", out.filename().string()}};
  fs::path summary_path = out;
  summary_path.replace_extension(".json");
  io::write_json(summary_path, summary);
  spdlog::info("deviation: rms {:.4g} mm, range [{:.4g}, {:.4g}], {} missing -> {}", st.rms, st.min, st.max,
               f.missing_count(), out.string());
}

// --- keypoints -------------------------------------------------------------

struct KeypointArgs {
  std::string mesh, out;
  double voxel = 0.0;
};

void cmd_keypoints(const Globals& g, const KeypointArgs& a) {
  const geometry::Mesh mesh = geometry::load_mesh(a.mesh);
  const auto keys = geometry::select_key_points(mesh, a.voxel);
  const fs::path out = out_path(g, a.out, "keypoints.json");
  ensure_dir(out);
  io::write_json(out, io::to_json(keys));
  spdlog::info("keypoints: {} of {} nodes -> {}", keys.size(), mesh.node_count(), out.string());
}

// --- fit ---------------------------------------------------------------------

struct FitArgs {
  std::string mesh, deviation, keypoints, out;
  double voxel = 0.0;
  std::vector<std::string> families{"matern52"};
  int dim = 3;
  estimation::FitConfig cfg;
};

void cmd_fit(const Globals& g, FitArgs a) {
  const geometry::Mesh mesh = geometry::load_mesh(a.mesh);
  const Eigen::VectorXd dev = load_deviation(a.deviation, mesh);
  geometry::KeyPointSet keys;
  if (!a.keypoints.empty()) {
    keys = load_keys(a.keypoints, mesh);
  } else {
    if (!(a.voxel > 0.0)) fail(ErrorCode::domain, "give --keypoints or a positive --voxel-size");
    keys = geometry::select_key_points(mesh, a.voxel);
    const fs::path kp = g.output_dir / "keypoints.json";
    ensure_dir(kp);
    io::write_json(kp, io::to_json(keys));
  }
  if (a.dim < 1 || a.dim > 3) fail(ErrorCode::domain, "--dim must be 1, 2 or 3");

  kernels::KernelSpec tmpl;
  tmpl.dim = a.dim;
  for (const auto& fam : a.families) {
    kernels::KernelTerm t;
    t.family = kernels::parse_family(fam);
    t.lengths = Eigen::VectorXd::Ones(a.dim);
    if (t.family == kernels::Family::periodic) t.periods = Eigen::VectorXd::Ones(a.dim);
    tmpl.terms.push_back(t);
  }
  a.cfg.seed = g.seed;

  const Eigen::MatrixXd X = kernels::as_points(geometry::key_coordinates(mesh, keys), a.dim);
  Eigen::VectorXd z(X.rows());
  for (std::size_t k = 0; k < keys.size(); ++k) z[static_cast<Eigen::Index>(k)] = dev[keys.indices[k]];
  spdlog::info("fit: {} key points, {} restarts", keys.size(), a.cfg.restarts);
  const auto fit = estimation::fit_params(X, z, tmpl, a.cfg);
  for (const auto& w : fit.warnings) spdlog::warn("fit: {}", w);

  const fs::path out = out_path(g, a.out, "fit.json");
  ensure_dir(out);
  io::write_json(out, io::to_json(fit));
  spdlog::info("fit: nll {:.6g}, {} iterations, converged {} -> {}", fit.nll, fit.iterations, fit.converged,
               out.string());
}

// --- simulate ----------------------------------------------------------------

struct SimulateArgs {
  std::string manifest, mesh, spec, keypoints, scenario, manipulated, method = "auto";
  double usl = 0.0, p = 0.0, energy = 0.99;
  std::size_t count = 1, dense_limit = simulation::kDefaultDenseLimit;
};

void cmd_simulate(const Globals& g, SimulateArgs a) {
  fs::path out_dir = g.output_dir;
  std::vector<io::Scenario> scenarios;
  if (!a.manifest.empty()) {
    const auto m = io::resolve(io::session_manifest_from_json(io::read_json(a.manifest)),
                               fs::path(a.manifest).parent_path());
    a.mesh = m.mesh.string();
    a.spec = m.spec.string();
    a.keypoints = m.keypoints.string();
    scenarios = m.scenarios;
    if (!m.output_dir.empty() && !g.output_dir_given) out_dir = m.output_dir;
  }
  if (a.mesh.empty() || a.spec.empty()) fail(ErrorCode::domain, "simulate needs --mesh and --spec (or --manifest)");
  const geometry::Mesh mesh = geometry::load_mesh(a.mesh);
  if (!a.manifest.empty()) {
    const auto m = io::session_manifest_from_json(io::read_json(a.manifest));
    if (!m.mesh_checksum.empty() && m.mesh_checksum != mesh.checksum())
      fail(ErrorCode::checksum_mismatch, "manifest expects mesh " + m.mesh_checksum + ", file has " + mesh.checksum());
  }
  const kernels::KernelSpec spec = io::kernel_spec_from_json(io::read_json(a.spec));
  if (a.keypoints.empty()) fail(ErrorCode::domain, "simulate needs --keypoints");
  const geometry::KeyPointSet keys = load_keys(a.keypoints, mesh);
  const auto tol = simulation::make_tolerance(a.usl, a.p);

  if (!a.scenario.empty()) scenarios = {io::scenario_from_json(io::read_json(a.scenario))};
  geometry::ManipulatedKeySet man;
  if (!a.manipulated.empty()) {
    if (!scenarios.empty()) fail(ErrorCode::domain, "give either a scenario or a manipulated key file, not both");
    man = io::manipulated_from_json(io::read_json(a.manipulated));
  } else if (scenarios.size() == 1) {
    man = io::apply_scenario(scenarios.front(), keys, mesh);
  } else if (scenarios.size() > 1) {
    fail(ErrorCode::domain, "manifest lists several scenarios; pass --scenario to pick one");
  } else {
    fail(ErrorCode::domain, "simulate needs --scenario or --manipulated");
  }

  simulation::SimulationOptions opt;
  opt.dense_limit = a.dense_limit;
  opt.energy = a.energy;
  if (a.method == "auto")
    opt.method = static_cast<std::size_t>(mesh.node_count()) <= a.dense_limit ? simulation::Method::cholesky
                                                                              : simulation::Method::reduced;
  else
    opt.method = simulation::parse_method(a.method);
  opt.progress = [](std::size_t done, std::size_t total) {
    spdlog::debug("simulate: {}/{}", done, total);
    return true;
  };

  spdlog::info("simulate: {} instances on {} nodes, {} manipulated keys, method {}", a.count, mesh.node_count(),
               man.size(), simulation::to_string(opt.method));
  const auto ens = simulation::conditional_simulate(spec, mesh, keys, man, tol, a.count, g.seed, opt);
  const Json manifest = io::write_ensemble(ens, mesh, out_dir);

  io::SessionManifest session;
  session.mesh = fs::absolute(a.mesh);
  session.mesh_checksum = mesh.checksum();
  session.keypoints = fs::absolute(a.keypoints);
  session.spec = fs::absolute(a.spec);
  if (!a.scenario.empty() || scenarios.size() == 1) session.scenarios = scenarios;
  session.output_dir = fs::absolute(out_dir);
  io::write_json(out_dir / "session.json", io::to_json(session));
  spdlog::info("simulate: conformance {:.4f} (worst node {:.4f}) -> {}", manifest["conformance"]["overall"].get<double>(),
               manifest["conformance"]["worst_node"].get<double>(), out_dir.string());
}

// --- batch -------------------------------------------------------------------

struct BatchArgs {
  std::vector<std::string> fits, compare;
  std::string out, report;
  int sample = 0;
};

std::vector<estimation::FitResult> load_fits(const std::vector<std::string>& paths) {
  std::vector<estimation::FitResult> out;
  for (const auto& p : paths) out.push_back(io::fit_result_from_json(io::read_json(p)));
  return out;
}

void cmd_batch(const Globals& g, const BatchArgs& a) {
  const auto fits = load_fits(a.fits);
  const auto model = estimation::characterize_batch(fits);
  const fs::path out = out_path(g, a.out, "batch.json");
  ensure_dir(out);
  io::write_json(out, io::to_json(model));
  spdlog::info("batch: {} fits -> {}", model.count, out.string());

  if (!a.compare.empty()) {
    const auto tests = estimation::compare_batches(fits, load_fits(a.compare));
    Json axes = Json::array();
    for (const auto& t : tests) axes.push_back({{"t", t.t}, {"df", t.df}, {"p", t.p}});
    const fs::path rep = out_path(g, a.report, "ttest.json");
    io::write_json(rep, {{"schema", io::kSchema}, {"test", "welch_two_tailed"}, {"axes", axes}});
    for (std::size_t i = 0; i < tests.size(); ++i)
      spdlog::info("batch: axis {} t {:.4g} df {:.4g} p {:.4g}", i, tests[i].t, tests[i].df, tests[i].p);
  }
  if (a.sample > 0) {
    Json specs = Json::array();
    for (int i = 0; i < a.sample; ++i)
      specs.push_back(io::to_json(estimation::sample_batch_params(model, fits.front().spec, g.seed + static_cast<std::uint64_t>(i))));
    io::write_json(g.output_dir / "samples.json", {{"schema", io::kSchema}, {"specs", specs}});
  }
}

// --- export ------------------------------------------------------------------

struct ExportArgs {
  std::string mesh, deviation, ensemble, format = "vtk", out;
};

void cmd_export(const Globals& g, const ExportArgs& a) {
  if (a.format != "vtk" && a.format != "ply") fail(ErrorCode::domain, "--format must be vtk or ply");
  const geometry::Mesh mesh = geometry::load_mesh(a.mesh);
  auto convert = [&](const fs::path& src, const fs::path& dst) {
    const Eigen::VectorXd v = load_deviation(src, mesh);
    ensure_dir(dst);
    if (a.format == "vtk")
      geometry::write_vtk(dst, mesh, v);
    else
      geometry::write_ply(dst, mesh, v);
  };
  const std::string ext = "." + a.format;
  if (!a.ensemble.empty()) {
    const Json m = io::read_json(fs::path(a.ensemble) / "manifest.json");
    if (m.value("mesh_id", "") != mesh.checksum())
      fail(ErrorCode::checksum_mismatch, "ensemble was generated on a different mesh");
    const fs::path dir = a.out.empty() ? g.output_dir : fs::path(a.out);
    for (const auto& inst : m.at("instances")) {
      const fs::path f = inst.at("file").get<std::string>();
      convert(fs::path(a.ensemble) / f, dir / fs::path(f).replace_extension(ext));
    }
    spdlog::info("export: {} instances -> {}", m.at("instances").size(), dir.string());
  } else {
    if (a.deviation.empty()) fail(ErrorCode::domain, "export needs --deviation or --ensemble");
    const fs::path dst = out_path(g, a.out, fs::path(a.deviation).stem().string() + ext);
    convert(a.deviation, dst);
    spdlog::info("export: -> {}", dst.string());
  }
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return 2;
    case ErrorCategory::io: return 3;
    case ErrorCategory::numerical: return 4;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shapemorph: deviation fields, covariance fitting and conditional part ensembles"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::string out_dir = ".";
  app.add_option("--threads", g.threads, "worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "random seed (default 0)");
  app.add_option("--output-dir", out_dir, "directory for default output names");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");

  DeviationArgs dev;
  auto* c_dev = app.add_subcommand("deviation", "surface-normal deviation of every mesh node");
  c_dev->add_option("--mesh", dev.mesh, "nominal mesh (OBJ/PLY)")->required();
  auto* o_cop = c_dev->add_option("--cop", dev.cop, "measured cloud of points");
  auto* o_disp = c_dev->add_option("--displacement", dev.displacement, "per-node displacement rows");
  o_cop->excludes(o_disp);
  c_dev->add_option("--max-dist", dev.max_dist, "CoP search radius, mm");
  c_dev->add_option("--out", dev.out, "output PLY (default <mesh>_dev.ply)");
  c_dev->add_option("--vtk", dev.vtk, "also write legacy VTK");

  KeypointArgs kp;
  auto* c_kp = app.add_subcommand("keypoints", "voxel key point selection");
  c_kp->add_option("--mesh", kp.mesh)->required();
  c_kp->add_option("--voxel-size", kp.voxel, "voxel edge, mm")->required();
  c_kp->add_option("--out", kp.out);

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "maximum-likelihood covariance fit at key points");
  c_fit->add_option("--mesh", fit.mesh)->required();
  c_fit->add_option("--deviation", fit.deviation, "PLY with per-vertex deviation")->required();
  c_fit->add_option("--keypoints", fit.keypoints);
  c_fit->add_option("--voxel-size", fit.voxel);
  c_fit->add_option("--family", fit.families, "one per term: matern52, matern32, squared_exponential, periodic")
      ->expected(1, -1);
  c_fit->add_option("--dim", fit.dim, "input dimension (first D coordinates)");
  c_fit->add_option("--restarts", fit.cfg.restarts);
  c_fit->add_option("--max-iters", fit.cfg.max_iters);
  c_fit->add_option("--grad-tol", fit.cfg.grad_tol);
  c_fit->add_option("--jitter", fit.cfg.jitter, "relative to total variance");
  c_fit->add_option("--out", fit.out);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "conditional simulation of non-ideal parts");
  c_sim->add_option("--manifest", sim.manifest, "session manifest JSON");
  c_sim->add_option("--mesh", sim.mesh);
  c_sim->add_option("--spec", sim.spec, "kernel spec or fit result JSON");
  c_sim->add_option("--keypoints", sim.keypoints);
  c_sim->add_option("--scenario", sim.scenario, "bend / patch / form_only JSON");
  c_sim->add_option("--manipulated", sim.manipulated, "explicit key deviations JSON");
  c_sim->add_option("--usl", sim.usl, "|USL| = |LSL|, mm")->required();
  c_sim->add_option("--p", sim.p, "probability inside the tolerance band")->required();
  c_sim->add_option("--count", sim.count, "instances");
  c_sim->add_option("--method", sim.method, "auto, cholesky, eigen or reduced");
  c_sim->add_option("--energy", sim.energy, "reduced basis energy fraction");
  c_sim->add_option("--dense-limit", sim.dense_limit);

  BatchArgs batch;
  auto* c_batch = app.add_subcommand("batch", "Gaussian model of fitted correlation lengths");
  c_batch->add_option("--fits", batch.fits, "fit result JSON files")->required()->expected(1, -1);
  c_batch->add_option("--compare", batch.compare, "second batch for the Welch t-test")->expected(1, -1);
  c_batch->add_option("--sample", batch.sample, "draw this many specs from the model");
  c_batch->add_option("--out", batch.out);
  c_batch->add_option("--report", batch.report);

  ExportArgs ex;
  auto* c_ex = app.add_subcommand("export", "convert deviation PLYs (or an ensemble) to VTK/PLY");
  c_ex->add_option("--mesh", ex.mesh)->required();
  c_ex->add_option("--deviation", ex.deviation);
  c_ex->add_option("--ensemble", ex.ensemble, "ensemble directory");
  c_ex->add_option("--format", ex.format);
  c_ex->add_option("--out", ex.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  spdlog::set_pattern("[%l] %v");
  g.output_dir = out_dir;
  g.output_dir_given = app.count("--output-dir") > 0;
  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (c_dev->parsed()) {
      if (dev.cop.empty() == dev.displacement.empty()) fail(ErrorCode::domain, "give exactly one of --cop, --displacement");
      cmd_deviation(g, dev);
    } else if (c_kp->parsed()) {
      cmd_keypoints(g, kp);
    } else if (c_fit->parsed()) {
      cmd_fit(g, fit);
    } else if (c_sim->parsed()) {
      cmd_simulate(g, sim);
    } else if (c_batch->parsed()) {
      cmd_batch(g, batch);
    } else if (c_ex->parsed()) {
      cmd_export(g, ex);
    }
  } catch (const Error& e) {
    spdlog::error("{} ({})", e.what(), to_string(e.code()));
    return exit_code(e.category());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 4;
  }
  return 0;
}

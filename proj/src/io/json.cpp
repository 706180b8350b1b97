#include "shapemorph/io/json.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "shapemorph/error.hpp"
#include "shapemorph/geometry/mesh_io.hpp"

namespace shapemorph::io {
namespace {

const Json& field(const Json& j, const char* key, const char* what) {
  if (!j.is_object()) fail(ErrorCode::format, std::string(what) + " must be a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::format, std::string(what) + ": missing \"" + key + "\"");
  return *it;
}

double number(const Json& j, const char* key, const char* what) {
  const Json& v = field(j, key, what);
  if (!v.is_number()) fail(ErrorCode::format, std::string(what) + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

// null stands in for NaN, which JSON cannot carry
double number_or_nan(const Json& v) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) fail(ErrorCode::format, "expected a number or null");
  return v.get<double>();
}

Json nan_as_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

Eigen::VectorXd vector(const Json& v, const char* what) {
  if (!v.is_array()) fail(ErrorCode::format, std::string(what) + " must be an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(ErrorCode::format, std::string(what) + " must be an array of numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

Eigen::Vector3d vec3(const Json& v, const char* what) {
  const Eigen::VectorXd x = vector(v, what);
  if (x.size() != 3) fail(ErrorCode::format, std::string(what) + " must have 3 entries");
  return x;
}

Json array(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

void check_schema(const Json& j, const char* what) {
  if (!j.is_object()) fail(ErrorCode::format, std::string(what) + " must be a JSON object");
  const auto it = j.find("schema");
  if (it == j.end()) return;
  if (!it->is_number_integer() || it->get<long long>() != kSchema)
    fail(ErrorCode::format, std::string(what) + ": unsupported schema version " + it->dump());
}

template <class Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    fail(ErrorCode::format, std::string("malformed JSON value: ") + e.what());
  }
}

}  // namespace

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::format, std::string("invalid JSON: ") + e.what());
  }
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = geometry::read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::format, path.string() + ": invalid JSON: " + e.what());
  }
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

void write_json(const std::filesystem::path& path, const Json& doc) { geometry::write_file(path, dump(doc)); }

Json to_json(const kernels::KernelSpec& spec) {
  Json terms = Json::array();
  for (const auto& t : spec.terms) {
    Json jt = {{"family", kernels::to_string(t.family)}, {"sigma_f2", t.sigma_f2}, {"lengths", array(t.lengths)}};
    if (t.family == kernels::Family::periodic) jt["periods"] = array(t.periods);
    terms.push_back(std::move(jt));
  }
  return {{"schema", kSchema}, {"D", spec.dim}, {"terms", std::move(terms)}};
}

kernels::KernelSpec kernel_spec_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j, "kernel spec");
    kernels::KernelSpec spec;
    const Json& d = field(j, "D", "kernel spec");
    if (!d.is_number_integer()) fail(ErrorCode::format, "kernel spec: \"D\" must be an integer");
    spec.dim = d.get<int>();
    const Json& terms = field(j, "terms", "kernel spec");
    if (!terms.is_array()) fail(ErrorCode::format, "kernel spec: \"terms\" must be an array");
    for (const Json& jt : terms) {
      kernels::KernelTerm t;
      const Json& fam = field(jt, "family", "kernel term");
      if (!fam.is_string()) fail(ErrorCode::format, "kernel term: \"family\" must be a string");
      t.family = kernels::parse_family(fam.get<std::string>());
      t.sigma_f2 = number(jt, "sigma_f2", "kernel term");
      t.lengths = vector(field(jt, "lengths", "kernel term"), "lengths");
      if (jt.contains("periods")) t.periods = vector(jt["periods"], "periods");
      spec.terms.push_back(std::move(t));
    }
    kernels::validate(spec);
    return spec;
  });
}

Json to_json(const estimation::FitResult& fit) {
  Json j = to_json(fit.spec);
  j["nll"] = fit.nll;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  Json r = Json::array(), s = Json::array();
  for (double v : fit.restart_nlls) r.push_back(nan_as_null(v));
  for (double v : fit.initial_nlls) s.push_back(nan_as_null(v));
  j["restart_nlls"] = std::move(r);
  j["initial_nlls"] = std::move(s);
  j["warnings"] = fit.warnings;
  return j;
}

estimation::FitResult fit_result_from_json(const Json& j) {
  return guarded([&] {
    estimation::FitResult fit;
    fit.spec = kernel_spec_from_json(j);
    fit.nll = number(j, "nll", "fit result");
    fit.converged = j.value("converged", false);
    fit.iterations = j.value("iterations", 0);
    if (j.contains("restart_nlls"))
      for (const Json& v : j["restart_nlls"]) fit.restart_nlls.push_back(number_or_nan(v));
    if (j.contains("initial_nlls"))
      for (const Json& v : j["initial_nlls"]) fit.initial_nlls.push_back(number_or_nan(v));
    if (j.contains("warnings")) fit.warnings = j["warnings"].get<std::vector<std::string>>();
    return fit;
  });
}

Json to_json(const estimation::BatchModel& model) {
  Json cov = Json::array();
  for (Eigen::Index r = 0; r < model.cov.rows(); ++r) cov.push_back(array(model.cov.row(r).transpose()));
  return {{"schema", kSchema}, {"mean", array(model.mean)}, {"cov", std::move(cov)}, {"count", model.count}};
}

estimation::BatchModel batch_model_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j, "batch model");
    estimation::BatchModel m;
    m.mean = vector(field(j, "mean", "batch model"), "mean");
    const Json& cov = field(j, "cov", "batch model");
    if (!cov.is_array() || cov.size() != static_cast<std::size_t>(m.mean.size()))
      fail(ErrorCode::format, "batch model: \"cov\" must be a square matrix matching \"mean\"");
    m.cov.resize(m.mean.size(), m.mean.size());
    for (std::size_t r = 0; r < cov.size(); ++r) {
      const Eigen::VectorXd row = vector(cov[r], "cov row");
      if (row.size() != m.mean.size()) fail(ErrorCode::format, "batch model: \"cov\" rows must match \"mean\"");
      m.cov.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    m.count = field(j, "count", "batch model").get<int>();
    estimation::validate(m);
    return m;
  });
}

Json to_json(const geometry::KeyPointSet& keys) {
  Json idx = Json::array();
  for (Eigen::Index i : keys.indices) idx.push_back(i);
  return {{"schema", kSchema}, {"mesh_checksum", keys.mesh_id}, {"voxel_size", keys.voxel_size}, {"indices", std::move(idx)}};
}

geometry::KeyPointSet key_points_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j, "key point set");
    geometry::KeyPointSet keys;
    keys.mesh_id = field(j, "mesh_checksum", "key point set").get<std::string>();
    keys.voxel_size = j.value("voxel_size", 0.0);
    const Json& idx = field(j, "indices", "key point set");
    if (!idx.is_array()) fail(ErrorCode::format, "key point set: \"indices\" must be an array");
    for (const Json& v : idx) {
      if (!v.is_number_integer()) fail(ErrorCode::format, "key point set: indices must be integers");
      keys.indices.push_back(v.get<Eigen::Index>());
    }
    return keys;
  });
}

Json to_json(const simulation::ToleranceSpec& t) {
  return {{"schema", kSchema}, {"usl", t.usl}, {"lsl", t.lsl}, {"p", t.p}, {"s_z", t.s_z}, {"sigma_t", t.sigma_t}};
}

simulation::ToleranceSpec tolerance_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j, "tolerance");
    const double usl = number(j, "usl", "tolerance");
    const double lsl = j.contains("lsl") ? number(j, "lsl", "tolerance") : usl;
    return simulation::make_tolerance(usl, number(j, "p", "tolerance"), lsl);
  });
}

Json to_json(const geometry::ManipulatedKeySet& set) {
  Json arr = Json::array();
  for (std::size_t k = 0; k < set.size(); ++k)
    arr.push_back({{"key_index", set.selected[k]}, {"deviation", set.deviations[static_cast<Eigen::Index>(k)]}});
  return {{"schema", kSchema}, {"manipulated", std::move(arr)}};
}

geometry::ManipulatedKeySet manipulated_from_array(const Json& arr) {
  return guarded([&] {
    if (!arr.is_array()) fail(ErrorCode::format, "manipulated keys must be an array");
    geometry::ManipulatedKeySet set;
    set.deviations.resize(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const Json& idx = field(arr[k], "key_index", "manipulated key");
      if (!idx.is_number_integer() || idx.get<long long>() < 0)
        fail(ErrorCode::format, "manipulated key: \"key_index\" must be a non-negative integer");
      set.selected.push_back(idx.get<std::size_t>());
      set.deviations[static_cast<Eigen::Index>(k)] = number(arr[k], "deviation", "manipulated key");
    }
    return set;
  });
}

geometry::ManipulatedKeySet manipulated_from_json(const Json& j) {
  check_schema(j, "manipulated key set");
  return manipulated_from_array(field(j, "manipulated", "manipulated key set"));
}

Json to_json(const Scenario& s) {
  switch (s.type) {
    case Scenario::Type::bend:
      return {{"schema", kSchema},
              {"type", "bend"},
              {"axis", {{"point", array(s.axis.point)}, {"direction", array(s.axis.direction)}}},
              {"max_dev", s.max_dev}};
    case Scenario::Type::patch:
      return {{"schema", kSchema},
              {"type", "patch"},
              {"box", {{"min", array(s.box.min)}, {"max", array(s.box.max)}}},
              {"dev", s.dev},
              {"pin_others", s.pin_others}};
    case Scenario::Type::form_only:
      break;
  }
  return {{"schema", kSchema}, {"type", "form_only"}};
}

Scenario scenario_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j, "scenario");
    const Json& type = field(j, "type", "scenario");
    if (!type.is_string()) fail(ErrorCode::format, "scenario: \"type\" must be a string");
    Scenario s;
    const std::string t = type.get<std::string>();
    if (t == "bend") {
      s.type = Scenario::Type::bend;
      const Json& axis = field(j, "axis", "bend scenario");
      s.axis.point = vec3(field(axis, "point", "bend axis"), "axis point");
      s.axis.direction = vec3(field(axis, "direction", "bend axis"), "axis direction");
      s.max_dev = number(j, "max_dev", "bend scenario");
    } else if (t == "patch") {
      s.type = Scenario::Type::patch;
      const Json& box = field(j, "box", "patch scenario");
      s.box.min = vec3(field(box, "min", "patch box"), "box min");
      s.box.max = vec3(field(box, "max", "patch box"), "box max");
      s.dev = number(j, "dev", "patch scenario");
      const auto pin = j.find("pin_others");
      if (pin != j.end()) {
        if (!pin->is_boolean()) fail(ErrorCode::format, "patch scenario: \"pin_others\" must be a boolean");
        s.pin_others = pin->get<bool>();
      }
    } else if (t == "form_only") {
      s.type = Scenario::Type::form_only;
    } else {
      fail(ErrorCode::format, "unknown scenario type '" + t + "'");
    }
    return s;
  });
}

geometry::ManipulatedKeySet apply_scenario(const Scenario& s, const geometry::KeyPointSet& keys,
                                           const geometry::Mesh& mesh) {
  switch (s.type) {
    case Scenario::Type::bend: return simulation::scenario_bend(keys, mesh, s.axis, s.max_dev);
    case Scenario::Type::patch: return simulation::scenario_patch(keys, mesh, s.box, s.dev, s.pin_others);
    case Scenario::Type::form_only: break;
  }
  geometry::validate(keys, mesh);
  return simulation::scenario_form_only(keys);
}

Json to_json(const SessionManifest& m) {
  Json sc = Json::array();
  for (const auto& s : m.scenarios) sc.push_back(to_json(s));
  return {{"schema", kSchema},
          {"mesh", {{"path", m.mesh.generic_string()}, {"checksum", m.mesh_checksum}}},
          {"keypoints", m.keypoints.generic_string()},
          {"spec", m.spec.generic_string()},
          {"scenarios", std::move(sc)},
          {"output_dir", m.output_dir.generic_string()}};
}

SessionManifest session_manifest_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j, "session manifest");
    SessionManifest m;
    const Json& mesh = field(j, "mesh", "session manifest");
    m.mesh = field(mesh, "path", "manifest mesh").get<std::string>();
    m.mesh_checksum = mesh.value("checksum", "");
    m.keypoints = j.value("keypoints", "");
    m.spec = j.value("spec", "");
    if (j.contains("scenarios"))
      for (const Json& s : j["scenarios"]) m.scenarios.push_back(scenario_from_json(s));
    m.output_dir = j.value("output_dir", "");
    return m;
  });
}

SessionManifest resolve(const SessionManifest& m, const std::filesystem::path& base) {
  SessionManifest out = m;
  auto fix = [&](std::filesystem::path& p, bool must_exist, const char* what) {
    if (p.empty()) {
      if (must_exist) fail(ErrorCode::domain, std::string("session manifest has no ") + what);
      return;
    }
    if (p.is_relative()) p = base / p;
    if (must_exist && !std::filesystem::exists(p))
      fail(ErrorCode::io, std::string("session manifest ") + what + " not found: " + p.string());
  };
  fix(out.mesh, true, "mesh");
  fix(out.keypoints, false, "key point file");
  if (!out.keypoints.empty() && !std::filesystem::exists(out.keypoints))
    fail(ErrorCode::io, "session manifest key point file not found: " + out.keypoints.string());
  fix(out.spec, true, "spec file");
  fix(out.output_dir, false, "output directory");
  return out;
}

Conformance conformance(const simulation::Ensemble& e) {
  Conformance c;
  if (e.instances.empty()) return c;
  const Eigen::Index n = e.instances.front().values.size();
  const double usl = e.tolerance.usl;
  Eigen::VectorXd ok = Eigen::VectorXd::Zero(n);
  for (const auto& inst : e.instances) ok += (inst.values.array().abs() <= usl).cast<double>().matrix();
  const double m = static_cast<double>(e.instances.size());
  c.overall = n ? ok.sum() / (m * static_cast<double>(n)) : 1.0;
  c.worst_node = n ? ok.minCoeff() / m : 1.0;
  return c;
}

namespace {

std::string instance_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "instance_%03zu.ply", i);
  return buf;
}

}  // namespace

Json ensemble_manifest(const simulation::Ensemble& e) {
  Json inst = Json::array();
  for (std::size_t i = 0; i < e.instances.size(); ++i) {
    const auto st = geometry::field_stats(e.instances[i].values);
    inst.push_back({{"file", instance_name(i)}, {"stream", e.provenance.streams.at(i)},
                    {"min", st.min}, {"max", st.max}, {"rms", st.rms}});
  }
  const auto ms = geometry::field_stats(e.mean_field.values);
  const Conformance c = conformance(e);
  Json j = {{"schema", kSchema},
            {"mesh_id", e.mesh_id},
            {"spec", to_json(e.provenance.spec)},
            {"tolerance", to_json(e.tolerance)},
            {"manipulated", to_json(e.manipulated)},
            {"seed", e.provenance.seed},
            {"method", simulation::to_string(e.provenance.method)},
            {"count", e.instances.size()},
            {"mean", {{"file", "mean.ply"}, {"min", ms.min}, {"max", ms.max}, {"rms", ms.rms}}},
            {"conformance", {{"overall", c.overall}, {"worst_node", c.worst_node}}},
            {"instances", std::move(inst)}};
  if (e.provenance.method == simulation::Method::reduced)
    j["basis"] = {{"rank", e.provenance.basis_rank}, {"energy", e.provenance.basis_energy}};
  return j;
}

Json write_ensemble(const simulation::Ensemble& e, const geometry::Mesh& mesh, const std::filesystem::path& dir) {
  if (e.mesh_id != mesh.checksum())
    fail(ErrorCode::checksum_mismatch, "ensemble belongs to mesh " + e.mesh_id + ", not " + mesh.checksum());
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < e.instances.size(); ++i) geometry::write_ply(dir / instance_name(i), mesh, e.instances[i].values);
  geometry::write_ply(dir / "mean.ply", mesh, e.mean_field.values);
  Json m = ensemble_manifest(e);
  write_json(dir / "manifest.json", m);
  return m;
}

}  // namespace shapemorph::io

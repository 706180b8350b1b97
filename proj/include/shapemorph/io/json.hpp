#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "shapemorph/estimation/batch.hpp"
#include "shapemorph/estimation/fit.hpp"
#include "shapemorph/geometry/deviation.hpp"
#include "shapemorph/geometry/keypoints.hpp"
#include "shapemorph/kernels/kernel_spec.hpp"
#include "shapemorph/simulation/conditional.hpp"
#include "shapemorph/simulation/scenarios.hpp"
#include "shapemorph/simulation/tolerance.hpp"

// JSON forms shared by the CLI, the service and the UI. Every document
// carries "schema": 1; readers accept a missing schema field and reject any
// other version. Structural problems raise Error(format), out-of-range
// values Error(domain).
namespace shapemorph::io {

using Json = nlohmann::json;

inline constexpr int kSchema = 1;

Json parse_json(std::string_view text);
Json read_json(const std::filesystem::path& path);
/// Two-space indent plus trailing newline; byte-stable for equal inputs.
void write_json(const std::filesystem::path& path, const Json& doc);
std::string dump(const Json& doc);

/// {"schema":1,"D":3,"terms":[{"family":"matern52","sigma_f2":..,"lengths":[..]}, ..]}
Json to_json(const kernels::KernelSpec& spec);
kernels::KernelSpec kernel_spec_from_json(const Json& j);

/// Kernel document plus "nll", "converged", "iterations", "restart_nlls",
/// "initial_nlls" (null for a diverged restart) and "warnings".
Json to_json(const estimation::FitResult& fit);
estimation::FitResult fit_result_from_json(const Json& j);

/// {"schema":1,"mean":[..],"cov":[[..],..],"count":n}
Json to_json(const estimation::BatchModel& model);
estimation::BatchModel batch_model_from_json(const Json& j);

/// {"schema":1,"mesh_checksum":..,"voxel_size":..,"indices":[..]}
Json to_json(const geometry::KeyPointSet& keys);
geometry::KeyPointSet key_points_from_json(const Json& j);

/// {"schema":1,"usl":..,"lsl":..,"p":..,"s_z":..,"sigma_t":..}; s_z and
/// sigma_t are recomputed on read.
Json to_json(const simulation::ToleranceSpec& tol);
simulation::ToleranceSpec tolerance_from_json(const Json& j);

/// {"schema":1,"manipulated":[{"key_index":k,"deviation":mm},..]} where
/// key_index is the position in the key point list (not a node index).
Json to_json(const geometry::ManipulatedKeySet& set);
geometry::ManipulatedKeySet manipulated_from_json(const Json& j);
/// Same, from the bare [{"key_index":..,"deviation":..}] array.
geometry::ManipulatedKeySet manipulated_from_array(const Json& arr);

struct Scenario {
  enum class Type { bend, patch, form_only } type = Type::form_only;
  simulation::Axis axis;  // bend
  double max_dev = 0.0;   // bend, mm
  simulation::Box box;    // patch
  double dev = 0.0;       // patch, mm
  bool pin_others = false;
};

/// {"type":"bend","axis":{"point":[x,y,z],"direction":[x,y,z]},"max_dev":3}
/// {"type":"patch","box":{"min":[..],"max":[..]},"dev":3,"pin_others":false}
/// {"type":"form_only"}
Json to_json(const Scenario& scenario);
Scenario scenario_from_json(const Json& j);
geometry::ManipulatedKeySet apply_scenario(const Scenario& scenario, const geometry::KeyPointSet& keys,
                                           const geometry::Mesh& mesh);

/// Inputs of a CLI simulation run. Paths are stored as given; relative
/// paths resolve against the manifest's directory.
struct SessionManifest {
  std::filesystem::path mesh;
  std::string mesh_checksum;
  std::filesystem::path keypoints;
  std::filesystem::path spec;
  std::vector<Scenario> scenarios;
  std::filesystem::path output_dir;
};

Json to_json(const SessionManifest& m);
SessionManifest session_manifest_from_json(const Json& j);
/// Resolves relative paths against base and checks the referenced files
/// exist (Error(io)).
SessionManifest resolve(const SessionManifest& m, const std::filesystem::path& base);

/// Per-instance summary used in manifests and service responses.
struct InstanceSummary {
  double min = 0.0;
  double max = 0.0;
  double rms = 0.0;
};

/// Fraction of (node, instance) pairs with |Z| <= usl, and the smallest
/// per-node fraction.
struct Conformance {
  double overall = 0.0;
  double worst_node = 0.0;
};
Conformance conformance(const simulation::Ensemble& ensemble);

/// Writes instance_NNN.ply (per-vertex deviation) for every instance, plus
/// mean.ply and manifest.json. Returns the manifest. Output is byte-identical
/// for identical ensembles.
Json write_ensemble(const simulation::Ensemble& ensemble, const geometry::Mesh& mesh,
                    const std::filesystem::path& dir);

/// Manifest body without writing files (file names included).
Json ensemble_manifest(const simulation::Ensemble& ensemble);

}  // namespace shapemorph::io

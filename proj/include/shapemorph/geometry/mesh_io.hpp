#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "shapemorph/geometry/mesh.hpp"

namespace shapemorph::geometry {

enum class MeshFormat { obj, ply };

/// Guesses the format from the file extension (.obj / .ply, case-insensitive).
MeshFormat format_from_path(const std::filesystem::path& path);

/// Raw parse result before mesh validation. Extra per-vertex scalar
/// properties found in a PLY (e.g. `deviation`) are kept by name.
struct MeshData {
  Eigen::MatrixX3d nodes;
  Elements elements;
  std::map<std::string, Eigen::VectorXd> vertex_scalars;
};

/// Parses OBJ (v/f, tri or quad faces, polygons fanned from vertex 0) or PLY
/// (ascii or binary_little_endian). Faces are optional so point clouds parse
/// too. Errors carry the offending line number (ascii) or byte offset.
MeshData parse_mesh_data(std::string_view bytes, MeshFormat format);
MeshData read_mesh_data(const std::filesystem::path& path, MeshFormat format);
MeshData read_mesh_data(const std::filesystem::path& path);

Mesh parse_mesh(std::string_view bytes, MeshFormat format);
Mesh load_mesh(const std::filesystem::path& path, MeshFormat format);
Mesh load_mesh(const std::filesystem::path& path);

/// CoP from PLY/OBJ vertices or a whitespace/comma separated x y z text file.
PointCloud load_point_cloud(const std::filesystem::path& path);

/// N x 3 displacement rows from a whitespace/comma separated text file.
Eigen::MatrixX3d load_displacement(const std::filesystem::path& path);

/// PLY ascii with double coordinates and a float32 per-vertex `deviation`.
void write_ply(std::ostream& out, const Mesh& mesh, const Eigen::VectorXd& deviation);
void write_ply(const std::filesystem::path& path, const Mesh& mesh,
               const Eigen::VectorXd& deviation);

/// Legacy VTK POLYDATA with POINT_DATA SCALARS deviation.
void write_vtk(std::ostream& out, const Mesh& mesh, const Eigen::VectorXd& deviation);
void write_vtk(const std::filesystem::path& path, const Mesh& mesh,
               const Eigen::VectorXd& deviation);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace shapemorph::geometry

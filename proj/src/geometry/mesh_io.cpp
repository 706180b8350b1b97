#include "shapemorph/geometry/mesh_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "shapemorph/error.hpp"

namespace shapemorph::geometry {
namespace {

[[noreturn]] void format_error_at(std::size_t line, const std::string& what) {
  fail(ErrorCode::format, "line " + std::to_string(line) + ": " + what);
}

// Splits the input into lines, tracking 1-based line numbers.
class LineReader {
 public:
  explicit LineReader(std::string_view text, std::size_t pos = 0, std::size_t line = 0)
      : text_(text), pos_(pos), line_(line) {}

  bool next(std::string_view& out) {
    if (pos_ >= text_.size()) return false;
    const std::size_t end = text_.find('\n', pos_);
    const std::size_t stop = end == std::string_view::npos ? text_.size() : end;
    out = text_.substr(pos_, stop - pos_);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    ++line_;
    return true;
  }

  std::size_t line() const { return line_; }
  std::size_t pos() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_;
  std::size_t line_;
};

std::vector<std::string_view> split(std::string_view s, bool commas = false) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [commas](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || (commas && c == ',');
  };
  while (i < s.size()) {
    while (i < s.size() && is_sep(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_sep(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

bool parse_long(std::string_view tok, long long& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

double number_at(std::string_view tok, std::size_t line) {
  double v = 0.0;
  if (!parse_double(tok, v)) format_error_at(line, "expected a number, got '" + std::string(tok) + "'");
  return v;
}

void append_fan(std::vector<std::array<int, 3>>& tris, const std::vector<int>& poly) {
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) tris.push_back({poly[0], poly[k], poly[k + 1]});
}

MeshData to_mesh_data(const std::vector<Eigen::Vector3d>& verts,
                      const std::vector<std::array<int, 3>>& tris) {
  MeshData data;
  data.nodes.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) data.nodes.row(static_cast<Eigen::Index>(i)) = verts[i];
  data.elements.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t)
    for (int c = 0; c < 3; ++c) data.elements(static_cast<Eigen::Index>(t), c) = tris[t][c];
  return data;
}

// ---------------------------------------------------------------- OBJ

MeshData parse_obj(std::string_view text) {
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> tris;
  struct PendingFace {
    std::vector<long long> refs;
    std::size_t line;
  };
  std::vector<PendingFace> faces;

  LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) format_error_at(reader.line(), "vertex needs 3 coordinates");
      verts.emplace_back(number_at(tok[1], reader.line()), number_at(tok[2], reader.line()),
                         number_at(tok[3], reader.line()));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) format_error_at(reader.line(), "face needs at least 3 vertices");
      PendingFace face{{}, reader.line()};
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view ref = tok[k].substr(0, tok[k].find('/'));
        long long idx = 0;
        if (!parse_long(ref, idx) || idx == 0)
          format_error_at(reader.line(), "bad face index '" + std::string(tok[k]) + "'");
        // Negative indices are relative to the vertices defined so far.
        face.refs.push_back(idx < 0 ? static_cast<long long>(verts.size()) + idx : idx - 1);
      }
      faces.push_back(std::move(face));
    }
  }

  const auto n = static_cast<long long>(verts.size());
  for (const auto& face : faces) {
    std::vector<int> poly;
    for (long long r : face.refs) {
      if (r < 0 || r >= n)
        format_error_at(face.line, "face index " + std::to_string(r + 1) + " out of range (" +
                                       std::to_string(n) + " vertices)");
      poly.push_back(static_cast<int>(r));
    }
    append_fan(tris, poly);
  }
  return to_mesh_data(verts, tris);
}

// ---------------------------------------------------------------- PLY

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType ply_type(std::string_view name, std::size_t line) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  format_error_at(line, "unknown PLY property type '" + std::string(name) + "'");
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

// Little-endian binary cursor with bounds checking.
class BinaryCursor {
 public:
  BinaryCursor(std::string_view data, std::size_t pos) : data_(data), pos_(pos) {}

  double read(PlyType t) {
    const std::size_t sz = type_size(t);
    if (pos_ + sz > data_.size())
      fail(ErrorCode::format, "truncated binary PLY at byte offset " + std::to_string(pos_));
    const char* p = data_.data() + pos_;
    pos_ += sz;
    switch (t) {
      case PlyType::i8: return static_cast<double>(load<std::int8_t>(p));
      case PlyType::u8: return static_cast<double>(load<std::uint8_t>(p));
      case PlyType::i16: return static_cast<double>(load<std::int16_t>(p));
      case PlyType::u16: return static_cast<double>(load<std::uint16_t>(p));
      case PlyType::i32: return static_cast<double>(load<std::int32_t>(p));
      case PlyType::u32: return static_cast<double>(load<std::uint32_t>(p));
      case PlyType::f32: return static_cast<double>(load<float>(p));
      case PlyType::f64: return load<double>(p);
    }
    return 0.0;
  }

  std::size_t pos() const { return pos_; }

 private:
  template <class T>
  static T load(const char* p) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
    T v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }

  std::string_view data_;
  std::size_t pos_;
};

MeshData parse_ply(std::string_view bytes) {
  LineReader reader(bytes);
  std::string_view line;
  if (!reader.next(line) || line != "ply") format_error_at(1, "missing 'ply' magic");

  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (reader.next(line)) {
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) format_error_at(reader.line(), "incomplete format line");
      if (tok[1] == "ascii") binary = false;
      else if (tok[1] == "binary_little_endian") binary = true;
      else format_error_at(reader.line(), "unsupported PLY format '" + std::string(tok[1]) + "'");
      have_format = true;
    } else if (tok[0] == "comment" || tok[0] == "obj_info") {
      continue;
    } else if (tok[0] == "element") {
      long long count = 0;
      if (tok.size() != 3 || !parse_long(tok[2], count) || count < 0)
        format_error_at(reader.line(), "malformed element line");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(count), {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) format_error_at(reader.line(), "property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        prop.is_list = true;
        prop.count_type = ply_type(tok[2], reader.line());
        prop.type = ply_type(tok[3], reader.line());
        prop.name = tok[4];
      } else if (tok.size() == 3) {
        prop.type = ply_type(tok[1], reader.line());
        prop.name = tok[2];
      } else {
        format_error_at(reader.line(), "malformed property line");
      }
      elements.back().props.push_back(prop);
    } else if (tok[0] == "end_header") {
      header_done = true;
      break;
    } else {
      format_error_at(reader.line(), "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!header_done) format_error_at(reader.line(), "missing end_header");
  if (!have_format) format_error_at(reader.line(), "missing format line");

  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> tris;
  std::map<std::string, std::vector<double>> scalars;
  bool have_vertex = false;

  LineReader body(bytes, reader.pos(), reader.line());
  BinaryCursor cursor(bytes, reader.pos());

  for (const auto& el : elements) {
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    int xi = -1, yi = -1, zi = -1, face_list = -1;
    for (std::size_t p = 0; p < el.props.size(); ++p) {
      const auto& prop = el.props[p];
      if (is_vertex && !prop.is_list) {
        if (prop.name == "x") xi = static_cast<int>(p);
        else if (prop.name == "y") yi = static_cast<int>(p);
        else if (prop.name == "z") zi = static_cast<int>(p);
        else scalars[prop.name].reserve(el.count);
      }
      if (is_face && prop.is_list && face_list < 0 &&
          (prop.name == "vertex_indices" || prop.name == "vertex_index"))
        face_list = static_cast<int>(p);
    }
    if (is_vertex) {
      if (xi < 0 || yi < 0 || zi < 0) format_error_at(reader.line(), "vertex element lacks x/y/z");
      have_vertex = true;
      verts.reserve(el.count);
    }
    if (is_face && face_list < 0)
      format_error_at(reader.line(), "face element lacks a vertex_indices list");

    std::vector<double> values(el.props.size());
    std::vector<int> poly;
    for (std::size_t k = 0; k < el.count; ++k) {
      std::size_t where = 0;
      poly.clear();
      if (binary) {
        where = cursor.pos();
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          const auto& prop = el.props[p];
          if (!prop.is_list) {
            values[p] = cursor.read(prop.type);
            continue;
          }
          const double cnt = cursor.read(prop.count_type);
          if (cnt < 0) fail(ErrorCode::format, "negative list length at byte offset " + std::to_string(where));
          for (long long m = 0; m < static_cast<long long>(cnt); ++m) {
            const double v = cursor.read(prop.type);
            if (static_cast<int>(p) == face_list) poly.push_back(static_cast<int>(v));
          }
        }
      } else {
        std::string_view data_line;
        do {
          if (!body.next(data_line))
            format_error_at(body.line() + 1, "unexpected end of file in element '" + el.name + "'");
        } while (split(data_line).empty());
        where = body.line();
        const auto tok = split(data_line);
        std::size_t t = 0;
        auto take = [&]() -> double {
          if (t >= tok.size()) format_error_at(where, "too few values for element '" + el.name + "'");
          return number_at(tok[t++], where);
        };
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          const auto& prop = el.props[p];
          if (!prop.is_list) {
            // Declared float32 values are stored as float32, as in binary files.
            values[p] = prop.type == PlyType::f32 ? static_cast<double>(static_cast<float>(take())) : take();
            continue;
          }
          const double cnt = take();
          if (cnt < 0) format_error_at(where, "negative list length");
          for (long long m = 0; m < static_cast<long long>(cnt); ++m) {
            const double v = take();
            if (static_cast<int>(p) == face_list) poly.push_back(static_cast<int>(v));
          }
        }
      }

      if (is_vertex) {
        verts.emplace_back(values[xi], values[yi], values[zi]);
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          const auto& prop = el.props[p];
          if (!prop.is_list && prop.name != "x" && prop.name != "y" && prop.name != "z")
            scalars[prop.name].push_back(values[p]);
        }
      } else if (is_face) {
        const std::string loc = binary ? "byte offset " + std::to_string(where)
                                       : "line " + std::to_string(where);
        if (poly.size() < 3) fail(ErrorCode::format, loc + ": face with fewer than 3 vertices");
        for (int v : poly) {
          if (v < 0 || static_cast<std::size_t>(v) >= verts.size())
            fail(ErrorCode::format, loc + ": face index " + std::to_string(v) + " out of range (" +
                                        std::to_string(verts.size()) + " vertices)");
        }
        append_fan(tris, poly);
      }
    }
  }
  if (!have_vertex) format_error_at(reader.line(), "PLY has no vertex element");

  MeshData data = to_mesh_data(verts, tris);
  for (auto& [name, vals] : scalars)
    data.vertex_scalars[name] = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return data;
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

Eigen::MatrixX3d read_xyz_rows(const std::filesystem::path& path, bool exact_three) {
  const std::string text = read_file(path);
  std::vector<Eigen::Vector3d> rows;
  LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split(line, true);
    if (tok.empty()) continue;
    double probe = 0.0;
    if (rows.empty() && !parse_double(tok[0], probe)) continue;  // header row
    if (tok.size() < 3 || (exact_three && tok.size() != 3))
      format_error_at(reader.line(), "expected 3 values per row, got " + std::to_string(tok.size()));
    rows.emplace_back(number_at(tok[0], reader.line()), number_at(tok[1], reader.line()),
                      number_at(tok[2], reader.line()));
  }
  Eigen::MatrixX3d out(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i];
  return out;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void append_number(std::string& out, float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void check_field(const Mesh& mesh, const Eigen::VectorXd& deviation) {
  if (deviation.size() != mesh.node_count())
    fail(ErrorCode::shape, "deviation has " + std::to_string(deviation.size()) + " values for " +
                               std::to_string(mesh.node_count()) + " nodes");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  return out;
}

}  // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".obj") return MeshFormat::obj;
  if (ext == ".ply") return MeshFormat::ply;
  fail(ErrorCode::format, "cannot infer mesh format from '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  auto out = open_out(path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

MeshData parse_mesh_data(std::string_view bytes, MeshFormat format) {
  return format == MeshFormat::obj ? parse_obj(bytes) : parse_ply(bytes);
}

MeshData read_mesh_data(const std::filesystem::path& path, MeshFormat format) {
  return parse_mesh_data(read_file(path), format);
}

MeshData read_mesh_data(const std::filesystem::path& path) {
  return read_mesh_data(path, format_from_path(path));
}

Mesh parse_mesh(std::string_view bytes, MeshFormat format) {
  MeshData data = parse_mesh_data(bytes, format);
  return Mesh(std::move(data.nodes), std::move(data.elements));
}

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  return parse_mesh(read_file(path), format);
}

Mesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_path(path)); }

PointCloud load_point_cloud(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".ply" || ext == ".obj") return PointCloud(read_mesh_data(path).nodes);
  return PointCloud(read_xyz_rows(path, false));
}

Eigen::MatrixX3d load_displacement(const std::filesystem::path& path) {
  return read_xyz_rows(path, true);
}

void write_ply(std::ostream& out, const Mesh& mesh, const Eigen::VectorXd& deviation) {
  check_field(mesh, deviation);
  std::string s;
  s.reserve(static_cast<std::size_t>(mesh.node_count()) * 64 + static_cast<std::size_t>(mesh.element_count()) * 24);
  s += "ply\nformat ascii 1.0\ncomment shapemorph deviation field (mm)\n";
  s += "element vertex " + std::to_string(mesh.node_count()) + "\n";
  s += "property double x\nproperty double y\nproperty double z\nproperty float deviation\n";
  s += "element face " + std::to_string(mesh.element_count()) + "\n";
  s += "property list uchar int vertex_indices\nend_header\n";
  const auto& X = mesh.nodes();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (int d = 0; d < 3; ++d) {
      append_number(s, X(i, d));
      s += ' ';
    }
    append_number(s, static_cast<float>(deviation[i]));
    s += '\n';
  }
  const auto& E = mesh.elements();
  for (Eigen::Index e = 0; e < E.rows(); ++e)
    s += "3 " + std::to_string(E(e, 0)) + ' ' + std::to_string(E(e, 1)) + ' ' + std::to_string(E(e, 2)) + '\n';
  out << s;
}

void write_ply(const std::filesystem::path& path, const Mesh& mesh, const Eigen::VectorXd& deviation) {
  auto out = open_out(path);
  write_ply(out, mesh, deviation);
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

void write_vtk(std::ostream& out, const Mesh& mesh, const Eigen::VectorXd& deviation) {
  check_field(mesh, deviation);
  std::string s;
  s += "# vtk DataFile Version 3.0\nshapemorph deviation field (mm)\nASCII\nDATASET POLYDATA\n";
  s += "POINTS " + std::to_string(mesh.node_count()) + " double\n";
  const auto& X = mesh.nodes();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    append_number(s, X(i, 0));
    s += ' ';
    append_number(s, X(i, 1));
    s += ' ';
    append_number(s, X(i, 2));
    s += '\n';
  }
  const auto& E = mesh.elements();
  s += "POLYGONS " + std::to_string(E.rows()) + ' ' + std::to_string(4 * E.rows()) + '\n';
  for (Eigen::Index e = 0; e < E.rows(); ++e)
    s += "3 " + std::to_string(E(e, 0)) + ' ' + std::to_string(E(e, 1)) + ' ' + std::to_string(E(e, 2)) + '\n';
  s += "POINT_DATA " + std::to_string(mesh.node_count()) + "\nSCALARS deviation float 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < deviation.size(); ++i) {
    append_number(s, static_cast<float>(deviation[i]));
    s += '\n';
  }
  out << s;
}

void write_vtk(const std::filesystem::path& path, const Mesh& mesh, const Eigen::VectorXd& deviation) {
  auto out = open_out(path);
  write_vtk(out, mesh, deviation);
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace shapemorph::geometry

#include "tacmap/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

namespace tacmap {

RigidPose RigidPose::from_z_axis(const Vec3& z_axis, const Vec3& origin) {
  const Vec3 z = z_axis.normalized();
  // Seed x from the world axis least aligned with z.
  Vec3 seed = Vec3::UnitX();
  if (std::abs(z.x()) > std::abs(z.y()) && std::abs(z.z()) < std::abs(z.x()))
    seed = Vec3::UnitZ();
  else if (std::abs(z.x()) > std::abs(z.y()))
    seed = Vec3::UnitY();
  const Vec3 x = (seed - seed.dot(z) * z).normalized();
  const Vec3 y = z.cross(x);
  RigidPose pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = z;
  pose.translation = origin;
  return pose;
}

bool RigidPose::is_valid(double tol) const {
  const Mat3 gram = rotation.transpose() * rotation;
  return (gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
}

Ray Ray::make(const Vec3& origin, const Vec3& direction) {
  const double n = direction.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw GeometryError("ray direction must be non-zero");
  return {origin, direction / n};
}

Vec3 TriangleMesh::face_normal(std::size_t f) const {
  const auto& t = faces[f];
  const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  return n.normalized();
}

double TriangleMesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriangleMesh::surface_area() const {
  double a = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

Aabb TriangleMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

void TriangleMesh::validate(double min_area) const {
  if (vertices.empty() || faces.empty()) throw GeometryError("mesh is empty");
  for (const auto& v : vertices)
    if (!v.allFinite()) throw GeometryError("mesh has non-finite vertex");
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (auto i : faces[f])
      if (i >= vertices.size())
        throw GeometryError("face " + std::to_string(f) + " index out of range");
    if (face_area(f) < min_area)
      throw GeometryError("face " + std::to_string(f) + " is degenerate");
  }
  if (!normals.empty() && normals.size() != vertices.size())
    throw GeometryError("normal count does not match vertex count");
  if (!attribute.empty() && attribute.size() != vertices.size())
    throw GeometryError("attribute count does not match vertex count");
}

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::unordered_map<std::uint64_t, int> edge_usage(const TriangleMesh& mesh) {
  std::unordered_map<std::uint64_t, int> use;
  use.reserve(mesh.faces.size() * 2);
  for (const auto& t : mesh.faces)
    for (int k = 0; k < 3; ++k) ++use[edge_key(t[k], t[(k + 1) % 3])];
  return use;
}

}  // namespace

bool TriangleMesh::is_watertight() const {
  if (faces.empty()) return false;
  for (const auto& [key, n] : edge_usage(*this))
    if (n != 2) return false;
  return true;
}

std::size_t TriangleMesh::edge_count() const { return edge_usage(*this).size(); }

void TriangleMesh::transform(const RigidPose& pose) {
  for (auto& v : vertices) v = pose.apply(v);
  for (auto& n : normals) n = pose.rotate(n);
}

void TriangleMesh::scale(double factor) {
  for (auto& v : vertices) v *= factor;
}

// ---------------------------------------------------------------------------
// Procedural solids

TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::uint64_t, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = edge_key(a, b);
      if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const auto idx = static_cast<std::uint32_t>(verts.size() - 1);
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const auto a = midpoint(f[0], f[1]);
      const auto b = midpoint(f[1], f[2]);
      const auto c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }
  TriangleMesh mesh;
  mesh.faces = std::move(faces);
  mesh.vertices.reserve(verts.size());
  for (const auto& v : verts) mesh.vertices.push_back(center + radius * v);
  return mesh;
}

TriangleMesh make_box(const Vec3& extents, const Vec3& center) {
  TriangleMesh mesh;
  const Vec3 h = 0.5 * extents;
  for (int i = 0; i < 8; ++i)
    mesh.vertices.push_back(center + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                                          (i & 4) ? h.z() : -h.z()));
  mesh.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},   // -z, +z
                {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},   // -y, +y
                {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};  // -x, +x
  return mesh;
}

TriangleMesh make_cylinder(double radius, double height, int segments, const Vec3& center) {
  if (segments < 3) throw GeometryError("cylinder needs at least 3 segments");
  TriangleMesh mesh;
  const auto n = static_cast<std::uint32_t>(segments);
  const double hz = 0.5 * height;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    mesh.vertices.push_back(center + Vec3(radius * std::cos(a), radius * std::sin(a), -hz));
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    mesh.vertices.push_back(center + Vec3(radius * std::cos(a), radius * std::sin(a), hz));
  }
  const std::uint32_t bottom = 2 * n, top = 2 * n + 1;
  mesh.vertices.push_back(center - Vec3(0, 0, hz));
  mesh.vertices.push_back(center + Vec3(0, 0, hz));
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    mesh.faces.push_back({i, j, n + j});
    mesh.faces.push_back({i, n + j, n + i});
    mesh.faces.push_back({bottom, j, i});
    mesh.faces.push_back({top, n + i, n + j});
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// I/O

namespace {

std::string lowercase_extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

TriangleMesh load_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  auto parse_index = [&](const std::string& token) -> std::uint32_t {
    const long idx = std::stol(token.substr(0, token.find('/')));
    const long n = static_cast<long>(mesh.vertices.size());
    const long resolved = idx < 0 ? n + idx : idx - 1;
    if (resolved < 0 || resolved >= n) throw GeometryError("OBJ face index out of range");
    return static_cast<std::uint32_t>(resolved);
  };
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw GeometryError("malformed OBJ vertex: " + line);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_index(tok));
      if (poly.size() < 3) throw GeometryError("OBJ face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k)
        mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  return mesh;
}

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType ply_type(const std::string& s) {
  static const std::map<std::string, PlyType> table = {
      {"char", PlyType::Int8},     {"int8", PlyType::Int8},       {"uchar", PlyType::UInt8},
      {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},     {"int16", PlyType::Int16},
      {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},   {"int", PlyType::Int32},
      {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},     {"uint32", PlyType::UInt32},
      {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
      {"float64", PlyType::Float64}};
  auto it = table.find(s);
  if (it == table.end()) throw GeometryError("unknown PLY type: " + s);
  return it->second;
}

template <typename T>
T read_le(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw GeometryError("truncated binary PLY");
  static_assert(std::endian::native == std::endian::little);
  return v;
}

double read_binary(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::Int8: return read_le<std::int8_t>(in);
    case PlyType::UInt8: return read_le<std::uint8_t>(in);
    case PlyType::Int16: return read_le<std::int16_t>(in);
    case PlyType::UInt16: return read_le<std::uint16_t>(in);
    case PlyType::Int32: return read_le<std::int32_t>(in);
    case PlyType::UInt32: return read_le<std::uint32_t>(in);
    case PlyType::Float32: return read_le<float>(in);
    case PlyType::Float64: return read_le<double>(in);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

TriangleMesh load_ply(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw GeometryError("missing PLY magic");
  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian")
        binary = true;
      else if (fmt != "ascii")
        throw GeometryError("unsupported PLY format: " + fmt);
    } else if (tag == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw GeometryError("PLY property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = ply_type(ct);
        p.type = ply_type(it);
      } else {
        p.type = ply_type(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (tag == "end_header") {
      break;
    }
  }

  TriangleMesh mesh;
  std::vector<std::string> tokens;
  std::size_t token_pos = 0;
  auto next_ascii = [&]() -> double {
    while (token_pos >= tokens.size()) {
      if (!std::getline(in, line)) throw GeometryError("truncated ASCII PLY");
      std::istringstream ls(line);
      tokens.clear();
      token_pos = 0;
      for (std::string t; ls >> t;) tokens.push_back(t);
    }
    return std::stod(tokens[token_pos++]);
  };
  auto next = [&](PlyType t) { return binary ? read_binary(in, t) : next_ascii(); };

  for (const auto& e : elements) {
    for (std::size_t i = 0; i < e.count; ++i) {
      Vec3 v = Vec3::Zero();
      std::vector<std::uint32_t> poly;
      for (const auto& p : e.properties) {
        if (p.is_list) {
          const auto n = static_cast<std::size_t>(next(p.count_type));
          for (std::size_t k = 0; k < n; ++k) {
            const double idx = next(p.type);
            if (idx < 0) throw GeometryError("negative PLY face index");
            poly.push_back(static_cast<std::uint32_t>(idx));
          }
        } else {
          const double value = next(p.type);
          if (p.name == "x") v.x() = value;
          else if (p.name == "y") v.y() = value;
          else if (p.name == "z") v.z() = value;
        }
      }
      if (e.name == "vertex") {
        mesh.vertices.push_back(v);
      } else if (e.name == "face") {
        if (poly.size() < 3) throw GeometryError("PLY face with fewer than 3 vertices");
        for (std::size_t k = 1; k + 1 < poly.size(); ++k)
          mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  return mesh;
}

}  // namespace

TriangleMesh load_mesh(const std::string& path, double scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GeometryError("cannot open mesh file: " + path);
  const std::string ext = lowercase_extension(path);
  TriangleMesh mesh;
  try {
    if (ext == "obj")
      mesh = load_obj(in);
    else if (ext == "ply")
      mesh = load_ply(in);
    else
      throw GeometryError("unsupported mesh extension: " + ext);
  } catch (const std::invalid_argument&) {
    throw GeometryError("parse failure in " + path);
  } catch (const std::out_of_range&) {
    throw GeometryError("parse failure in " + path);
  }
  mesh.scale(scale);
  mesh.validate();
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write " + path);
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw GeometryError("write failed: " + path);
}

void save_ply(const TriangleMesh& mesh, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GeometryError("cannot write " + path);
  const bool has_attr = !mesh.attribute.empty();
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (has_attr) out << "property float uncertainty\n";
  out << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  auto put = [&](auto value) { out.write(reinterpret_cast<const char*>(&value), sizeof(value)); };
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    if (binary) {
      put(static_cast<float>(v.x()));
      put(static_cast<float>(v.y()));
      put(static_cast<float>(v.z()));
      if (has_attr) put(static_cast<float>(mesh.attribute[i]));
    } else {
      out << static_cast<float>(v.x()) << ' ' << static_cast<float>(v.y()) << ' '
          << static_cast<float>(v.z());
      if (has_attr) out << ' ' << static_cast<float>(mesh.attribute[i]);
      out << '\n';
    }
  }
  for (const auto& f : mesh.faces) {
    if (binary) {
      put(static_cast<std::uint8_t>(3));
      for (auto i : f) put(static_cast<std::int32_t>(i));
    } else {
      out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
  }
  if (!out) throw GeometryError("write failed: " + path);
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.faces.empty()) throw GeometryError("cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto f = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cumulative.begin(), static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    double u = unit(rng), v = unit(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const auto& t = mesh.faces[f];
    const Vec3& a = mesh.vertices[t[0]];
    points.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
  }
  return points;
}

}  // namespace tacmap

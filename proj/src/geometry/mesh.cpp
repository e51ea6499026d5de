#include "meshssm/geometry/mesh.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "meshssm/error.hpp"
#include "meshssm/nd/random.hpp"

namespace meshssm::geometry {
namespace {

double parse_double(std::string_view token, const std::string& where) {
  double value = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParseError(where + ": invalid number '" + std::string(token) + "'");
  return value;
}

std::uint32_t parse_index(std::string_view token, const std::string& where) {
  token = token.substr(0, token.find('/'));
  long long value = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParseError(where + ": invalid face index '" + std::string(token) + "'");
  if (value < 1) throw ParseError(where + ": face indices are 1-based and positive");
  return static_cast<std::uint32_t>(value - 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Union-find over vertices joined by face edges or identical coordinates.
std::vector<std::size_t> components(const Mesh& mesh) {
  std::vector<std::size_t> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };
  for (const auto& f : mesh.faces) {
    unite(f[0], f[1]);
    unite(f[1], f[2]);
  }
  std::map<Point3, std::size_t> first;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    auto [it, inserted] = first.emplace(mesh.vertices[v], v);
    if (!inserted) unite(v, it->second);
  }
  for (std::size_t v = 0; v < parent.size(); ++v) parent[v] = find(v);
  return parent;
}

}  // namespace

std::vector<double> PointSet::flat() const {
  std::vector<double> out;
  out.reserve(points.size() * 3);
  for (const auto& p : points) out.insert(out.end(), p.begin(), p.end());
  return out;
}

PointSet PointSet::from_flat(std::span<const double> xyz) {
  if (xyz.size() % 3 != 0) throw DimensionError("point data length is not a multiple of 3");
  PointSet out;
  out.points.resize(xyz.size() / 3);
  for (std::size_t i = 0; i < out.points.size(); ++i) out.points[i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
  return out;
}

void validate(const Mesh& mesh) {
  if (mesh.vertices.empty()) throw ValidationError("mesh has no vertices");
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    for (double c : mesh.vertices[v])
      if (!std::isfinite(c)) throw ValidationError("vertex " + std::to_string(v) + " has a non-finite coordinate");
  const std::size_t n = mesh.vertices.size();
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    for (auto i : t)
      if (i >= n)
        throw ValidationError("face " + std::to_string(f) + " references vertex " + std::to_string(i + 1) +
                              " but the mesh has " + std::to_string(n) + " vertices");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw ValidationError("face " + std::to_string(f) + " is degenerate (repeated vertex index)");
  }
}

bool is_connected(const Mesh& mesh) {
  const auto roots = components(mesh);
  for (auto r : roots)
    if (r != roots.front()) return false;
  return true;
}

Mesh parse_mesh(std::istream& in, const std::string& source_name) {
  Mesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    const auto tag = tokens[0];
    if (tag == "v") {
      if (tokens.size() < 4) throw ParseError(where + ": vertex line needs three coordinates");
      mesh.vertices.push_back(
          {parse_double(tokens[1], where), parse_double(tokens[2], where), parse_double(tokens[3], where)});
    } else if (tag == "f") {
      if (tokens.size() != 4) throw ParseError(where + ": only triangular faces are supported");
      mesh.faces.push_back({parse_index(tokens[1], where),
                            parse_index(tokens[2], where),
                            parse_index(tokens[3], where)});
    } else if (tag == "vn" || tag == "vt" || tag == "o" || tag == "g" || tag == "s" || tag == "usemtl" ||
               tag == "mtllib") {
      continue;
    } else {
      throw ParseError(where + ": unrecognized record '" + std::string(tag) + "'");
    }
  }
  validate(mesh);
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_mesh(in, path.string());
}

void write_mesh(std::ostream& out, const Mesh& mesh, int significant_digits) {
  out << std::setprecision(significant_digits);
  for (const auto& v : mesh.vertices) out << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void save_mesh(const std::filesystem::path& path, const Mesh& mesh, int significant_digits) {
  auto out = open_output(path);
  write_mesh(out, mesh, significant_digits);
  if (!out) throw IoError("failed writing " + path.string());
}

PointSet parse_points(std::istream& in, const std::string& source_name) {
  PointSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    if (tokens.size() != 3) throw ParseError(where + ": expected 'x y z'");
    out.points.push_back(
        {parse_double(tokens[0], where), parse_double(tokens[1], where), parse_double(tokens[2], where)});
  }
  if (out.points.empty()) throw ParseError(source_name + ": point set is empty");
  for (const auto& p : out.points)
    for (double c : p)
      if (!std::isfinite(c)) throw ValidationError(source_name + ": non-finite coordinate");
  return out;
}

PointSet load_points(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_points(in, path.string());
}

void write_points(std::ostream& out, const PointSet& points) {
  out << std::setprecision(17);
  for (const auto& p : points.points) out << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
}

void save_points(const std::filesystem::path& path, const PointSet& points) {
  auto out = open_output(path);
  write_points(out, points);
  if (!out) throw IoError("failed writing " + path.string());
}

Point3 centroid(std::span<const Point3> points) {
  Point3 c{0.0, 0.0, 0.0};
  for (const auto& p : points)
    for (int q = 0; q < 3; ++q) c[q] += p[q];
  for (auto& v : c) v /= static_cast<double>(points.size());
  return c;
}

Mesh center_mesh(const Mesh& mesh) {
  Mesh out = mesh;
  const Point3 c = centroid(mesh.vertices);
  for (auto& v : out.vertices)
    for (int q = 0; q < 3; ++q) v[q] -= c[q];
  return out;
}

Mesh pad_vertices(const Mesh& mesh, std::size_t target_n, std::uint64_t seed) {
  const std::size_t n = mesh.vertices.size();
  if (target_n < n)
    throw ValidationError("pad_vertices: target " + std::to_string(target_n) + " is below the current vertex count " +
                          std::to_string(n));
  Mesh out = mesh;
  nd::Rng rng(seed);
  out.vertices.reserve(target_n);
  for (std::size_t i = n; i < target_n; ++i) out.vertices.push_back(mesh.vertices[rng.index(n)]);
  return out;
}

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

}  // namespace meshssm::geometry

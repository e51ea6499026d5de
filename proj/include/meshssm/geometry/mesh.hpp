#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace meshssm::geometry {

using Point3 = std::array<double, 3>;
using Triangle = std::array<std::uint32_t, 3>;

// Ordered or unordered set of 3D points (template, correspondences, vertices).
struct PointSet {
  std::vector<Point3> points;

  std::size_t size() const { return points.size(); }
  // Row-major m×3 copy.
  std::vector<double> flat() const;
  static PointSet from_flat(std::span<const double> xyz);
};

struct Mesh {
  std::vector<Point3> vertices;
  std::vector<Triangle> faces;

  std::size_t vertex_count() const { return vertices.size(); }
  PointSet vertex_set() const { return PointSet{vertices}; }
};

// Throws ValidationError on out-of-range or repeated face indices, non-finite
// coordinates, or an empty vertex list.
void validate(const Mesh& mesh);
// Connectivity of the edge graph derived from the faces; vertices with
// identical coordinates count as joined.
bool is_connected(const Mesh& mesh);

// ASCII triangle meshes: `v x y z` and `f i j k` lines with 1-based indices.
// `#` comments, blank lines and the OBJ tags vn/vt/o/g/s/usemtl/mtllib are
// skipped; `f 1/2/3 ...` index forms keep the vertex index. Anything else is
// a ParseError naming the line.
Mesh parse_mesh(std::istream& in, const std::string& source_name = "<stream>");
Mesh load_mesh(const std::filesystem::path& path);
// 9 significant digits by default.
void write_mesh(std::ostream& out, const Mesh& mesh, int significant_digits = 9);
void save_mesh(const std::filesystem::path& path, const Mesh& mesh, int significant_digits = 9);

// Point-set files: one `x y z` per line, line order is the point order.
// Written with 17 significant digits so values round-trip exactly.
PointSet parse_points(std::istream& in, const std::string& source_name = "<stream>");
PointSet load_points(const std::filesystem::path& path);
void write_points(std::ostream& out, const PointSet& points);
void save_points(const std::filesystem::path& path, const PointSet& points);

Point3 centroid(std::span<const Point3> points);
// Translates so the vertex centroid is the origin.
Mesh center_mesh(const Mesh& mesh);
// Appends target_n − n copies of vertices drawn uniformly with replacement.
Mesh pad_vertices(const Mesh& mesh, std::size_t target_n, std::uint64_t seed);

double squared_distance(const Point3& a, const Point3& b);
double distance(const Point3& a, const Point3& b);

}  // namespace meshssm::geometry

#include "meshssm/geometry/surface_distance.hpp"

#include <cmath>
#include <limits>

#include "meshssm/error.hpp"

namespace meshssm::geometry {
namespace {

double dot(const Point3& a, const Point3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Point3 minus(const Point3& a, const Point3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Point3 along(const Point3& o, const Point3& d, double s) { return {o[0] + s * d[0], o[1] + s * d[1], o[2] + s * d[2]}; }

}  // namespace

// Voronoi-region walk over the triangle's vertices, edges and interior.
Point3 closest_point_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
  const Point3 ab = minus(b, a), ac = minus(c, a), ap = minus(p, a);
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Point3 bp = minus(p, b);
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return along(a, ab, d1 / (d1 - d3));

  const Point3 cp = minus(p, c);
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return along(a, ac, d2 / (d2 - d6));

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return along(b, minus(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6)));

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {a[0] + ab[0] * v + ac[0] * w, a[1] + ab[1] * v + ac[1] * w, a[2] + ab[2] * v + ac[2] * w};
}

SurfaceDistances point_to_mesh_distance(const PointSet& points, const Mesh& mesh) {
  if (points.size() == 0 || mesh.faces.empty())
    throw ValidationError("point_to_mesh_distance: need at least one point and one face");
  SurfaceDistances out;
  out.per_point.reserve(points.size());
  double total = 0.0;
  for (const auto& p : points.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : mesh.faces) {
      const auto q = closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
      best = std::min(best, squared_distance(p, q));
    }
    const double d = std::sqrt(best);
    out.per_point.push_back(d);
    total += d;
  }
  out.mean = total / static_cast<double>(points.size());
  return out;
}

}  // namespace meshssm::geometry

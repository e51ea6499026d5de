#pragma once

#include <vector>

#include "meshssm/geometry/mesh.hpp"

namespace meshssm::geometry {

// Closest point of triangle abc to p (faces, edges and vertices all considered).
Point3 closest_point_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c);

struct SurfaceDistances {
  std::vector<double> per_point;
  double mean = 0.0;
};

// Exact minimum Euclidean distance from each point to the triangle surface.
SurfaceDistances point_to_mesh_distance(const PointSet& points, const Mesh& mesh);

}  // namespace meshssm::geometry

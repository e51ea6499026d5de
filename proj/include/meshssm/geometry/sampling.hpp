#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "meshssm/geometry/mesh.hpp"

namespace meshssm::geometry {

// Area-weighted triangle choice, then a uniform point inside the triangle.
PointSet sample_surface_points(const Mesh& mesh, std::size_t count, std::uint64_t seed);

// Fibonacci lattice on the sphere of the given radius centred at the origin.
PointSet sphere_template(std::size_t count, double radius = 1.0);

// Two-way Chamfer with squared distances and mean normalization, on plain
// point sets (no differentiation).
double chamfer_l2(const PointSet& a, const PointSet& b);

// Index of the mesh minimizing the summed L2 Chamfer distance between vertex
// sets to all other meshes; ties go to the lower index.
std::size_t compute_medoid(std::span<const Mesh> meshes);

double triangle_area(const Point3& a, const Point3& b, const Point3& c);

}  // namespace meshssm::geometry

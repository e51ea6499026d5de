#include "meshssm/geometry/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "meshssm/error.hpp"
#include "meshssm/nd/kernels.hpp"
#include "meshssm/nd/random.hpp"

namespace meshssm::geometry {

double triangle_area(const Point3& a, const Point3& b, const Point3& c) {
  const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
  const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
  const double cx = uy * vz - uz * vy, cy = uz * vx - ux * vz, cz = ux * vy - uy * vx;
  return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

PointSet sample_surface_points(const Mesh& mesh, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("sample_surface_points: count must be at least 1");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw ValidationError("sample_surface_points: mesh has zero surface area");

  nd::Rng rng(seed);
  PointSet out;
  out.points.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& t = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
    const auto& a = mesh.vertices[t[0]];
    const auto& b = mesh.vertices[t[1]];
    const auto& c = mesh.vertices[t[2]];
    out.points.push_back({wa * a[0] + wb * b[0] + wc * c[0], wa * a[1] + wb * b[1] + wc * c[1],
                          wa * a[2] + wb * b[2] + wc * c[2]});
  }
  return out;
}

PointSet sphere_template(std::size_t count, double radius) {
  if (count == 0) throw ValidationError("sphere_template: count must be at least 1");
  if (!(radius > 0.0)) throw ValidationError("sphere_template: radius must be positive");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  PointSet out;
  out.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    out.points.push_back({radius * r * std::cos(phi), radius * r * std::sin(phi), radius * z});
  }
  return out;
}

double chamfer_l2(const PointSet& a, const PointSet& b) {
  if (a.size() == 0 || b.size() == 0) throw ValidationError("chamfer_l2: empty point set");
  const auto fa = a.flat(), fb = b.flat();
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> d(n * m);
  nd::kernels::active().pairwise_sqdist(fa.data(), n, fb.data(), m, 3, d.data());
  std::vector<double> col_min(m, std::numeric_limits<double>::infinity());
  double ab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      row_min = std::min(row_min, d[i * m + j]);
      col_min[j] = std::min(col_min[j], d[i * m + j]);
    }
    ab += row_min;
  }
  double ba = 0.0;
  for (double v : col_min) ba += v;
  return ab / static_cast<double>(n) + ba / static_cast<double>(m);
}

std::size_t compute_medoid(std::span<const Mesh> meshes) {
  if (meshes.empty()) throw ValidationError("compute_medoid: no meshes");
  const std::size_t count = meshes.size();
  std::vector<PointSet> sets;
  sets.reserve(count);
  for (const auto& m : meshes) sets.push_back(m.vertex_set());
  std::vector<double> totals(count, 0.0);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = i + 1; j < count; ++j) {
      const double d = chamfer_l2(sets[i], sets[j]);
      totals[i] += d;
      totals[j] += d;
    }
  return static_cast<std::size_t>(std::min_element(totals.begin(), totals.end()) - totals.begin());
}

}  // namespace meshssm::geometry

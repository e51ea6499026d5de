#include "meshssm/geometry/box_bump.hpp"

#include <array>
#include <cmath>
#include <map>
#include <string>

#include "meshssm/error.hpp"
#include "meshssm/nd/random.hpp"

namespace meshssm::geometry {

void BoxBumpParams::validate() const {
  if (!(length > 0.0 && width > 0.0 && height > 0.0)) throw ValidationError("box dimensions must be positive");
  if (resolution < 1) throw ValidationError("box resolution must be at least 1");
  if (!(bump_sigma > 0.0)) throw ValidationError("bump sigma must be positive");
  if (!(noise >= 0.0)) throw ValidationError("noise must be non-negative");
}

Mesh generate_box_bump(double t, const BoxBumpParams& params, std::uint64_t seed) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("box-bump parameter t=" + std::to_string(t) + " outside [0, 1]");
  params.validate();

  const std::size_t cx = params.resolution;
  const auto cells = [&](double extent) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(extent / params.length * double(cx))));
  };
  const std::array<std::size_t, 3> n{cx, cells(params.width), cells(params.height)};
  const std::array<double, 3> size{params.length, params.width, params.height};

  // Surface lattice points keyed by integer coordinates so shared edges weld exactly.
  Mesh mesh;
  std::map<std::array<std::size_t, 3>, std::uint32_t> ids;
  auto vertex = [&](std::array<std::size_t, 3> key) {
    auto [it, inserted] = ids.emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) {
      Point3 p;
      for (int q = 0; q < 3; ++q) p[q] = -0.5 * size[q] + size[q] * double(key[q]) / double(n[q]);
      mesh.vertices.push_back(p);
    }
    return it->second;
  };

  // Each face spans axes (u, v) at fixed coordinate `level` on axis w; `flip`
  // reverses winding so all normals point outward.
  auto face = [&](int u, int v, int w, std::size_t level, bool flip) {
    for (std::size_t i = 0; i < n[u]; ++i)
      for (std::size_t j = 0; j < n[v]; ++j) {
        auto key = [&](std::size_t a, std::size_t b) {
          std::array<std::size_t, 3> k{};
          k[u] = a;
          k[v] = b;
          k[w] = level;
          return vertex(k);
        };
        const auto p00 = key(i, j), p10 = key(i + 1, j), p11 = key(i + 1, j + 1), p01 = key(i, j + 1);
        if (flip) {
          mesh.faces.push_back({p00, p11, p10});
          mesh.faces.push_back({p00, p01, p11});
        } else {
          mesh.faces.push_back({p00, p10, p11});
          mesh.faces.push_back({p00, p11, p01});
        }
      }
  };
  face(0, 1, 2, n[2], false);  // top
  face(0, 1, 2, 0, true);      // bottom
  face(2, 0, 1, n[1], false);  // +y
  face(2, 0, 1, 0, true);      // -y
  face(1, 2, 0, n[0], false);  // +x
  face(1, 2, 0, 0, true);      // -x

  const double center = params.bump_center(t);
  const double two_s2 = 2.0 * params.bump_sigma * params.bump_sigma;
  for (const auto& [key, id] : ids) {
    if (key[2] != n[2]) continue;
    auto& p = mesh.vertices[id];
    const double dx = p[0] - center;
    p[2] += params.bump_height * std::exp(-(dx * dx + p[1] * p[1]) / two_s2);
  }

  if (params.noise > 0.0) {
    nd::Rng rng(seed);
    for (auto& p : mesh.vertices)
      for (auto& c : p) c += params.noise * rng.normal();
  }
  return mesh;
}

}  // namespace meshssm::geometry

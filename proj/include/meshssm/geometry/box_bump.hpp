#pragma once

#include <cstddef>
#include <cstdint>

#include "meshssm/geometry/mesh.hpp"

namespace meshssm::geometry {

// Axis-aligned box centred at the origin with a Gaussian bump raised on the
// top face. The bump centre slides along x from bump_x_min (t = 0) to
// bump_x_max (t = 1). `resolution` is the number of grid cells along the box
// length; the other two axes use the same cell size (at least one cell).
struct BoxBumpParams {
  double length = 4.0;
  double width = 2.0;
  double height = 1.0;
  std::size_t resolution = 20;
  double bump_height = 1.0;
  double bump_sigma = 0.5;
  double bump_x_min = -1.2;
  double bump_x_max = 1.2;
  // Standard deviation of optional per-vertex Gaussian jitter, drawn from the seed.
  double noise = 0.0;

  void validate() const;
  double bump_center(double t) const { return bump_x_min + t * (bump_x_max - bump_x_min); }
};

Mesh generate_box_bump(double t, const BoxBumpParams& params = {}, std::uint64_t seed = 0);

}  // namespace meshssm::geometry

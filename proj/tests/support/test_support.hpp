#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "meshssm/geometry/mesh.hpp"
#include "meshssm/nd/random.hpp"
#include "meshssm/nd/tensor.hpp"

namespace meshssm::testing {

inline nd::Tensor random_tensor(nd::Shape shape, nd::Rng& rng, double lo = -1.0, double hi = 1.0,
                                bool requires_grad = true) {
  std::vector<double> v(nd::shape_size(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return nd::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline geometry::PointSet random_points(std::size_t m, nd::Rng& rng, double scale = 1.0) {
  geometry::PointSet out;
  for (std::size_t i = 0; i < m; ++i)
    out.points.push_back({scale * (2 * rng.uniform() - 1), scale * (2 * rng.uniform() - 1),
                          scale * (2 * rng.uniform() - 1)});
  return out;
}

struct GradientCheck {
  double max_error = 0.0;
  std::size_t checked = 0;
};

// Central differences of scalar f() against the analytic gradient of every
// entry of `params`. Error per entry is |analytic − numeric| / max(floor,
// |analytic|, |numeric|).
inline GradientCheck check_gradients(const std::function<nd::Tensor()>& f, std::vector<nd::Tensor> params,
                                     double h = 1e-5, double floor = 1e-3, std::size_t max_entries = 0) {
  for (auto& p : params) p.zero_grad();
  f().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params)
    analytic.emplace_back(p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                                       : std::vector<double>(p.size(), 0.0));
  GradientCheck out;
  for (std::size_t q = 0; q < params.size(); ++q) {
    auto values = params[q].mutable_data();
    const std::size_t stride = max_entries == 0 || values.size() <= max_entries ? 1 : values.size() / max_entries;
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f().item();
      values[i] = saved - h;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[q][i];
      const double denom = std::max({floor, std::abs(a), std::abs(numeric)});
      out.max_error = std::max(out.max_error, std::abs(a - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

// rows×cols vertex grid in the z = 0 plane, two triangles per cell.
inline geometry::Mesh grid_mesh(std::size_t rows, std::size_t cols, double spacing = 1.0) {
  geometry::Mesh m;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m.vertices.push_back({spacing * c, spacing * r, 0.0});
  auto id = [cols](std::size_t r, std::size_t c) { return static_cast<std::uint32_t>(r * cols + c); };
  for (std::size_t r = 0; r + 1 < rows; ++r)
    for (std::size_t c = 0; c + 1 < cols; ++c) {
      m.faces.push_back({id(r, c), id(r, c + 1), id(r + 1, c + 1)});
      m.faces.push_back({id(r, c), id(r + 1, c + 1), id(r + 1, c)});
    }
  return m;
}

inline geometry::Mesh jitter(geometry::Mesh m, double amount, std::uint64_t seed) {
  nd::Rng rng(seed);
  for (auto& v : m.vertices)
    for (auto& x : v) x += amount * (2 * rng.uniform() - 1);
  return m;
}

// Relabels vertices so that new vertex i is old vertex order[i]; faces follow.
inline geometry::Mesh permute_vertices(const geometry::Mesh& m, const std::vector<std::uint32_t>& order) {
  geometry::Mesh out;
  std::vector<std::uint32_t> new_index(order.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    out.vertices.push_back(m.vertices[order[i]]);
    new_index[order[i]] = i;
  }
  for (const auto& f : m.faces) out.faces.push_back({new_index[f[0]], new_index[f[1]], new_index[f[2]]});
  return out;
}

inline std::vector<std::uint32_t> random_permutation(std::size_t n, nd::Rng& rng) {
  std::vector<std::uint32_t> p(n);
  for (std::uint32_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
  return p;
}

// Brute-force two-way Chamfer over all pairs.
inline double chamfer_oracle(const geometry::PointSet& a, const geometry::PointSet& b, bool squared) {
  auto one_way = [squared](const geometry::PointSet& x, const geometry::PointSet& y) {
    double total = 0.0;
    for (const auto& p : x.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : y.points) {
        const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
        const double d2 = (dx * dx + dy * dy) + dz * dz;
        best = std::min(best, squared ? d2 : std::sqrt(d2));
      }
      total += best;
    }
    return total / static_cast<double>(x.size());
  };
  return one_way(a, b) + one_way(b, a);
}

// All-pairs shortest paths by repeated Dijkstra over face edges, written
// independently of the library's graph code.
inline std::vector<std::vector<double>> all_pairs_dijkstra(const geometry::Mesh& m) {
  const std::size_t n = m.vertices.size();
  std::vector<std::vector<double>> w(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e) {
      const auto a = f[e], b = f[(e + 1) % 3];
      const auto& p = m.vertices[a];
      const auto& q = m.vertices[b];
      const double len = std::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) +
                                   (p[2] - q[2]) * (p[2] - q[2]));
      w[a][b] = w[b][a] = len;
    }
  std::vector<std::vector<double>> dist(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> d(n, std::numeric_limits<double>::infinity());
    std::vector<bool> done(n, false);
    d[s] = 0.0;
    for (std::size_t it = 0; it < n; ++it) {
      std::size_t u = n;
      for (std::size_t v = 0; v < n; ++v)
        if (!done[v] && (u == n || d[v] < d[u])) u = v;
      if (u == n || std::isinf(d[u])) break;
      done[u] = true;
      for (std::size_t v = 0; v < n; ++v)
        if (std::isfinite(w[u][v]) && d[u] + w[u][v] < d[v]) d[v] = d[u] + w[u][v];
    }
    dist[s] = std::move(d);
  }
  return dist;
}

// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

}  // namespace meshssm::testing

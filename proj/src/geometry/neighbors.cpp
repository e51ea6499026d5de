#include "meshssm/geometry/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <string>

#include "meshssm/error.hpp"
#include "meshssm/nd/kernels.hpp"

namespace meshssm::geometry {
namespace {

void check_k(std::size_t k, std::size_t n) {
  if (k < 1 || k >= n)
    throw ValidationError("neighbor count k=" + std::to_string(k) + " must satisfy 1 <= k < " + std::to_string(n));
}

struct Candidate {
  double dist;
  std::uint32_t index;
  bool operator<(const Candidate& o) const { return dist < o.dist || (dist == o.dist && index < o.index); }
  bool operator>(const Candidate& o) const { return o < *this; }
};

}  // namespace

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::euclidean:
      return "euclidean";
    case Metric::geodesic:
      return "geodesic";
    case Metric::feature:
      break;
  }
  return "feature";
}

NeighborIndex knn(std::span<const double> rows, std::size_t n, std::size_t dim, std::size_t k, Metric metric) {
  if (rows.size() != n * dim) throw DimensionError("knn: data size does not match n x dim");
  check_k(k, n);
  NeighborIndex out{k, std::vector<std::uint32_t>(n * k), metric};
  const auto& K = nd::kernels::active();
  constexpr std::size_t block = 32;
  std::vector<double> dist(block * n);
  std::vector<Candidate> best(k);
  for (std::size_t i0 = 0; i0 < n; i0 += block) {
    const std::size_t rows_here = std::min(block, n - i0);
    K.pairwise_sqdist(rows.data() + i0 * dim, rows_here, rows.data(), n, dim, dist.data());
    for (std::size_t r = 0; r < rows_here; ++r) {
      const std::size_t i = i0 + r;
      const double* drow = dist.data() + r * n;
      // Sorted insertion into the k best so far; candidates arrive in index
      // order, so an equal distance never displaces an earlier index.
      std::size_t filled = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const Candidate c{drow[j], static_cast<std::uint32_t>(j)};
        if (filled == k && !(c < best[k - 1])) continue;
        std::size_t pos = filled < k ? filled++ : k - 1;
        while (pos > 0 && c < best[pos - 1]) {
          best[pos] = best[pos - 1];
          --pos;
        }
        best[pos] = c;
      }
      for (std::size_t q = 0; q < k; ++q) out.indices[i * k + q] = best[q].index;
    }
  }
  return out;
}

NeighborIndex knn(const PointSet& points, std::size_t k) {
  const auto flat = points.flat();
  return knn(flat, points.size(), 3, k, Metric::euclidean);
}

EdgeGraph edge_graph(const Mesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(n);
  auto link = [&](std::uint32_t a, std::uint32_t b, double w) {
    auto& la = adj[a];
    if (std::none_of(la.begin(), la.end(), [b](const auto& e) { return e.first == b; })) {
      la.emplace_back(b, w);
      adj[b].emplace_back(a, w);
    }
  };
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      const auto a = f[e], b = f[(e + 1) % 3];
      link(a, b, distance(mesh.vertices[a], mesh.vertices[b]));
    }
  std::map<Point3, std::uint32_t> first;
  for (std::uint32_t v = 0; v < n; ++v) {
    auto [it, inserted] = first.emplace(mesh.vertices[v], v);
    if (!inserted) link(v, it->second, 0.0);
  }
  return {std::move(adj)};
}

std::vector<double> geodesic_distances(const Mesh& mesh, std::size_t source) {
  const auto graph = edge_graph(mesh);
  const std::size_t n = mesh.vertices.size();
  if (source >= n) throw ValidationError("geodesic_distances: source out of range");
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.push({0.0, static_cast<std::uint32_t>(source)});
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (const auto& [u, w] : graph.adjacency[v])
      if (d + w < dist[u]) {
        dist[u] = d + w;
        queue.push({dist[u], u});
      }
  }
  return dist;
}

NeighborIndex geodesic_knn(const Mesh& mesh, std::size_t k) {
  const std::size_t n = mesh.vertices.size();
  check_k(k, n);
  const auto graph = edge_graph(mesh);
  NeighborIndex out{k, std::vector<std::uint32_t>(n * k), Metric::geodesic};

  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> touched;
  std::vector<Candidate> settled;
  for (std::size_t s = 0; s < n; ++s) {
    // Dijkstra truncated once k non-source vertices are settled and the next
    // frontier distance exceeds the k-th one (so equal-distance ties are all seen).
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> queue;
    settled.clear();
    dist[s] = 0.0;
    touched.push_back(static_cast<std::uint32_t>(s));
    queue.push({0.0, static_cast<std::uint32_t>(s)});
    while (!queue.empty()) {
      const Candidate top = queue.top();
      if (settled.size() >= k && top.dist > settled[k - 1].dist) break;
      queue.pop();
      if (top.dist > dist[top.index]) continue;
      if (top.index != s) {
        if (std::any_of(settled.begin(), settled.end(), [&](const Candidate& c) { return c.index == top.index; }))
          continue;
        settled.push_back(top);
        std::sort(settled.begin(), settled.end());
      }
      for (const auto& [u, w] : graph.adjacency[top.index]) {
        const double nd = top.dist + w;
        if (nd < dist[u]) {
          if (std::isinf(dist[u])) touched.push_back(u);
          dist[u] = nd;
          queue.push({nd, u});
        }
      }
    }
    if (settled.size() < k) {
      // Component too small: rank outside vertices by straight-line distance.
      std::vector<Candidate> outside;
      for (std::size_t j = 0; j < n; ++j)
        if (j != s && std::isinf(dist[j]))
          outside.push_back({distance(mesh.vertices[s], mesh.vertices[j]), static_cast<std::uint32_t>(j)});
      std::sort(outside.begin(), outside.end());
      for (std::size_t q = 0; settled.size() < k; ++q) settled.push_back(outside[q]);
    }
    for (std::size_t q = 0; q < k; ++q) out.indices[s * k + q] = settled[q].index;
    for (auto v : touched) dist[v] = std::numeric_limits<double>::infinity();
    touched.clear();
  }
  return out;
}

}  // namespace meshssm::geometry

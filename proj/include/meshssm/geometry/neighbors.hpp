#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "meshssm/geometry/mesh.hpp"

namespace meshssm::geometry {

enum class Metric { euclidean, geodesic, feature };

std::string_view metric_name(Metric metric);

// k neighbor indices per point, row-major; never contains the point itself.
struct NeighborIndex {
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;
  Metric metric = Metric::euclidean;

  std::size_t point_count() const { return k == 0 ? 0 : indices.size() / k; }
  std::span<const std::uint32_t> row(std::size_t i) const { return {indices.data() + i * k, k}; }
};

// Exact k nearest rows of a row-major n×dim matrix, self excluded, ties by
// lower index. Throws ValidationError unless 1 ≤ k < n.
NeighborIndex knn(std::span<const double> rows, std::size_t n, std::size_t dim, std::size_t k,
                  Metric metric = Metric::feature);
NeighborIndex knn(const PointSet& points, std::size_t k);

// Weighted edge graph of a mesh: face edges with Euclidean length, plus
// zero-length edges joining vertices with identical coordinates (padding
// copies).
struct EdgeGraph {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adjacency;
};
EdgeGraph edge_graph(const Mesh& mesh);

// Shortest-path distance from `source` to every vertex; +inf when unreachable.
std::vector<double> geodesic_distances(const Mesh& mesh, std::size_t source);

// k nearest vertices by shortest-path distance over the edge graph, ties by
// lower index. When a vertex's component has fewer than k other vertices the
// remaining slots are filled with the Euclidean-nearest vertices outside it.
NeighborIndex geodesic_knn(const Mesh& mesh, std::size_t k);

}  // namespace meshssm::geometry

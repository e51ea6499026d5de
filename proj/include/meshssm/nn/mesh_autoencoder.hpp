#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meshssm/geometry/mesh.hpp"
#include "meshssm/geometry/neighbors.hpp"
#include "meshssm/nn/layers.hpp"

namespace meshssm::nn {

struct MeshAEConfig {
  std::size_t vertex_count = 0;
  std::size_t k = 8;
  std::vector<std::size_t> edge_widths{64, 64, 128};
  std::size_t head_hidden = 128;
  std::vector<std::size_t> decoder_widths{256, 256};
  std::size_t latent_dim = 32;
  double slope = 0.2;

  void validate() const;
};

// Row indices of the first-layer (geodesic) neighbors of `batch` stacked
// meshes, offset so that mesh b addresses rows [b·n, (b+1)·n).
std::vector<std::uint32_t> stack_neighbors(std::span<const geometry::NeighborIndex* const> per_mesh,
                                           std::size_t vertex_count);

nd::Tensor vertices_tensor(const geometry::Mesh& mesh);

// Mesh autoencoder: EdgeConv encoder to a latent code z^m, and a fully
// connected decoder back to the n ordered input vertices.
//
// The first EdgeConv layer uses the supplied (geodesic) neighbors; later
// layers recompute k-NN in their input feature space, separately per mesh.
// Pooling concatenates the per-mesh max and mean over points.
class MeshAutoencoder {
 public:
  MeshAutoencoder() = default;
  MeshAutoencoder(const MeshAEConfig& config, std::uint64_t seed);

  const MeshAEConfig& config() const { return config_; }

  // vertices is [(B·n)×3]; neighbors are stacked first-layer indices
  // (B·n·k entries). Returns z^m as [B×L].
  nd::Tensor encode(const nd::Tensor& vertices, std::span<const std::uint32_t> neighbors, std::size_t batch,
                    nd::Mode mode);
  // Geodesic neighbors computed from the mesh itself.
  nd::Tensor encode(const geometry::Mesh& mesh, nd::Mode mode);
  // z is [B×L]; returns [(B·n)×3].
  nd::Tensor decode(const nd::Tensor& z) const;

  std::vector<nd::Tensor> parameters() const;
  void save(Archive& archive, const std::string& prefix) const;
  void load(const Archive& archive, const std::string& prefix);

  std::vector<EdgeConv>& edge_layers() { return edge_layers_; }
  const std::vector<EdgeConv>& edge_layers() const { return edge_layers_; }
  std::vector<Linear>& head() { return head_; }
  std::vector<Linear>& decoder() { return decoder_; }

 private:
  MeshAEConfig config_;
  std::vector<EdgeConv> edge_layers_;
  std::vector<Linear> head_;
  std::vector<Linear> decoder_;
};

void write_config(Archive& archive, const std::string& prefix, const MeshAEConfig& config);
MeshAEConfig read_mesh_ae_config(const Archive& archive, const std::string& prefix);

}  // namespace meshssm::nn

#include "meshssm/nn/mesh_autoencoder.hpp"

#include "meshssm/error.hpp"
#include "meshssm/nd/ops.hpp"

namespace meshssm::nn {

void MeshAEConfig::validate() const {
  if (vertex_count < 2) throw ValidationError("mesh autoencoder: vertex_count must be at least 2");
  if (k == 0 || k >= vertex_count) throw ValidationError("mesh autoencoder: k must satisfy 1 <= k < vertex_count");
  if (edge_widths.empty()) throw ValidationError("mesh autoencoder: at least one EdgeConv layer is required");
  for (auto w : edge_widths)
    if (w == 0) throw ValidationError("mesh autoencoder: EdgeConv widths must be positive");
  for (auto w : decoder_widths)
    if (w == 0) throw ValidationError("mesh autoencoder: decoder widths must be positive");
  if (head_hidden == 0 || latent_dim == 0) throw ValidationError("mesh autoencoder: head and latent widths must be positive");
  if (!(slope >= 0.0)) throw ValidationError("mesh autoencoder: leaky ReLU slope must be non-negative");
}

std::vector<std::uint32_t> stack_neighbors(std::span<const geometry::NeighborIndex* const> per_mesh,
                                           std::size_t vertex_count) {
  std::vector<std::uint32_t> out;
  if (per_mesh.empty()) return out;
  const std::size_t k = per_mesh.front()->k;
  out.reserve(per_mesh.size() * vertex_count * k);
  for (std::size_t b = 0; b < per_mesh.size(); ++b) {
    const auto& index = *per_mesh[b];
    if (index.k != k || index.point_count() != vertex_count)
      throw ValidationError("neighbor index " + std::to_string(b) + " does not match " + std::to_string(vertex_count) +
                            " points with k=" + std::to_string(k));
    const auto offset = static_cast<std::uint32_t>(b * vertex_count);
    for (auto j : index.indices) out.push_back(j + offset);
  }
  return out;
}

nd::Tensor vertices_tensor(const geometry::Mesh& mesh) {
  return nd::Tensor::from({mesh.vertex_count(), 3}, mesh.vertex_set().flat());
}

MeshAutoencoder::MeshAutoencoder(const MeshAEConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nd::Rng rng(seed);
  std::size_t width = 3;
  for (auto w : config_.edge_widths) {
    edge_layers_.emplace_back(width, w, rng);
    width = w;
  }
  head_.emplace_back(2 * width, config_.head_hidden, rng);
  head_.emplace_back(config_.head_hidden, config_.latent_dim, rng);
  width = config_.latent_dim;
  for (auto w : config_.decoder_widths) {
    decoder_.emplace_back(width, w, rng);
    width = w;
  }
  decoder_.emplace_back(width, 3 * config_.vertex_count, rng);
}

nd::Tensor MeshAutoencoder::encode(const nd::Tensor& vertices, std::span<const std::uint32_t> neighbors,
                                   std::size_t batch, nd::Mode mode) {
  const std::size_t n = config_.vertex_count;
  const std::size_t k = config_.k;
  if (batch == 0 || vertices.dim() != 2 || vertices.cols() != 3 || vertices.rows() != batch * n)
    throw ValidationError("mesh encoder expects " + std::to_string(batch) + " meshes of " + std::to_string(n) +
                          " vertices, got " + nd::shape_string(vertices.shape()));
  nd::Tensor h = vertices;
  std::vector<std::uint32_t> dynamic;
  for (std::size_t layer = 0; layer < edge_layers_.size(); ++layer) {
    std::span<const std::uint32_t> index = neighbors;
    if (layer > 0) {
      dynamic.clear();
      dynamic.reserve(batch * n * k);
      const auto rows = h.data();
      const std::size_t d = h.cols();
      for (std::size_t b = 0; b < batch; ++b) {
        auto nb = geometry::knn(rows.subspan(b * n * d, n * d), n, d, k, geometry::Metric::feature);
        const auto offset = static_cast<std::uint32_t>(b * n);
        for (auto j : nb.indices) dynamic.push_back(j + offset);
      }
      index = dynamic;
    }
    h = edge_layers_[layer].forward(h, index, k, mode, config_.slope);
  }
  auto pooled = nd::concat_cols({nd::segment_max(h, n), nd::segment_mean(h, n)});
  auto z = nd::leaky_relu(head_[0](pooled), config_.slope);
  return head_[1](z);
}

nd::Tensor MeshAutoencoder::encode(const geometry::Mesh& mesh, nd::Mode mode) {
  if (mesh.vertex_count() != config_.vertex_count)
    throw ValidationError("mesh has " + std::to_string(mesh.vertex_count()) + " vertices, model expects " +
                          std::to_string(config_.vertex_count));
  const auto index = geometry::geodesic_knn(mesh, config_.k);
  return encode(vertices_tensor(mesh), index.indices, 1, mode);
}

nd::Tensor MeshAutoencoder::decode(const nd::Tensor& z) const {
  if (z.dim() != 2 || z.cols() != config_.latent_dim)
    throw DimensionError("mesh decoder expects [B x " + std::to_string(config_.latent_dim) + "] latents, got " +
                         nd::shape_string(z.shape()));
  nd::Tensor h = z;
  for (std::size_t i = 0; i + 1 < decoder_.size(); ++i) h = nd::leaky_relu(decoder_[i](h), config_.slope);
  h = decoder_.back()(h);
  return nd::reshape(h, {z.rows() * config_.vertex_count, 3});
}

std::vector<nd::Tensor> MeshAutoencoder::parameters() const {
  std::vector<nd::Tensor> out;
  for (const auto& l : edge_layers_) append_parameters(out, l);
  for (const auto& l : head_) append_parameters(out, l);
  for (const auto& l : decoder_) append_parameters(out, l);
  return out;
}

void MeshAutoencoder::save(Archive& archive, const std::string& prefix) const {
  write_config(archive, prefix, config_);
  for (std::size_t i = 0; i < edge_layers_.size(); ++i)
    save_layer(archive, prefix + ".edge" + std::to_string(i), edge_layers_[i]);
  for (std::size_t i = 0; i < head_.size(); ++i) save_layer(archive, prefix + ".head" + std::to_string(i), head_[i]);
  for (std::size_t i = 0; i < decoder_.size(); ++i)
    save_layer(archive, prefix + ".decoder" + std::to_string(i), decoder_[i]);
}

void MeshAutoencoder::load(const Archive& archive, const std::string& prefix) {
  *this = MeshAutoencoder(read_mesh_ae_config(archive, prefix), 0);
  for (std::size_t i = 0; i < edge_layers_.size(); ++i)
    load_layer(archive, prefix + ".edge" + std::to_string(i), edge_layers_[i]);
  for (std::size_t i = 0; i < head_.size(); ++i) load_layer(archive, prefix + ".head" + std::to_string(i), head_[i]);
  for (std::size_t i = 0; i < decoder_.size(); ++i)
    load_layer(archive, prefix + ".decoder" + std::to_string(i), decoder_[i]);
}

void write_config(Archive& archive, const std::string& prefix, const MeshAEConfig& config) {
  archive.put_text(prefix + ".config", format_config({
                                           {"vertex_count", std::to_string(config.vertex_count)},
                                           {"k", std::to_string(config.k)},
                                           {"edge_widths", format_widths(config.edge_widths)},
                                           {"head_hidden", std::to_string(config.head_hidden)},
                                           {"decoder_widths", format_widths(config.decoder_widths)},
                                           {"latent_dim", std::to_string(config.latent_dim)},
                                           {"slope", format_real(config.slope)},
                                       }));
}

MeshAEConfig read_mesh_ae_config(const Archive& archive, const std::string& prefix) {
  const auto kv = parse_config(archive.text(prefix + ".config"));
  MeshAEConfig config;
  config.vertex_count = config_size(kv, "vertex_count");
  config.k = config_size(kv, "k");
  config.edge_widths = config_widths(kv, "edge_widths");
  config.head_hidden = config_size(kv, "head_hidden");
  config.decoder_widths = config_widths(kv, "decoder_widths");
  config.latent_dim = config_size(kv, "latent_dim");
  config.slope = config_real(kv, "slope");
  return config;
}

}  // namespace meshssm::nn

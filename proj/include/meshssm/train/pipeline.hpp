#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "meshssm/geometry/mesh.hpp"
#include "meshssm/nd/random.hpp"
#include "meshssm/nn/archive.hpp"
#include "meshssm/nn/imnet.hpp"
#include "meshssm/nn/mesh_autoencoder.hpp"
#include "meshssm/nn/spvae.hpp"

namespace meshssm::train {

// Trained networks plus the working template.
struct Pipeline {
  nn::MeshAutoencoder mesh_ae;
  nn::IMNet imnet;
  nn::SPVAE spvae;
  geometry::PointSet template_points;

  std::size_t vertex_count() const { return mesh_ae.config().vertex_count; }
  std::size_t point_count() const { return template_points.size(); }

  std::vector<nd::Tensor> correspondence_parameters() const;
  std::vector<nd::Tensor> spvae_parameters() const;

  void save(nn::Archive& archive) const;
  static Pipeline load(const nn::Archive& archive);
  void save(const std::filesystem::path& path) const;
  static Pipeline load(const std::filesystem::path& path);
};

nd::Tensor points_tensor(const geometry::PointSet& points);
geometry::PointSet to_point_set(const nd::Tensor& xyz);

// FNV-1a over parameter values; the M-AE hash also covers batch-norm running
// statistics.
std::uint64_t correspondence_hash(const Pipeline& pipeline);
std::uint64_t spvae_hash(const Pipeline& pipeline);

// Correspondences for one mesh: geodesic k-NN, encoder in eval mode, IM-NET on
// the template. One forward pass, no gradient recording, parameters untouched.
geometry::PointSet infer(Pipeline& pipeline, const geometry::Mesh& mesh);
std::vector<geometry::PointSet> infer(Pipeline& pipeline, std::span<const geometry::Mesh> meshes);

// Mean of `count` decoded prior samples z ~ N(0, I), per correspondence index.
geometry::PointSet update_template(const nn::SPVAE& spvae, std::size_t count, nd::Rng& rng);

// Pads every mesh to the largest vertex count by repeating vertices.
std::vector<geometry::Mesh> pad_to_common(std::span<const geometry::Mesh> meshes, std::uint64_t seed);

}  // namespace meshssm::train

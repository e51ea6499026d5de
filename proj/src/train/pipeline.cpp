#include "meshssm/train/pipeline.hpp"

#include <algorithm>

#include "meshssm/error.hpp"
#include "meshssm/geometry/neighbors.hpp"
#include "meshssm/nd/ops.hpp"

namespace meshssm::train {
namespace {

std::uint64_t hash_values(std::span<const double> values, std::uint64_t hash) {
  return nn::fnv1a({reinterpret_cast<const unsigned char*>(values.data()), values.size() * sizeof(double)}, hash);
}

std::uint64_t hash_tensors(const std::vector<nd::Tensor>& tensors, std::uint64_t hash = 1469598103934665603ULL) {
  for (const auto& t : tensors) hash = hash_values(t.data(), hash);
  return hash;
}

}  // namespace

std::vector<nd::Tensor> Pipeline::correspondence_parameters() const {
  auto params = mesh_ae.parameters();
  for (auto& p : imnet.parameters()) params.push_back(p);
  return params;
}

std::vector<nd::Tensor> Pipeline::spvae_parameters() const { return spvae.parameters(); }

void Pipeline::save(nn::Archive& archive) const {
  mesh_ae.save(archive, "mesh_ae");
  imnet.save(archive, "imnet");
  spvae.save(archive, "spvae");
  archive.put_tensor("template", {template_points.size(), 3}, template_points.flat());
}

Pipeline Pipeline::load(const nn::Archive& archive) {
  Pipeline p;
  p.mesh_ae.load(archive, "mesh_ae");
  p.imnet.load(archive, "imnet");
  p.spvae.load(archive, "spvae");
  const auto& t = archive.tensor("template");
  if (t.shape.size() != 2 || t.shape[1] != 3) throw ValidationError("archive template is not an [M x 3] tensor");
  if (t.shape[0] != p.spvae.config().points)
    throw ValidationError("archive template has " + std::to_string(t.shape[0]) + " points, SP-VAE expects " +
                          std::to_string(p.spvae.config().points));
  if (p.imnet.config().latent_dim != p.mesh_ae.config().latent_dim)
    throw ValidationError("archive IM-NET latent size does not match the mesh encoder");
  p.template_points = geometry::PointSet::from_flat(t.values);
  return p;
}

void Pipeline::save(const std::filesystem::path& path) const {
  nn::Archive archive;
  save(archive);
  archive.save(path);
}

Pipeline Pipeline::load(const std::filesystem::path& path) { return load(nn::Archive::load(path)); }

nd::Tensor points_tensor(const geometry::PointSet& points) {
  return nd::Tensor::from({points.size(), 3}, points.flat());
}

geometry::PointSet to_point_set(const nd::Tensor& xyz) {
  if (xyz.dim() != 2 || xyz.cols() != 3) throw DimensionError("expected an [m x 3] tensor, got " + nd::shape_string(xyz.shape()));
  return geometry::PointSet::from_flat(xyz.data());
}

std::uint64_t correspondence_hash(const Pipeline& pipeline) {
  auto hash = hash_tensors(pipeline.correspondence_parameters());
  for (const auto& layer : pipeline.mesh_ae.edge_layers()) {
    hash = hash_values(layer.norm.running_mean, hash);
    hash = hash_values(layer.norm.running_var, hash);
  }
  return hash;
}

std::uint64_t spvae_hash(const Pipeline& pipeline) { return hash_tensors(pipeline.spvae_parameters()); }

geometry::PointSet infer(Pipeline& pipeline, const geometry::Mesh& mesh) {
  if (mesh.vertex_count() != pipeline.vertex_count())
    throw ValidationError("mesh has " + std::to_string(mesh.vertex_count()) + " vertices, model expects " +
                          std::to_string(pipeline.vertex_count()) + " (pad meshes to the training count)");
  nd::NoGradGuard no_grad;
  const auto z = pipeline.mesh_ae.encode(mesh, nd::Mode::eval);
  return to_point_set(pipeline.imnet.deform(z, points_tensor(pipeline.template_points)));
}

std::vector<geometry::PointSet> infer(Pipeline& pipeline, std::span<const geometry::Mesh> meshes) {
  std::vector<geometry::PointSet> out;
  out.reserve(meshes.size());
  for (const auto& mesh : meshes) out.push_back(infer(pipeline, mesh));
  return out;
}

geometry::PointSet update_template(const nn::SPVAE& spvae, std::size_t count, nd::Rng& rng) {
  if (count == 0) throw ValidationError("update_template: sample count must be positive");
  const std::size_t latent = spvae.config().latent_dim;
  const std::size_t m = spvae.config().points;
  std::vector<double> z(count * latent);
  for (auto& v : z) v = rng.normal();
  nd::NoGradGuard no_grad;
  const auto decoded = spvae.decode(nd::Tensor::from({count, latent}, std::move(z)));
  const auto values = decoded.data();
  // Running mean: exact when every decoded sample is the same.
  std::vector<double> mean(values.begin(), values.begin() + 3 * m);
  for (std::size_t s = 1; s < count; ++s)
    for (std::size_t i = 0; i < 3 * m; ++i) mean[i] += (values[s * 3 * m + i] - mean[i]) / static_cast<double>(s + 1);
  return geometry::PointSet::from_flat(mean);
}

std::vector<geometry::Mesh> pad_to_common(std::span<const geometry::Mesh> meshes, std::uint64_t seed) {
  std::size_t target = 0;
  for (const auto& m : meshes) target = std::max(target, m.vertex_count());
  std::vector<geometry::Mesh> out;
  out.reserve(meshes.size());
  for (std::size_t i = 0; i < meshes.size(); ++i) out.push_back(geometry::pad_vertices(meshes[i], target, seed + i));
  return out;
}

}  // namespace meshssm::train

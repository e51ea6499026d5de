#include "meshssm/nn/imnet.hpp"

#include <algorithm>

#include "meshssm/error.hpp"
#include "meshssm/nd/ops.hpp"

namespace meshssm::nn {

void IMNetConfig::validate() const {
  if (latent_dim == 0) throw ValidationError("IM-NET: latent_dim must be positive");
  if (hidden.empty()) throw ValidationError("IM-NET: at least one hidden layer is required");
  for (auto w : hidden)
    if (w == 0) throw ValidationError("IM-NET: hidden widths must be positive");
  for (auto s : skip_layers)
    if (s == 0 || s > hidden.size())
      throw ValidationError("IM-NET: skip layer " + std::to_string(s) + " outside 1.." + std::to_string(hidden.size()));
  if (!(slope >= 0.0)) throw ValidationError("IM-NET: leaky ReLU slope must be non-negative");
}

bool IMNet::has_skip(std::size_t layer) const {
  return std::find(config_.skip_layers.begin(), config_.skip_layers.end(), layer) != config_.skip_layers.end();
}

IMNet::IMNet(const IMNetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nd::Rng rng(seed);
  const std::size_t raw = config_.input_width();
  std::size_t width = raw;
  for (std::size_t i = 0; i <= config_.hidden.size(); ++i) {
    const std::size_t in = width + (i > 0 && has_skip(i) ? raw : 0);
    const std::size_t out = i < config_.hidden.size() ? config_.hidden[i] : 3;
    layers_.emplace_back(in, out, rng);
    width = out;
  }
  const std::size_t last = config_.hidden.size();
  if (has_skip(last)) {
    auto& out = layers_.back();
    auto w = out.weight.mutable_data();
    for (auto& v : w) v *= 0.1;
    // The raw input block is last; its final three rows carry the point.
    const std::size_t first_xyz_row = out.in_features() - 3;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) w[(first_xyz_row + r) * 3 + c] = r == c ? 1.0 : 0.0;
    for (auto& v : out.bias.mutable_data()) v = 0.0;
  }
}

nd::Tensor IMNet::deform(const nd::Tensor& z, const nd::Tensor& template_points) const {
  if (z.dim() != 2 || z.cols() != config_.latent_dim)
    throw DimensionError("IM-NET expects [B x " + std::to_string(config_.latent_dim) + "] latents, got " +
                         nd::shape_string(z.shape()));
  if (template_points.dim() != 2 || template_points.cols() != 3)
    throw DimensionError("IM-NET expects an [M x 3] template, got " + nd::shape_string(template_points.shape()));
  const std::size_t m = template_points.rows();
  const auto input = nd::concat_cols({nd::repeat_rows(z, m), nd::tile_rows(template_points, z.rows())});
  nd::Tensor h = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i > 0 && has_skip(i)) h = nd::concat_cols({h, input});
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = nd::leaky_relu(h, config_.slope);
  }
  return h;
}

std::vector<nd::Tensor> IMNet::parameters() const {
  std::vector<nd::Tensor> out;
  for (const auto& l : layers_) append_parameters(out, l);
  return out;
}

void IMNet::save(Archive& archive, const std::string& prefix) const {
  archive.put_text(prefix + ".config", format_config({
                                           {"latent_dim", std::to_string(config_.latent_dim)},
                                           {"hidden", format_widths(config_.hidden)},
                                           {"skip_layers", format_widths(config_.skip_layers)},
                                           {"slope", format_real(config_.slope)},
                                       }));
  for (std::size_t i = 0; i < layers_.size(); ++i) save_layer(archive, prefix + ".layer" + std::to_string(i), layers_[i]);
}

void IMNet::load(const Archive& archive, const std::string& prefix) {
  const auto kv = parse_config(archive.text(prefix + ".config"));
  IMNetConfig config;
  config.latent_dim = config_size(kv, "latent_dim");
  config.hidden = config_widths(kv, "hidden");
  config.skip_layers = config_widths(kv, "skip_layers");
  config.slope = config_real(kv, "slope");
  *this = IMNet(config, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) load_layer(archive, prefix + ".layer" + std::to_string(i), layers_[i]);
}

}  // namespace meshssm::nn

#include "meshssm/nn/spvae.hpp"

#include "meshssm/error.hpp"
#include "meshssm/nd/ops.hpp"

namespace meshssm::nn {

void SPVAEConfig::validate() const {
  if (points == 0 || latent_dim == 0) throw ValidationError("SP-VAE: points and latent_dim must be positive");
  for (auto w : encoder_widths)
    if (w == 0) throw ValidationError("SP-VAE: encoder widths must be positive");
  for (auto w : decoder_widths)
    if (w == 0) throw ValidationError("SP-VAE: decoder widths must be positive");
  if (!(log_var_min < log_var_max)) throw ValidationError("SP-VAE: log-variance clamp range is empty");
  if (!(slope >= 0.0)) throw ValidationError("SP-VAE: leaky ReLU slope must be non-negative");
}

SPVAE::SPVAE(const SPVAEConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nd::Rng rng(seed);
  std::size_t width = 3 * config_.points;
  for (auto w : config_.encoder_widths) {
    encoder_.emplace_back(width, w, rng);
    width = w;
  }
  mu_head_ = Linear(width, config_.latent_dim, rng);
  log_var_head_ = Linear(width, config_.latent_dim, rng);
  width = config_.latent_dim;
  for (auto w : config_.decoder_widths) {
    decoder_.emplace_back(width, w, rng);
    width = w;
  }
  decoder_.emplace_back(width, 3 * config_.points, rng);
}

Posterior SPVAE::encode(const nd::Tensor& c) const {
  const std::size_t m = config_.points;
  if (c.dim() != 2 || c.cols() != 3 || c.rows() == 0 || c.rows() % m != 0)
    throw ValidationError("SP-VAE expects sets of " + std::to_string(m) + " points, got " +
                          nd::shape_string(c.shape()));
  nd::Tensor h = nd::reshape(c, {c.rows() / m, 3 * m});
  for (const auto& layer : encoder_) h = nd::leaky_relu(layer(h), config_.slope);
  return Posterior{mu_head_(h), nd::clamp(log_var_head_(h), config_.log_var_min, config_.log_var_max)};
}

nd::Tensor SPVAE::decode(const nd::Tensor& z) const {
  if (z.dim() != 2 || z.cols() != config_.latent_dim)
    throw DimensionError("SP-VAE decoder expects [B x " + std::to_string(config_.latent_dim) + "] latents, got " +
                         nd::shape_string(z.shape()));
  nd::Tensor h = z;
  for (std::size_t i = 0; i + 1 < decoder_.size(); ++i) h = nd::leaky_relu(decoder_[i](h), config_.slope);
  h = decoder_.back()(h);
  return nd::reshape(h, {z.rows() * config_.points, 3});
}

std::vector<nd::Tensor> SPVAE::parameters() const {
  std::vector<nd::Tensor> out;
  for (const auto& l : encoder_) append_parameters(out, l);
  append_parameters(out, mu_head_);
  append_parameters(out, log_var_head_);
  for (const auto& l : decoder_) append_parameters(out, l);
  return out;
}

void SPVAE::save(Archive& archive, const std::string& prefix) const {
  archive.put_text(prefix + ".config", format_config({
                                           {"points", std::to_string(config_.points)},
                                           {"latent_dim", std::to_string(config_.latent_dim)},
                                           {"encoder_widths", format_widths(config_.encoder_widths)},
                                           {"decoder_widths", format_widths(config_.decoder_widths)},
                                           {"log_var_min", format_real(config_.log_var_min)},
                                           {"log_var_max", format_real(config_.log_var_max)},
                                           {"slope", format_real(config_.slope)},
                                       }));
  for (std::size_t i = 0; i < encoder_.size(); ++i) save_layer(archive, prefix + ".encoder" + std::to_string(i), encoder_[i]);
  save_layer(archive, prefix + ".mu", mu_head_);
  save_layer(archive, prefix + ".log_var", log_var_head_);
  for (std::size_t i = 0; i < decoder_.size(); ++i) save_layer(archive, prefix + ".decoder" + std::to_string(i), decoder_[i]);
}

void SPVAE::load(const Archive& archive, const std::string& prefix) {
  const auto kv = parse_config(archive.text(prefix + ".config"));
  SPVAEConfig config;
  config.points = config_size(kv, "points");
  config.latent_dim = config_size(kv, "latent_dim");
  config.encoder_widths = config_widths(kv, "encoder_widths");
  config.decoder_widths = config_widths(kv, "decoder_widths");
  config.log_var_min = config_real(kv, "log_var_min");
  config.log_var_max = config_real(kv, "log_var_max");
  config.slope = config_real(kv, "slope");
  *this = SPVAE(config, 0);
  for (std::size_t i = 0; i < encoder_.size(); ++i) load_layer(archive, prefix + ".encoder" + std::to_string(i), encoder_[i]);
  load_layer(archive, prefix + ".mu", mu_head_);
  load_layer(archive, prefix + ".log_var", log_var_head_);
  for (std::size_t i = 0; i < decoder_.size(); ++i) load_layer(archive, prefix + ".decoder" + std::to_string(i), decoder_[i]);
}

nd::Tensor reparameterize(const nd::Tensor& mu, const nd::Tensor& log_var, nd::Rng& rng) {
  if (mu.shape() != log_var.shape())
    throw DimensionError("reparameterize: mu " + nd::shape_string(mu.shape()) + " vs log_var " +
                         nd::shape_string(log_var.shape()));
  std::vector<double> eps(mu.size());
  for (auto& e : eps) e = rng.normal();
  const auto noise = nd::Tensor::from(mu.shape(), std::move(eps));
  return nd::add(mu, nd::mul(nd::exp(nd::scale(log_var, 0.5)), noise));
}

}  // namespace meshssm::nn

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "meshssm/nd/random.hpp"
#include "meshssm/nn/layers.hpp"

namespace meshssm::nn {

struct SPVAEConfig {
  std::size_t points = 128;
  std::size_t latent_dim = 32;
  std::vector<std::size_t> encoder_widths{256, 128};
  std::vector<std::size_t> decoder_widths{128, 256};
  double log_var_min = -10.0;
  double log_var_max = 10.0;
  double slope = 0.2;

  void validate() const;
};

struct Posterior {
  nd::Tensor mu;       // [B×L]
  nd::Tensor log_var;  // [B×L], clamped
};

// Order-preserving VAE over flattened correspondence sets.
class SPVAE {
 public:
  SPVAE() = default;
  SPVAE(const SPVAEConfig& config, std::uint64_t seed);

  const SPVAEConfig& config() const { return config_; }

  // c is [(B·M)×3], B sets stacked in point order.
  Posterior encode(const nd::Tensor& c) const;
  // z is [B×L]; returns [(B·M)×3].
  nd::Tensor decode(const nd::Tensor& z) const;

  std::vector<nd::Tensor> parameters() const;
  void save(Archive& archive, const std::string& prefix) const;
  void load(const Archive& archive, const std::string& prefix);

  std::vector<Linear>& encoder() { return encoder_; }
  std::vector<Linear>& decoder() { return decoder_; }
  Linear& mu_head() { return mu_head_; }
  Linear& log_var_head() { return log_var_head_; }

 private:
  SPVAEConfig config_;
  std::vector<Linear> encoder_;
  Linear mu_head_;
  Linear log_var_head_;
  std::vector<Linear> decoder_;
};

// z = μ + exp(½·log σ²) ⊙ ε with ε ~ N(0, I) drawn from `rng`.
nd::Tensor reparameterize(const nd::Tensor& mu, const nd::Tensor& log_var, nd::Rng& rng);

}  // namespace meshssm::nn

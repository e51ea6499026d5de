#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "meshssm/nn/layers.hpp"

namespace meshssm::nn {

struct IMNetConfig {
  std::size_t latent_dim = 32;
  std::vector<std::size_t> hidden{128, 128, 64};
  // Layer indices (1..hidden.size(), where hidden.size() is the output layer)
  // whose input is concatenated with the raw latent + template point.
  std::vector<std::size_t> skip_layers{1, 2, 3};
  double slope = 0.2;

  std::size_t input_width() const { return latent_dim + 3; }
  void validate() const;
};

// Per-point implicit deformation network: (z, template point) → displaced
// point. When the output layer has a skip input, its weights start from the
// identity on the point coordinates so the untrained network returns roughly
// the template itself.
class IMNet {
 public:
  IMNet() = default;
  IMNet(const IMNetConfig& config, std::uint64_t seed);

  const IMNetConfig& config() const { return config_; }

  // z is [B×L], template_points [M×3]; returns [(B·M)×3] with sample b in
  // rows [b·M, (b+1)·M) in template order.
  nd::Tensor deform(const nd::Tensor& z, const nd::Tensor& template_points) const;

  std::vector<nd::Tensor> parameters() const;
  void save(Archive& archive, const std::string& prefix) const;
  void load(const Archive& archive, const std::string& prefix);

  std::vector<Linear>& layers() { return layers_; }

 private:
  bool has_skip(std::size_t layer) const;

  IMNetConfig config_;
  std::vector<Linear> layers_;
};

}  // namespace meshssm::nn

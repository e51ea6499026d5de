#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "meshssm/nn/imnet.hpp"
#include "meshssm/nn/mesh_autoencoder.hpp"
#include "meshssm/nn/spvae.hpp"

namespace meshssm::train {

// Every field is a config-file key of the same name (flat `key = value`
// lines, `#` comments; lists are comma-separated).
struct TrainConfig {
  std::size_t epochs = 1000;
  std::size_t batch_size = 10;
  double lr_mae = 0.01;
  double lr_spvae = 0.0009;
  std::size_t lr_step_interval = 200;
  double lr_step_factor = 0.5;
  double alpha_start = 0.01;
  double alpha_end = 1.0;
  std::size_t alpha_ramp_epochs = 100;
  double gamma = 0.01;
  double spvae_beta = 1.0;
  std::size_t burn_in_epochs = 100;
  std::size_t template_refresh_interval = 10;
  std::size_t prior_sample_count = 500;

  std::size_t latent_dim = 32;
  std::size_t spvae_latent_dim = 32;
  std::size_t k = 8;
  std::vector<std::size_t> edge_widths{64, 64, 128};
  std::size_t head_hidden = 128;
  std::vector<std::size_t> decoder_widths{256, 256};
  std::vector<std::size_t> imnet_hidden{128, 128, 64};
  std::vector<std::size_t> imnet_skip_layers{1, 2, 3};
  std::vector<std::size_t> spvae_encoder_widths{256, 128};
  std::vector<std::size_t> spvae_decoder_widths{128, 256};
  double slope = 0.2;

  std::uint64_t seed = 0;

  void validate() const;
  // α(epoch): linear from alpha_start at epoch 0 to alpha_end at
  // alpha_ramp_epochs, constant afterwards.
  double alpha(std::size_t epoch) const;

  nn::MeshAEConfig mesh_ae_config(std::size_t vertex_count) const;
  nn::IMNetConfig imnet_config() const;
  nn::SPVAEConfig spvae_config(std::size_t points) const;

  // Sets one field from its textual value; unknown keys are ValidationErrors.
  void set(const std::string& key, const std::string& value);
  static const std::vector<std::string>& keys();
  std::string get(const std::string& key) const;
  // All keys in declaration order, one `key = value` per line.
  std::string to_text() const;
};

TrainConfig parse_train_config(std::istream& in, const std::string& source_name = "<stream>");
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace meshssm::train

#include "meshssm/train/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "meshssm/error.hpp"
#include "meshssm/nn/layers.hpp"

namespace meshssm::train {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::size_t to_size(const std::string& key, const std::string& value) {
  std::vector<std::size_t> widths;
  try {
    widths = nn::parse_widths(value);
  } catch (const ParseError&) {
  }
  if (widths.size() != 1 || value.find(',') != std::string::npos)
    throw ValidationError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
  return widths[0];
}

double to_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v))
    throw ValidationError("config key '" + key + "' expects a finite number, got '" + value + "'");
  return v;
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& value) {
  try {
    return nn::parse_widths(value);
  } catch (const ParseError&) {
    throw ValidationError("config key '" + key + "' expects a comma-separated integer list, got '" + value + "'");
  }
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <class T>
Field size_field(T TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = static_cast<T>(to_size(k, v)); },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(double TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = to_real(k, v); },
          [member](const TrainConfig& c) { return nn::format_real(c.*member); }};
}

Field list_field(std::vector<std::size_t> TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = to_list(k, v); },
          [member](const TrainConfig& c) { return nn::format_widths(c.*member); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"epochs", size_field(&TrainConfig::epochs)},
      {"batch_size", size_field(&TrainConfig::batch_size)},
      {"lr_mae", real_field(&TrainConfig::lr_mae)},
      {"lr_spvae", real_field(&TrainConfig::lr_spvae)},
      {"lr_step_interval", size_field(&TrainConfig::lr_step_interval)},
      {"lr_step_factor", real_field(&TrainConfig::lr_step_factor)},
      {"alpha_start", real_field(&TrainConfig::alpha_start)},
      {"alpha_end", real_field(&TrainConfig::alpha_end)},
      {"alpha_ramp_epochs", size_field(&TrainConfig::alpha_ramp_epochs)},
      {"gamma", real_field(&TrainConfig::gamma)},
      {"spvae_beta", real_field(&TrainConfig::spvae_beta)},
      {"burn_in_epochs", size_field(&TrainConfig::burn_in_epochs)},
      {"template_refresh_interval", size_field(&TrainConfig::template_refresh_interval)},
      {"prior_sample_count", size_field(&TrainConfig::prior_sample_count)},
      {"latent_dim", size_field(&TrainConfig::latent_dim)},
      {"spvae_latent_dim", size_field(&TrainConfig::spvae_latent_dim)},
      {"k", size_field(&TrainConfig::k)},
      {"edge_widths", list_field(&TrainConfig::edge_widths)},
      {"head_hidden", size_field(&TrainConfig::head_hidden)},
      {"decoder_widths", list_field(&TrainConfig::decoder_widths)},
      {"imnet_hidden", list_field(&TrainConfig::imnet_hidden)},
      {"imnet_skip_layers", list_field(&TrainConfig::imnet_skip_layers)},
      {"spvae_encoder_widths", list_field(&TrainConfig::spvae_encoder_widths)},
      {"spvae_decoder_widths", list_field(&TrainConfig::spvae_decoder_widths)},
      {"slope", real_field(&TrainConfig::slope)},
      {"seed", size_field(&TrainConfig::seed)},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return f;
  throw ValidationError("unknown config key '" + key + "'");
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0)) throw ValidationError(std::string("config: ") + name + " must be positive");
  };
  positive("epochs", static_cast<double>(epochs));
  positive("batch_size", static_cast<double>(batch_size));
  positive("lr_mae", lr_mae);
  positive("lr_spvae", lr_spvae);
  positive("lr_step_interval", static_cast<double>(lr_step_interval));
  if (!(lr_step_factor > 0.0 && lr_step_factor <= 1.0)) throw ValidationError("config: lr_step_factor must lie in (0, 1]");
  if (alpha_start < 0.0 || alpha_end < alpha_start)
    throw ValidationError("config: alpha must ramp upward from a non-negative start");
  if (gamma < 0.0) throw ValidationError("config: gamma must be non-negative");
  if (spvae_beta < 0.0) throw ValidationError("config: spvae_beta must be non-negative");
  if (burn_in_epochs >= epochs) throw ValidationError("config: burn_in_epochs must be smaller than epochs");
  positive("template_refresh_interval", static_cast<double>(template_refresh_interval));
  positive("prior_sample_count", static_cast<double>(prior_sample_count));
  positive("latent_dim", static_cast<double>(latent_dim));
  positive("spvae_latent_dim", static_cast<double>(spvae_latent_dim));
  positive("k", static_cast<double>(k));
  if (slope < 0.0) throw ValidationError("config: slope must be non-negative");
  imnet_config().validate();
  spvae_config(1).validate();
}

double TrainConfig::alpha(std::size_t epoch) const {
  if (alpha_ramp_epochs == 0 || epoch >= alpha_ramp_epochs) return alpha_end;
  return alpha_start + (alpha_end - alpha_start) * static_cast<double>(epoch) / static_cast<double>(alpha_ramp_epochs);
}

nn::MeshAEConfig TrainConfig::mesh_ae_config(std::size_t vertex_count) const {
  nn::MeshAEConfig c;
  c.vertex_count = vertex_count;
  c.k = k;
  c.edge_widths = edge_widths;
  c.head_hidden = head_hidden;
  c.decoder_widths = decoder_widths;
  c.latent_dim = latent_dim;
  c.slope = slope;
  return c;
}

nn::IMNetConfig TrainConfig::imnet_config() const {
  nn::IMNetConfig c;
  c.latent_dim = latent_dim;
  c.hidden = imnet_hidden;
  c.skip_layers = imnet_skip_layers;
  c.slope = slope;
  return c;
}

nn::SPVAEConfig TrainConfig::spvae_config(std::size_t points) const {
  nn::SPVAEConfig c;
  c.points = points;
  c.latent_dim = spvae_latent_dim;
  c.encoder_widths = spvae_encoder_widths;
  c.decoder_widths = spvae_decoder_widths;
  c.slope = slope;
  return c;
}

void TrainConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, trim(value)); }

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

std::string TrainConfig::get(const std::string& key) const { return field(key).get(*this); }

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

TrainConfig parse_train_config(std::istream& in, const std::string& source_name) {
  TrainConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(source_name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_train_config(in, path.string());
}

}  // namespace meshssm::train

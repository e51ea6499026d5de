#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "meshssm/nd/ops.hpp"
#include "meshssm/nd/random.hpp"
#include "meshssm/nd/tensor.hpp"
#include "meshssm/nn/archive.hpp"

namespace meshssm::nn {

// Fully connected layer y = x·W + b with W stored [in × out].
// Kaiming-uniform fan-in initialization with negative slope √5 (the common
// default for fully connected layers): W, b ~ U(±1/√in).
struct Linear {
  nd::Tensor weight;
  nd::Tensor bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, nd::Rng& rng);

  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }
  nd::Tensor operator()(const nd::Tensor& x) const { return nd::linear(x, weight, bias); }
};

// EdgeConv block: edge MLP over concat(x_i, x_j − x_i), batch norm, leaky
// ReLU, then max over the k edges of each point.
struct EdgeConv {
  Linear edge;
  nd::BatchNorm norm;

  EdgeConv() = default;
  EdgeConv(std::size_t in, std::size_t out, nd::Rng& rng);

  std::size_t in_features() const { return edge.in_features() / 2; }
  std::size_t out_features() const { return edge.out_features(); }
  // neighbors holds k row indices into x for every row of x.
  nd::Tensor forward(const nd::Tensor& x, std::span<const std::uint32_t> neighbors, std::size_t k, nd::Mode mode,
                     double slope = 0.2);
};

// Parameter bookkeeping shared by the networks.
void append_parameters(std::vector<nd::Tensor>& out, const Linear& layer);
void append_parameters(std::vector<nd::Tensor>& out, const EdgeConv& layer);

void save_layer(Archive& archive, const std::string& prefix, const Linear& layer);
void load_layer(const Archive& archive, const std::string& prefix, Linear& layer);
void save_layer(Archive& archive, const std::string& prefix, const EdgeConv& layer);
void load_layer(const Archive& archive, const std::string& prefix, EdgeConv& layer);

// Flat key=value records used to store network configs inside archives.
using ConfigMap = std::map<std::string, std::string>;
std::string format_config(const ConfigMap& values);
ConfigMap parse_config(const std::string& text);
std::size_t config_size(const ConfigMap& values, const std::string& key);
double config_real(const ConfigMap& values, const std::string& key);
std::vector<std::size_t> config_widths(const ConfigMap& values, const std::string& key);
// Shortest text that parses back to the same double.
std::string format_real(double value);

// Comma-separated width list, as written in configs and archives.
std::string format_widths(const std::vector<std::size_t>& widths);
std::vector<std::size_t> parse_widths(const std::string& text);

}  // namespace meshssm::nn

#include "meshssm/nn/layers.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "meshssm/error.hpp"

namespace meshssm::nn {

Linear::Linear(std::size_t in, std::size_t out, nd::Rng& rng) {
  if (in == 0 || out == 0) throw ValidationError("linear layer needs positive widths");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& v : w) v = (2.0 * rng.uniform() - 1.0) * bound;
  std::vector<double> b(out);
  for (auto& v : b) v = (2.0 * rng.uniform() - 1.0) * bound;
  weight = nd::Tensor::from({in, out}, std::move(w), true);
  bias = nd::Tensor::from({out}, std::move(b), true);
}

EdgeConv::EdgeConv(std::size_t in, std::size_t out, nd::Rng& rng) : edge(2 * in, out, rng), norm(out) {}

nd::Tensor EdgeConv::forward(const nd::Tensor& x, std::span<const std::uint32_t> neighbors, std::size_t k,
                             nd::Mode mode, double slope) {
  if (x.dim() != 2 || x.cols() != in_features())
    throw DimensionError("edgeconv: input " + nd::shape_string(x.shape()) + " does not have " +
                         std::to_string(in_features()) + " features");
  if (k == 0 || neighbors.size() != x.rows() * k)
    throw ValidationError("edgeconv: neighbor index has " + std::to_string(neighbors.size()) + " entries for " +
                          std::to_string(x.rows()) + " points with k=" + std::to_string(k));
  return nd::edge_conv(x, neighbors, k, edge.weight, edge.bias, norm, mode, slope);
}

void append_parameters(std::vector<nd::Tensor>& out, const Linear& layer) {
  out.push_back(layer.weight);
  out.push_back(layer.bias);
}

void append_parameters(std::vector<nd::Tensor>& out, const EdgeConv& layer) {
  append_parameters(out, layer.edge);
  out.push_back(layer.norm.gamma);
  out.push_back(layer.norm.beta);
}

void save_layer(Archive& archive, const std::string& prefix, const Linear& layer) {
  archive.put_tensor(prefix + ".weight", layer.weight);
  archive.put_tensor(prefix + ".bias", layer.bias);
}

void load_layer(const Archive& archive, const std::string& prefix, Linear& layer) {
  archive.read_into(prefix + ".weight", layer.weight);
  archive.read_into(prefix + ".bias", layer.bias);
}

void save_layer(Archive& archive, const std::string& prefix, const EdgeConv& layer) {
  save_layer(archive, prefix + ".edge", layer.edge);
  archive.put_tensor(prefix + ".bn.gamma", layer.norm.gamma);
  archive.put_tensor(prefix + ".bn.beta", layer.norm.beta);
  archive.put_tensor(prefix + ".bn.running_mean", {layer.norm.features()}, layer.norm.running_mean);
  archive.put_tensor(prefix + ".bn.running_var", {layer.norm.features()}, layer.norm.running_var);
}

void load_layer(const Archive& archive, const std::string& prefix, EdgeConv& layer) {
  load_layer(archive, prefix + ".edge", layer.edge);
  archive.read_into(prefix + ".bn.gamma", layer.norm.gamma);
  archive.read_into(prefix + ".bn.beta", layer.norm.beta);
  archive.read_into(prefix + ".bn.running_mean", layer.norm.running_mean);
  archive.read_into(prefix + ".bn.running_var", layer.norm.running_var);
}

std::string format_config(const ConfigMap& values) {
  std::string out;
  for (const auto& [key, value] : values) out += key + "=" + value + "\n";
  return out;
}

ConfigMap parse_config(const std::string& text) {
  ConfigMap out;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

namespace {

const std::string& config_value(const ConfigMap& values, const std::string& key) {
  auto it = values.find(key);
  if (it == values.end()) throw ParseError("stored config is missing '" + key + "'");
  return it->second;
}

}  // namespace

std::size_t config_size(const ConfigMap& values, const std::string& key) {
  const auto widths = parse_widths(config_value(values, key));
  if (widths.size() != 1) throw ParseError("stored config value '" + key + "' is not a single integer");
  return widths[0];
}

double config_real(const ConfigMap& values, const std::string& key) {
  const auto& text = config_value(values, key);
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) throw ParseError("stored config value '" + key + "' is not a number");
  return value;
}

std::vector<std::size_t> config_widths(const ConfigMap& values, const std::string& key) {
  return parse_widths(config_value(values, key));
}

std::string format_real(double value) {
  char buf[40];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

std::string format_widths(const std::vector<std::size_t>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(widths[i]);
  }
  return out;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> widths;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    if (!std::isdigit(static_cast<unsigned char>(item[0]))) throw ParseError("invalid width list '" + text + "'");
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(item, &used);
    } catch (const std::exception&) {
      throw ParseError("invalid width list '" + text + "'");
    }
    if (used != item.size()) throw ParseError("invalid width list '" + text + "'");
    widths.push_back(static_cast<std::size_t>(value));
  }
  return widths;
}

}  // namespace meshssm::nn

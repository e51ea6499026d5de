#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "meshssm/nd/tensor.hpp"

namespace meshssm::nn {

// Named-record binary container used for parameter and training checkpoints.
//
// Layout (little-endian, native IEEE-754 doubles):
//   "MSSMARCH"  u32 version  u64 record_count
//   per record: u8 kind (1 = tensor, 2 = text)  u32 name_len  name
//     tensor:   u32 rank  u64 extents[rank]  f64 values[product(extents)]
//     text:     u64 length  bytes
//   u64 FNV-1a hash of every preceding byte
class Archive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  struct TensorRecord {
    nd::Shape shape;
    std::vector<double> values;
  };

  void put_tensor(const std::string& name, nd::Shape shape, std::span<const double> values);
  void put_tensor(const std::string& name, const nd::Tensor& tensor);
  void put_text(const std::string& name, std::string text);

  bool has(const std::string& name) const;
  const TensorRecord& tensor(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  // Copies a stored tensor into `target`, which must have the same shape.
  void read_into(const std::string& name, nd::Tensor& target) const;
  void read_into(const std::string& name, std::vector<double>& target) const;

  std::vector<std::string> tensor_names() const;

  std::string serialize() const;
  static Archive deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  std::map<std::string, TensorRecord> tensors_;
  std::map<std::string, std::string> texts_;
};

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t hash = 1469598103934665603ULL);

}  // namespace meshssm::nn

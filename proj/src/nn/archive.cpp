#include "meshssm/nn/archive.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "meshssm/error.hpp"

namespace meshssm::nn {
namespace {

constexpr char kMagic[8] = {'M', 'S', 'S', 'M', 'A', 'R', 'C', 'H'};

template <class T>
void write_raw(std::string& out, const T& value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  out.append(p, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T read() {
    T value;
    need(sizeof(T));
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string read_string(std::size_t length) {
    need(length);
    std::string s = bytes_.substr(pos_, length);
    pos_ += length;
    return s;
  }

  void read_doubles(double* dst, std::size_t count) {
    need(count * sizeof(double));
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t count) const {
    if (pos_ + count > bytes_.size()) throw ParseError("archive is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t hash) {
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 1099511628211ULL;
  }
  return hash;
}

void Archive::put_tensor(const std::string& name, nd::Shape shape, std::span<const double> values) {
  if (nd::shape_size(shape) != values.size()) throw DimensionError("archive: tensor '" + name + "' shape mismatch");
  tensors_[name] = TensorRecord{std::move(shape), std::vector<double>(values.begin(), values.end())};
}

void Archive::put_tensor(const std::string& name, const nd::Tensor& tensor) {
  put_tensor(name, tensor.shape(), tensor.data());
}

void Archive::put_text(const std::string& name, std::string text) { texts_[name] = std::move(text); }

bool Archive::has(const std::string& name) const { return tensors_.count(name) || texts_.count(name); }

const Archive::TensorRecord& Archive::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ValidationError("archive has no tensor '" + name + "'");
  return it->second;
}

const std::string& Archive::text(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw ValidationError("archive has no text record '" + name + "'");
  return it->second;
}

void Archive::read_into(const std::string& name, nd::Tensor& target) const {
  const auto& rec = tensor(name);
  if (rec.shape != target.shape())
    throw ValidationError("archive tensor '" + name + "' has shape " + nd::shape_string(rec.shape) + ", expected " +
                          nd::shape_string(target.shape()));
  auto dst = target.mutable_data();
  std::copy(rec.values.begin(), rec.values.end(), dst.begin());
}

void Archive::read_into(const std::string& name, std::vector<double>& target) const {
  const auto& rec = tensor(name);
  if (rec.values.size() != target.size())
    throw ValidationError("archive tensor '" + name + "' has " + std::to_string(rec.values.size()) +
                          " values, expected " + std::to_string(target.size()));
  target = rec.values;
}

std::vector<std::string> Archive::tensor_names() const {
  std::vector<std::string> names;
  for (const auto& [name, rec] : tensors_) names.push_back(name);
  return names;
}

std::string Archive::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint64_t>(tensors_.size() + texts_.size()));
  for (const auto& [name, rec] : tensors_) {
    write_raw(out, static_cast<std::uint8_t>(1));
    write_raw(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    write_raw(out, static_cast<std::uint32_t>(rec.shape.size()));
    for (auto e : rec.shape) write_raw(out, static_cast<std::uint64_t>(e));
    out.append(reinterpret_cast<const char*>(rec.values.data()), rec.values.size() * sizeof(double));
  }
  for (const auto& [name, text] : texts_) {
    write_raw(out, static_cast<std::uint8_t>(2));
    write_raw(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    write_raw(out, static_cast<std::uint64_t>(text.size()));
    out += text;
  }
  const auto hash = fnv1a({reinterpret_cast<const unsigned char*>(out.data()), out.size()});
  write_raw(out, hash);
  return out;
}

Archive Archive::deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a meshssm archive (bad magic)");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a({reinterpret_cast<const unsigned char*>(bytes.data()), body}))
    throw ParseError("archive checksum mismatch (corrupt file)");

  Reader in(bytes);
  in.read_string(sizeof(kMagic));
  const auto version = in.read<std::uint32_t>();
  if (version != kVersion)
    throw ValidationError("archive version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kVersion) + ")");
  const auto count = in.read<std::uint64_t>();
  Archive archive;
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto kind = in.read<std::uint8_t>();
    const auto name = in.read_string(in.read<std::uint32_t>());
    if (kind == 1) {
      TensorRecord rec;
      const auto rank = in.read<std::uint32_t>();
      for (std::uint32_t q = 0; q < rank; ++q) rec.shape.push_back(static_cast<std::size_t>(in.read<std::uint64_t>()));
      rec.values.resize(nd::shape_size(rec.shape));
      in.read_doubles(rec.values.data(), rec.values.size());
      archive.tensors_[name] = std::move(rec);
    } else if (kind == 2) {
      archive.texts_[name] = in.read_string(static_cast<std::size_t>(in.read<std::uint64_t>()));
    } else {
      throw ParseError("archive record '" + name + "' has unknown kind");
    }
  }
  if (in.position() != body) throw ParseError("archive has trailing bytes");
  return archive;
}

void Archive::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  // Write-then-rename so an interrupted save never clobbers an older file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace meshssm::nn

#include "rpl/parameters.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "rpl/error.hpp"

namespace rpl {

Tensor ParameterStore::add(const std::string& name, Shape shape, std::vector<double> values, bool frozen) {
  if (index_.contains(name)) throw Error(ErrorCode::BadConfig, name, "duplicate parameter name");
  Tensor t = Tensor::from(std::move(shape), std::move(values), !frozen);
  index_.emplace(name, params_.size());
  params_.push_back({name, t, frozen});
  return t;
}

Tensor ParameterStore::add_normal(const std::string& name, Shape shape, double stddev, std::mt19937_64& rng,
                                  bool frozen) {
  std::vector<double> values(shape_size(shape), 0.0);
  if (stddev > 0.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : values) v = dist(rng);
  }
  return add(name, std::move(shape), std::move(values), frozen);
}

Tensor ParameterStore::add_constant(const std::string& name, Shape shape, double value, bool frozen) {
  std::vector<double> values(shape_size(shape), value);
  return add(name, std::move(shape), std::move(values), frozen);
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::BadCheckpoint, name, "unknown parameter");
  return params_[it->second];
}

Parameter& ParameterStore::get(const std::string& name) {
  return const_cast<Parameter&>(static_cast<const ParameterStore&>(*this).get(name));
}

void ParameterStore::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

std::size_t ParameterStore::trainable_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_)
    if (!p.frozen) n += p.tensor.size();
  return n;
}

std::uint64_t ParameterStore::checksum(bool frozen_only) const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Parameter& p : params_) {
    if (frozen_only && !p.frozen) continue;
    feed(p.name.data(), p.name.size());
    auto data = p.tensor.data();
    feed(data.data(), data.size_bytes());
  }
  return h;
}

std::map<std::string, std::vector<double>> ParameterStore::snapshot() const {
  std::map<std::string, std::vector<double>> out;
  for (const Parameter& p : params_) out.emplace(p.name, std::vector<double>(p.tensor.data().begin(), p.tensor.data().end()));
  return out;
}

void ParameterStore::restore(const std::map<std::string, std::vector<double>>& values) {
  for (Parameter& p : params_) {
    auto it = values.find(p.name);
    if (it == values.end() || it->second.size() != p.tensor.size()) {
      throw Error(ErrorCode::BadCheckpoint, p.name, "snapshot does not match parameter");
    }
    std::copy(it->second.begin(), it->second.end(), p.tensor.mutable_data().begin());
  }
}

// ---------------------------------------------------------------------------
// Checkpoint file

namespace {

constexpr char kMagic[8] = {'R', 'P', 'L', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::BadCheckpoint, path, "truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string get_bytes(std::istream& in, std::size_t n, const std::string& path) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw Error(ErrorCode::BadCheckpoint, path, "truncated file");
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& header_json, const ParameterStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, path, "cannot open for writing");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header_json.size()));
  out.write(header_json.data(), static_cast<std::streamsize>(header_json.size()));
  put_u32(out, static_cast<std::uint32_t>(store.all().size()));
  for (const Parameter& p : store.all()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t extent : p.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(extent));
    for (double v : p.tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw Error(ErrorCode::IoError, path, "write failed");
}

CheckpointFile load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, path, "cannot open");
  if (get_bytes(in, sizeof kMagic, path) != std::string(kMagic, sizeof kMagic)) {
    throw Error(ErrorCode::BadCheckpoint, path, "bad magic");
  }
  if (const auto version = get_u32(in, path); version != kCheckpointVersion) {
    throw Error(ErrorCode::BadCheckpoint, path, "unsupported version " + std::to_string(version));
  }
  CheckpointFile file;
  file.header_json = get_bytes(in, get_u32(in, path), path);
  const std::uint32_t count = get_u32(in, path);
  for (std::uint32_t e = 0; e < count; ++e) {
    CheckpointEntry entry;
    entry.name = get_bytes(in, get_u32(in, path), path);
    const std::uint32_t rank = get_u32(in, path);
    for (std::uint32_t r = 0; r < rank; ++r) entry.shape.push_back(get_u32(in, path));
    entry.values.resize(shape_size(entry.shape));
    for (float& v : entry.values) v = std::bit_cast<float>(get_u32(in, path));
    file.entries.push_back(std::move(entry));
  }
  return file;
}

void apply_checkpoint(const CheckpointFile& file, ParameterStore& store) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const CheckpointEntry& e : file.entries) by_name.emplace(e.name, &e);
  for (Parameter& p : store.all()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw Error(ErrorCode::BadCheckpoint, p.name, "missing from checkpoint");
    if (it->second->shape != p.tensor.shape()) {
      throw Error(ErrorCode::BadCheckpoint, p.name,
                  "shape " + shape_string(it->second->shape) + " vs " + shape_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(it->second->values[i]);
  }
}

}  // namespace rpl

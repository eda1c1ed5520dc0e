#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rpl/tensor.hpp"

namespace rpl {

struct Parameter {
  std::string name;
  Tensor tensor;
  bool frozen = false;
};

// Owns the named parameters of a model in registration order. Frozen
// parameters are leaves without requires_grad, so no gradient ever reaches
// them and the optimizer skips them.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Shape shape, std::vector<double> values, bool frozen = false);
  Tensor add_normal(const std::string& name, Shape shape, double stddev, std::mt19937_64& rng,
                    bool frozen = false);
  Tensor add_constant(const std::string& name, Shape shape, double value, bool frozen = false);

  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }
  const Parameter& get(const std::string& name) const;
  Parameter& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.contains(name); }

  void zero_grad();
  std::size_t trainable_count() const;  // scalar count of non-frozen parameters

  // FNV-1a over names and value bytes; frozen_only restricts to frozen ones.
  std::uint64_t checksum(bool frozen_only) const;

  std::map<std::string, std::vector<double>> snapshot() const;
  void restore(const std::map<std::string, std::vector<double>>& values);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

// Binary checkpoint, all integers little-endian:
//   magic "RPLCKPT\0" (8 bytes) | u32 version (=1) | u32 header_len |
//   header_len bytes of UTF-8 JSON (config echo) | u32 entry_count |
//   per entry: u32 name_len | name bytes | u32 rank | rank x u32 extents |
//              product(extents) x IEEE-754 float32 payload
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointFile {
  std::string header_json;
  std::vector<CheckpointEntry> entries;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::string& header_json, const ParameterStore& store);
CheckpointFile load_checkpoint(const std::string& path);
// Copies entry values into matching parameters; every parameter must be
// present with an identical shape.
void apply_checkpoint(const CheckpointFile& file, ParameterStore& store);

}  // namespace rpl

#pragma once

// Named trainable parameters. Creation order is the canonical iteration
// order for the optimizer and checkpoint IO.

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>

#include "hvc/tensor.hpp"

namespace hvc {

using ParamId = int32_t;

struct Param {
    std::string name;
    Tensor value;
    Tensor grad; // same shape/dtype, zero between steps
};

class ParamStore {
  public:
    ParamId add(const std::string& name, Tensor value);

    Param& at(ParamId id) { return params_.at(static_cast<size_t>(id)); }
    const Param& at(ParamId id) const { return params_.at(static_cast<size_t>(id)); }
    ParamId find(const std::string& name) const; // -1 if absent

    size_t size() const { return params_.size(); }
    int64_t total_elements() const;
    void zero_grads();

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

  private:
    std::deque<Param> params_;
    std::unordered_map<std::string, ParamId> by_name_;
};

// Versioned binary checkpoint: magic, format version, model-config hash,
// then named parameter records with 32-bit little-endian values.
void save_checkpoint(const std::string& path, const ParamStore& store, uint64_t config_hash);
// Loads into an existing store (names and shapes must match). Verifies the
// config hash and format version.
void load_checkpoint(const std::string& path, ParamStore& store, uint64_t expected_config_hash);
// Reads only the stored config hash (for tooling).
uint64_t checkpoint_config_hash(const std::string& path);

} // namespace hvc

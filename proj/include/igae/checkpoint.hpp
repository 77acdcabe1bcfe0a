#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "igae/nn.hpp"
#include "igae/tensor.hpp"

namespace igae {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadMagicError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct VersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct TruncatedError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct OverlapError : CheckpointError {
  using CheckpointError::CheckpointError;
};

inline constexpr uint32_t kCheckpointVersion = 1;

// Single-file checkpoint: magic "IGAE", format version, a JSON manifest of
// named entries {role, dtype, shape, offset}, then a raw little-endian
// float32 payload. The manifest's "meta" object makes files self-describing.
struct CheckpointEntry {
  std::string name;
  std::string role;  // encoder|decoder|triplane|mlp_field|feature_decoder|
                     // background|optimizer
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::vector<CheckpointEntry> entries;
  nlohmann::json meta = nlohmann::json::object();

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }

  bool has_role(const std::string& role) const {
    for (const auto& e : entries)
      if (e.role == role) return true;
    return false;
  }

  void add(const std::string& name, const std::string& role, Shape shape,
           std::vector<float> data) {
    entries.push_back({name, role, std::move(shape), std::move(data)});
  }

  void add_params(const ParamList<float>& params, const std::string& role) {
    for (const auto& np : params)
      add(np.name, role, np.tensor.shape(), np.tensor.data());
  }

  // Copy stored arrays back into live tensors, matched by name.
  void restore_params(const ParamList<float>& params) const {
    for (const auto& np : params) {
      const CheckpointEntry* e = find(np.name);
      if (!e)
        throw CheckpointError("checkpoint is missing entry '" + np.name + "'");
      if (e->shape != np.tensor.shape())
        throw CheckpointError("checkpoint entry '" + np.name +
                              "' has shape " + shape_str(e->shape) +
                              ", expected " + shape_str(np.tensor.shape()));
      auto t = np.tensor;
      t.data() = e->data;
    }
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

uint64_t file_fnv1a(const std::string& path);

}  // namespace igae

#pragma once

#include "casgen/nn/layers.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace casgen::diffusion {

enum class Component { class_encoder, denoiser };

std::string to_string(Component c);
Component component_from_string(const std::string& s);

struct CheckpointMeta {
  Component component = Component::denoiser;
  int epoch = 1;
  std::string config_fingerprint;
  std::int64_t param_count = 0;
};

/// Binary parameter blob + sidecar text metadata at `<path>.meta`.
void save_checkpoint(const std::string& path, const std::vector<const nn::Param*>& params,
                     const CheckpointMeta& meta);

/// Loads parameters in place; shapes must match. Returns the sidecar metadata.
CheckpointMeta load_checkpoint(const std::string& path, const std::vector<nn::Param*>& params);

CheckpointMeta read_checkpoint_meta(const std::string& path);

std::uint64_t fnv1a(const void* data, size_t n, std::uint64_t h = 14695981039346656037ULL);

/// Hash of all parameter bytes; used for freezing-contract checks.
std::uint64_t hash_params(const std::vector<const nn::Param*>& params);

std::string fingerprint_string(const std::string& description);

}  // namespace casgen::diffusion

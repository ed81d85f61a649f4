#pragma once

#include <string>

#include "coughkit/fusion.hpp"
#include "coughkit/tabnet.hpp"
#include "coughkit/tensor.hpp"

namespace coughkit {

/// Serializable model state. Tensors are stored as base64 little-endian
/// 32-bit floats, row-major.
struct Checkpoint {
  int schema_version = 1;
  std::string task;  // one of cough_only, symptoms_only, both_binary, both_multiclass
  EncoderConfig encoder_config;
  FusionConfig fusion_config;
  FeatureStats feature_statistics;
  std::vector<std::string> class_names;
  NamedTensorStore tensors;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace coughkit

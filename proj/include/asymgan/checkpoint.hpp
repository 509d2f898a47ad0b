#ifndef ASYMGAN_CHECKPOINT_HPP
#define ASYMGAN_CHECKPOINT_HPP

#include <torch/torch.h>

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace asymgan {

// Binary tensor container: magic "ASYM", u32 LE format version, u64 LE
// length-prefixed UTF-8 JSON header describing tensors (name, shape, dtype
// "f32") and scalar state, followed by raw little-endian f32 blobs in header
// order. Writes are atomic (temp file + rename).

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointFile {
  std::vector<std::string> order;                 // header tensor order
  std::map<std::string, torch::Tensor> tensors;   // f32 CPU
  nlohmann::ordered_json scalars;
};

void write_checkpoint(const std::string& path,
                      const std::vector<std::pair<std::string, torch::Tensor>>& tensors,
                      const nlohmann::ordered_json& scalars);

CheckpointFile read_checkpoint(const std::string& path);

}  // namespace asymgan

#endif

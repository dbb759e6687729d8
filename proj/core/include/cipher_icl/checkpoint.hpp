#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "cipher_icl/model.hpp"
#include "cipher_icl/optimizer.hpp"

namespace cipher_icl {

// Checkpoint layout, all integers and floats little-endian:
//
//   "CICLCKPT"            8-byte magic
//   u32 version           = 1
//   i32 layers, heads, embed_dim, context_length
//   u32 flags             bit 0: tied embeddings
//   u32 tensor_count      then per tensor, in parameter_layout() order:
//       u32 name_len, name bytes, u32 ndims, u32 dims[ndims], f32 values
//   u32 has_optimizer
//   if has_optimizer:
//       u64 step, f64 lr, f64 weight_decay, f64 beta1, f64 beta2, f64 eps
//       u32 tensor_count (2 x parameter tensors), encoded as above and named
//       "adam.m/<name>" then "adam.v/<name>" per tensor
inline constexpr std::string_view kCheckpointMagic = "CICLCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams<float> params;
  std::optional<AdamWState<float>> optimizer;
};

// Writes to a temporary sibling and renames, so readers never observe a
// half-written file. Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const AdamWState<float>* optimizer = nullptr);

// Throws IoError if unreadable, FormatError on bad magic, version, layout or
// truncation. Nothing is returned unless the whole file parsed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cipher_icl

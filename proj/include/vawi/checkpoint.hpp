#pragma once

#include <string>

#include "vawi/encoder.hpp"

namespace vawi {

// Binary checkpoint, format "VAWI-CKPT v1":
//   magic "VAWICKPT", u32 version = 1, u32 tensor_count, then per tensor:
//   u16 name length, UTF-8 name, u8 group id, u8 trainable flag, u8 rank,
//   rank x u64 dims, little-endian f32 row-major payload.
// save(load(f)) reproduces f byte for byte.
void save_checkpoint(const ParameterPartition& partition, const std::string& path);
ParameterPartition load_checkpoint(const std::string& path);

// Copies checkpoint values into an existing partition by tensor name.
// Missing names or shape disagreements are errors.
void apply_checkpoint(ParameterPartition& target, const ParameterPartition& source);

} // namespace vawi

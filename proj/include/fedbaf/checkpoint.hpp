#pragma once

#include <string>

#include "fedbaf/param_vector.hpp"

namespace fedbaf {

/// Binary checkpoint:
///   magic "FBAF", format version u16 LE,
///   u32 layer count, per layer: u32 name length + UTF-8 name,
///   u32 rank, rank x u32 dims, u64 macs_per_sample,
///   i32 num_classes, i32 input_dim,
///   weights as little-endian IEEE-754 float64 in schema order,
///   CRC32 of everything after the magic+version prefix.
void save_checkpoint(const std::string& path, const ParamVector& model);

ParamVector load_checkpoint(const std::string& path);

}  // namespace fedbaf

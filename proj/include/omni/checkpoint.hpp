#pragma once

#include <map>
#include <string>
#include <vector>

#include "omni/nn.hpp"

namespace omni {

// Binary container: magic "OMNI", u32 version, u64 entry count, then per
// entry: u32 name length, name bytes, u8 dtype (0=f64, 1=f32), u32 ndim,
// u64 dims, raw little-endian data.
void save_checkpoint(const std::string& path, const std::vector<Param*>& params,
                     DType dtype = DType::f64);

// Every entry must name an existing param of identical shape; params absent
// from the file are left untouched.
void load_checkpoint(const std::string& path, const ParamRegistry& reg);

bool checkpoint_exists(const std::string& path);

// Bitwise snapshots for freeze verification.
using ParamSnapshot = std::map<std::string, std::vector<double>>;
ParamSnapshot snapshot_params(const ParamRegistry& reg);

}  // namespace omni

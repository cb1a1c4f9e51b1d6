#pragma once

#include <map>
#include <string>

#include "mufen/tensor.hpp"

namespace mufen {

// MUFT binary tensor file: magic "MUFT", little-endian u32 rank, rank u64
// dims, then float32 little-endian payload. Used for checkpoints and
// feature dumps.
void save_muft(const Tensor& t, const std::string& path);
Tensor load_muft(const std::string& path);

// Checkpoint = one MUFT file per parameter plus a JSON index {name: file}.
// Files are written next to the index and referenced by relative name.
void save_checkpoint(const std::map<std::string, Tensor>& params,
                     const std::string& index_path);
std::map<std::string, Tensor> load_checkpoint(const std::string& index_path);

}  // namespace mufen

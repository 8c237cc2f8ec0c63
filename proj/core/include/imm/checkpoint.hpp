#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "imm/train.hpp"

namespace imm {

// Checkpoint layout (all integers little-endian, doubles IEEE-754 bits LE):
//   magic "IMM1" | u32 version=1 | u64 config_len | config text (UTF-8, verbatim)
//   | u64 step | u64 seed | u64 tensor_count
//   then per tensor:
//   u64 name_len | name | u32 dtype (1 = f64) | u32 rank (2) | u64 dims[rank]
//   (rows, cols) | payload, row-major.
// Tensor names carry a state prefix: net. / adam_m. / adam_v. / ema. followed
// by the fixed for_each_tensor name, e.g. "net.trunk0.W".  Saving the same
// state twice produces byte-identical files.

void save_checkpoint(const std::string& path, const std::string& config_text, const TrainState& st,
                     std::uint64_t seed);

struct CheckpointFile {
    std::uint32_t version = 1;
    std::string config_text;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, Mat>> tensors;  // in file order
};

// Throws RuntimeFault on magic/version mismatch, truncation, or trailing bytes.
CheckpointFile load_checkpoint(const std::string& path);

// Copies the tensor table into a state built for the same architecture; the
// names, order, and shapes must match exactly. Also restores the Adam step.
void apply_checkpoint(const CheckpointFile& file, TrainState& st);

}  // namespace imm

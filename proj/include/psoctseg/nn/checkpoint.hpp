#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"

#include "psoctseg/nn/layers.hpp"

namespace psoctseg::nn {

/// Checkpoint layout (integers little-endian):
///   "PSOCTCKP"   8-byte magic
///   u32          header length
///   header       UTF-8 JSON; the writer adds "tensors": [{name, shape}] and
///                "extra": count of trailing floats
///   f32[...]     parameter values in declaration order, then the extras
inline constexpr char kCheckpointMagic[8] = {'P', 'S', 'O', 'C', 'T', 'C', 'K', 'P'};

void save_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                     const std::vector<const Parameter<float>*>& params, const std::vector<float>& extra = {});

struct CheckpointData {
  nlohmann::json header;
  std::vector<Parameter<float>> tensors;
  std::vector<float> extra;
};

/// Throws FormatError on a bad magic or header, ShapeMismatch on a payload
/// of the wrong length.
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Copies tensors into `params` by position, checking names and shapes.
void assign_parameters(const CheckpointData& ck, const std::vector<Parameter<float>*>& params);

}  // namespace psoctseg::nn

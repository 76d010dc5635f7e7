#pragma once

#include "emf/nn/module.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace emf::nn {

// Layout: "EMFC" | u16 version | u32 header length | JSON header | tensor data.
// Tensor data is raw little-endian float64, row-major, offsets relative to
// the first byte after the header.
inline constexpr char kCheckpointMagic[4] = {'E', 'M', 'F', 'C'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointData {
  nlohmann::json header;  // caller metadata plus the "tensors" directory
  std::map<std::string, Matrix> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const nlohmann::json& meta,
                                            const std::vector<const Parameter*>& params);
CheckpointData decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<const Parameter*>& params);
CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace emf::nn

#pragma once

#include <string>

#include "aag/data.hpp"
#include "aag/model.hpp"

namespace aag {

// Container layout: 8-byte magic "AAGCKPT1", little-endian u32 header length,
// JSON header (format_version, encoder config, preprocessing stats, tensor
// manifest with name/shape/dtype/offset), then a raw little-endian f32
// payload the offsets index into.
constexpr char kCheckpointMagic[8] = {'A', 'A', 'G', 'C', 'K', 'P', 'T', '1'};

struct LoadedCheckpoint {
  Encoder<float> encoder;
  ChannelStats stats;
};

void save_checkpoint(const std::string& path, const Encoder<float>& encoder,
                     const ChannelStats& stats);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace aag

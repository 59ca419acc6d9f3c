#include "aag/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace aag {

namespace {

using nlohmann::json;

void put_u32le(std::ofstream& f, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  f.write(bytes, 4);
}

void put_f32le(std::ofstream& f, float v) {
  put_u32le(f, std::bit_cast<std::uint32_t>(v));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

json encoder_to_json(const EncoderConfig& cfg) {
  return json{{"architecture", cfg.architecture}, {"widths", cfg.widths},
              {"embed_dim", cfg.embed_dim},       {"projection_head", cfg.projection_head},
              {"head_hidden", cfg.head_hidden},   {"input_size", cfg.input_size}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.architecture = j.at("architecture").get<std::string>();
  cfg.widths = j.at("widths").get<std::vector<int>>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.projection_head = j.at("projection_head").get<bool>();
  cfg.head_hidden = j.at("head_hidden").get<int>();
  cfg.input_size = j.at("input_size").get<int>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const Encoder<float>& encoder,
                     const ChannelStats& stats) {
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, p] : encoder.named_params()) {
    manifest.push_back(json{{"name", name},
                            {"shape", p.shape()},
                            {"dtype", "f32"},
                            {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.size()) * 4;
  }
  json header{{"format_version", 1},
              {"encoder", encoder_to_json(encoder.config())},
              {"preprocess", json{{"mean", stats.mean}, {"stddev", stats.stddev}}},
              {"tensors", manifest}};
  const std::string header_str = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32le(f, static_cast<std::uint32_t>(header_str.size()));
  f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, p] : encoder.named_params()) {
    for (float v : p.data()) put_f32le(f, v);
  }
  if (!f) throw IoError("short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open " + path);
  const auto file_size = static_cast<std::uint64_t>(f.tellg());
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(file_size));
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short read from " + path);

  if (file_size < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw DataError(path + ": not a checkpoint file (bad magic at offset 0)");
  }
  const std::uint32_t header_len = get_u32le(bytes.data() + 8);
  if (12 + static_cast<std::uint64_t>(header_len) > file_size) {
    throw DataError(path + ": header length " + std::to_string(header_len) +
                    " exceeds file size at offset 8");
  }
  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const json::exception& e) {
    throw DataError(path + ": bad header json: " + e.what());
  }

  EncoderConfig cfg;
  ChannelStats stats;
  try {
    if (header.at("format_version").get<int>() != 1) {
      throw DataError(path + ": unsupported format_version");
    }
    cfg = encoder_from_json(header.at("encoder"));
    stats.mean = header.at("preprocess").at("mean").get<std::array<double, 3>>();
    stats.stddev = header.at("preprocess").at("stddev").get<std::array<double, 3>>();
  } catch (const json::exception& e) {
    throw DataError(path + ": bad header fields: " + e.what());
  }

  LoadedCheckpoint out{Encoder<float>(cfg, 0), stats};
  const std::uint64_t payload_start = 12 + header_len;
  const auto& manifest = header.at("tensors");
  auto& params = out.encoder.named_params();
  if (manifest.size() != params.size()) {
    throw DataError(path + ": tensor manifest size " + std::to_string(manifest.size()) +
                    " does not match config-derived parameter count " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = manifest[i];
    auto& [name, p] = params[i];
    if (entry.at("name").get<std::string>() != name) {
      throw DataError(path + ": tensor " + std::to_string(i) + " named '" +
                      entry.at("name").get<std::string>() + "', expected '" + name + "'");
    }
    if (entry.at("shape").get<Shape>() != p.shape()) {
      throw DataError(path + ": tensor '" + name + "' shape mismatch");
    }
    if (entry.at("dtype").get<std::string>() != "f32") {
      throw DataError(path + ": tensor '" + name + "' has unsupported dtype");
    }
    const std::uint64_t off = payload_start + entry.at("offset").get<std::uint64_t>();
    const std::uint64_t end = off + static_cast<std::uint64_t>(p.size()) * 4;
    if (end > file_size) {
      throw DataError(path + ": tensor '" + name + "' payload truncated at offset " +
                      std::to_string(off));
    }
    for (std::int64_t k = 0; k < p.size(); ++k) {
      p.data_ptr()[k] = std::bit_cast<float>(
          get_u32le(bytes.data() + off + static_cast<std::uint64_t>(k) * 4));
    }
  }
  return out;
}

}  // namespace aag

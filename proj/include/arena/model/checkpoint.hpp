#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <utility>

#include "arena/model/encoder.hpp"

namespace arena::model {

// Single binary file: u64 little-endian header length, JSON header (config +
// tensor directory with element offsets), then all tensor data as raw
// little-endian 32-bit floats in directory order. Round-trips bit-exactly.
inline void save_checkpoint(const std::string& path, const EncoderConfig& cfg,
                            const ModelParams& params) {
  nlohmann::json dir = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const auto& [name, t] : params) {
    nlohmann::json entry{{"name", name}, {"shape", t.shape()}, {"offset", offset},
                         {"count", t.numel()}};
    dir.push_back(entry);
    offset += t.numel();
  }
  nlohmann::json header{{"format", "arena-checkpoint"}, {"version", 1},
                        {"config", cfg}, {"tensors", dir}};
  std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot write '" + path + "'");
  std::uint64_t hlen = hs.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
  out.write(lenbuf, 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  static_assert(sizeof(float) == 4);
  for (const auto& [name, t] : params)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * 4));
  if (!out) throw IoError("checkpoint: short write to '" + path + "'");
}

inline std::pair<EncoderConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read '" + path + "'");
  char lenbuf[8];
  in.read(lenbuf, 8);
  if (in.gcount() != 8) throw ParseError("checkpoint: truncated header length in '" + path + "'");
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i)
    hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
  if (hlen == 0 || hlen > (1ull << 30))
    throw ParseError("checkpoint: implausible header length in '" + path + "'");
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (static_cast<std::uint64_t>(in.gcount()) != hlen)
    throw ParseError("checkpoint: truncated header in '" + path + "'");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: bad header JSON: ") + e.what());
  }
  if (header.value("format", "") != "arena-checkpoint")
    throw ParseError("checkpoint: '" + path + "' is not an arena checkpoint");
  EncoderConfig cfg = header.at("config").get<EncoderConfig>();
  ModelParams params;
  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    Shape shape = entry.at("shape").get<Shape>();
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4));
    if (in.gcount() != static_cast<std::streamsize>(t.numel() * 4))
      throw ParseError("checkpoint: truncated tensor '" + name + "' in '" + path + "'");
    params[name] = t;
  }
  return {cfg, params};
}

}  // namespace arena::model

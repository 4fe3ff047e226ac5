// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#include "higen/checkpoint.hpp"

namespace higen {

using nlohmann::json;

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& a : ck.arrays) {
    dir.push_back(json{{"name", a.name},
                       {"rows", a.rows},
                       {"cols", a.cols},
                       {"frozen", a.frozen},
                       {"offset", offset}});
    offset += a.data.size() * sizeof(float);
  }
  json meta{{"format_version", kCheckpointVersion},
            {"config", to_json(ck.config)},
            {"seeds", json{{"master", ck.config.seed}}},
            {"step", ck.step},
            {"arrays", dir}};
  const std::string meta_str = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, 8);
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t meta_len = meta_str.size();
  out.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (const auto& a : ck.arrays)
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError(path + ": bad checkpoint magic");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kCheckpointVersion)
    throw ParseError(path + ": unsupported checkpoint version " +
                     std::to_string(version));
  std::uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
  if (!in) throw ParseError(path + ": truncated header");
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw ParseError(path + ": truncated metadata block");

  Checkpoint ck;
  try {
    const json meta = json::parse(meta_str);
    if (meta.at("format_version").get<std::uint32_t>() != kCheckpointVersion)
      throw ParseError("metadata format_version mismatch");
    ck.config = train_config_from_json(meta.at("config"));
    ck.step = meta.at("step").get<long>();
    for (const auto& d : meta.at("arrays")) {
      CheckpointArray a;
      a.name = d.at("name").get<std::string>();
      a.rows = d.at("rows").get<Index>();
      a.cols = d.at("cols").get<Index>();
      a.frozen = d.at("frozen").get<bool>();
      a.data.resize(static_cast<size_t>(a.rows) * a.cols);
      ck.arrays.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": bad metadata: " + e.what());
  }

  for (auto& a : ck.arrays) {
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(float)));
    if (!in)
      throw ParseError(path + ": truncated array data for " + a.name);
  }
  return ck;
}

}  // namespace higen

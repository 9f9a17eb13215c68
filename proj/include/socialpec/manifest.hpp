#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "socialpec/common.hpp"

namespace socialpec {

inline std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot hash missing file '" + path + "'");
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
  return h;
}

inline std::string hash_files_hex(const std::vector<std::string>& paths) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& p : paths) {
    const std::uint64_t fh = hash_file(p);
    h = fnv1a64(&fh, sizeof fh, h);
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// Reproducibility sidecar written next to every artifact: the full config,
// the seed, and a content hash of the inputs that produced it.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string data_manifest;  // path, empty when not data-driven
  std::string inputs_hash;    // fnv-1a over the input files
  nlohmann::json config;      // module configs as composed by the CLI

  nlohmann::json to_json() const {
    return nlohmann::json{{"command", command}, {"seed", seed},
                          {"threads", threads}, {"data_manifest", data_manifest},
                          {"inputs_hash", inputs_hash}, {"config", config}};
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write run manifest '" + path + "'");
    os << to_json().dump(2) << '\n';
  }
};

}  // namespace socialpec

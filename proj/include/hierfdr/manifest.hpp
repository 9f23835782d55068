#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hierfdr {

struct RunManifest {
  std::string command;
  std::string config_json = "{}";
  std::uint64_t seed = 0;
  bool seed_from_entropy = false;
  std::string version;
  std::string started_at;
  std::string finished_at;
  std::vector<std::pair<std::string, std::string>> input_digests;  // path, sha256 hex

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();
std::string library_version();

}  // namespace hierfdr

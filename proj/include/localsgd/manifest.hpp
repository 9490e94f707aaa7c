#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace localsgd {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string file;  ///< relative to the output directory
  std::string sha256;
};

struct RunManifest {
  std::string spec_hash;
  std::string tool_version{kToolVersion};
  std::uint64_t master_seed = 0;
  double wall_seconds = 0.0;
  unsigned workers = 0;
  std::vector<ManifestEntry> files;

  std::string str() const;
  static RunManifest parse(std::string_view text);
};

/// Files whose checksums differ between two manifests (missing files count).
std::vector<std::string> checksum_mismatches(const RunManifest& expected, const RunManifest& actual);

}  // namespace localsgd

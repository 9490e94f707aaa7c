#include "localsgd/manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "localsgd/csv.hpp"
#include "localsgd/errors.hpp"

namespace localsgd {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidParameter("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return sha256_hex(os.str());
}

std::string RunManifest::str() const {
  std::ostringstream os;
  os << "spec_hash " << spec_hash << "\n"
     << "tool_version " << tool_version << "\n"
     << "master_seed " << master_seed << "\n"
     << "wall_seconds " << format_double(wall_seconds) << "\n"
     << "workers " << workers << "\n";
  for (const auto& f : files) os << "file " << f.sha256 << " " << f.file << "\n";
  return os.str();
}

RunManifest RunManifest::parse(std::string_view text) {
  RunManifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "spec_hash") {
      ls >> m.spec_hash;
    } else if (key == "tool_version") {
      ls >> m.tool_version;
    } else if (key == "master_seed") {
      ls >> m.master_seed;
    } else if (key == "wall_seconds") {
      ls >> m.wall_seconds;
    } else if (key == "workers") {
      ls >> m.workers;
    } else if (key == "file") {
      ManifestEntry e;
      ls >> e.sha256;
      ls >> std::ws;
      std::getline(ls, e.file);
      m.files.push_back(e);
    } else {
      throw InvalidParameter("manifest: unknown entry '" + key + "'");
    }
    if (ls.fail()) throw InvalidParameter("manifest: malformed line '" + line + "'");
  }
  return m;
}

std::vector<std::string> checksum_mismatches(const RunManifest& expected, const RunManifest& actual) {
  std::map<std::string, std::string> got;
  for (const auto& f : actual.files) got[f.file] = f.sha256;
  std::vector<std::string> bad;
  for (const auto& f : expected.files) {
    auto it = got.find(f.file);
    if (it == got.end() || it->second != f.sha256) bad.push_back(f.file);
    if (it != got.end()) got.erase(it);
  }
  for (const auto& [name, _] : got) bad.push_back(name);
  return bad;
}

}  // namespace localsgd

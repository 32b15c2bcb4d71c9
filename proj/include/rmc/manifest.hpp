#pragma once

// Run manifest: the effective configuration echoed as `key = value` lines
// plus a git-style content hash (SHA-1 over "blob <size>\0<content>") of
// that echo, so two runs with identical settings carry identical hashes.

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "rmc/config.hpp"

namespace rmc {

inline std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("sha1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline std::string manifest_text(const RunConfig& cfg) {
  const std::string echo = config_to_text(cfg);
  return "# effective run configuration\n" + echo + "# seed " + std::to_string(cfg.seed) + "\n# config_hash " +
         git_blob_hash(echo) + "\n";
}

inline void write_manifest(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
  os << manifest_text(cfg);
  if (!os) throw std::runtime_error("failed writing manifest '" + path.string() + "'");
}

}  // namespace rmc

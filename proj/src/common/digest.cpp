// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/common/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace swiftbot {

uint32_t ring_digest32(const std::string& s) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  if (EVP_Digest(s.data(), s.size(), md, &md_len, EVP_sha256(), nullptr) != 1 ||
      md_len < 4) {
    throw std::runtime_error("ring_digest32: EVP_Digest failed");
  }
  return (static_cast<uint32_t>(md[0]) << 24) |
         (static_cast<uint32_t>(md[1]) << 16) |
         (static_cast<uint32_t>(md[2]) << 8) | static_cast<uint32_t>(md[3]);
}

}  // namespace swiftbot

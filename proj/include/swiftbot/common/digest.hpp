// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <string>

namespace swiftbot {

/// SHA-256 of `s`, truncated to the first 32 bits (big-endian).
/// This is the stable digest behind every ring position: node addresses,
/// task keys and image names all map into the identifier space with it.
uint32_t ring_digest32(const std::string& s);

}  // namespace swiftbot

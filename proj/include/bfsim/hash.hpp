#pragma once

#include <array>
#include <cstdint>

#include "bfsim/bytes.hpp"

// Thin wrappers over libcrypto. Every hash in the project goes through here.
namespace bfsim::hash {

using Digest160 = std::array<std::uint8_t, 20>;

Hash256 sha256(ByteView data);
Hash256 sha256d(ByteView data);
Digest160 ripemd160(ByteView data);

/// RIPEMD-160(SHA-256(data)), the full-width address pipeline hash.
Digest160 hash160(ByteView data);

}  // namespace bfsim::hash

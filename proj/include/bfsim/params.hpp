#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace bfsim {

/// Reduced-scale knobs for the address pipeline.
///
/// `secret_bits` and `address_bits` play the role of log2 of the key space
/// and the address space. The real pipeline corresponds to 256 / 160.
struct ModelParams {
    int secret_bits = 32;
    int address_bits = 16;
    std::uint8_t version_byte = 0x00;
    int checksum_len = 4;
    /// Number of message-digest bits covered by a one-time signature.
    int digest_bits = 32;

    /// Throws ParamsError if any invariant is violated:
    /// 8 <= secret_bits <= 256, 4 <= address_bits <= 160,
    /// address_bits < secret_bits, 1 <= checksum_len <= 32, 1 <= digest_bits <= 256.
    void validate() const;

    std::size_t secret_bytes() const { return (static_cast<std::size_t>(secret_bits) + 7) / 8; }
    std::size_t address_bytes() const { return (static_cast<std::size_t>(address_bits) + 7) / 8; }
    std::size_t pubkey_bytes() const { return 2 * static_cast<std::size_t>(digest_bits) * 16; }
    std::size_t signature_bytes() const { return static_cast<std::size_t>(digest_bits) * 16; }

    bool operator==(const ModelParams&) const = default;

    std::string describe() const;
};

}  // namespace bfsim

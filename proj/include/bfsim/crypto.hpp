#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include "bfsim/bytes.hpp"
#include "bfsim/params.hpp"

namespace bfsim::crypto {

/// Width of every Lamport chunk and commitment, in bytes.
inline constexpr std::size_t kChunkBytes = 16;

class SecretKey {
public:
    SecretKey() = default;

    /// Big-endian bytes, exactly params.secret_bytes() long, with the unused
    /// high bits of the first byte cleared. Throws ParamsError otherwise.
    static SecretKey from_bytes(Bytes bytes, const ModelParams& params);
    static SecretKey from_hex(std::string_view hex, const ModelParams& params);
    /// Throws ParamsError when `value` does not fit in params.secret_bits.
    static SecretKey from_u64(std::uint64_t value, const ModelParams& params);

    const Bytes& bytes() const { return bytes_; }
    int bits() const { return bits_; }
    std::string hex() const { return to_hex(bytes_); }

    auto operator<=>(const SecretKey&) const = default;

private:
    Bytes bytes_;
    int bits_ = 0;
};

/// Lamport public key: 2*d commitments of 16 bytes, serialized as
/// c[0][0] || c[0][1] || ... || c[d-1][1].
struct PublicKey {
    Bytes data;

    ByteView commitment(std::size_t digest_index, int bit) const {
        return ByteView(data).subspan((2 * digest_index + static_cast<std::size_t>(bit)) * kChunkBytes,
                                      kChunkBytes);
    }
    std::string hex() const { return to_hex(data); }
    auto operator<=>(const PublicKey&) const = default;
};

/// d revealed preimages of 16 bytes each.
struct Signature {
    Bytes data;

    std::string hex() const { return to_hex(data); }
    auto operator<=>(const Signature&) const = default;
};

/// The first `bits` bits of the pipeline hash, zero-padded in the low-order
/// bits of the final byte. Bytes beyond ceil(bits/8) are always zero.
struct AddressHash {
    std::array<std::uint8_t, 20> bytes{};
    std::uint8_t bits = 0;

    std::size_t byte_len() const { return (bits + 7u) / 8u; }
    ByteView view() const { return ByteView(bytes).first(byte_len()); }
    std::string hex() const { return to_hex(view()); }

    /// Address value as an integer; only meaningful for bits <= 64.
    std::uint64_t value() const;

    /// Throws ParamsError when the byte count does not match `bits` or padding is set.
    static AddressHash from_bytes(ByteView data, int bits);

    auto operator<=>(const AddressHash&) const = default;
};

struct AddressHashHasher {
    std::size_t operator()(const AddressHash& h) const noexcept;
};

struct Address {
    AddressHash hash;
    std::string encoded;
};

enum class AddressErrorKind { ChecksumMismatch, InvalidCharacter, WrongVersion, BadLength };

std::string_view to_string(AddressErrorKind kind);

class AddressDecodeError : public std::runtime_error {
public:
    AddressDecodeError(AddressErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    AddressErrorKind kind() const { return kind_; }

private:
    AddressErrorKind kind_;
};

struct DecodedAddress {
    std::uint8_t version = 0;
    AddressHash hash;
};

/// Deterministic key for `seed`; same seed, same key.
SecretKey keygen(std::uint64_t seed, const ModelParams& params);

/// Uniform key drawn from an existing generator (used by streaming search).
SecretKey random_key(std::mt19937_64& rng, const ModelParams& params);

/// chunk(sk, i, b) = SHA-256(sk || i (2 bytes, big-endian) || b) truncated to 16 bytes.
std::array<std::uint8_t, kChunkBytes> lamport_chunk(const SecretKey& sk, std::size_t digest_index, int bit);

/// Throws ParamsError on width mismatch.
PublicKey derive_pubkey(const SecretKey& sk, const ModelParams& params);

/// First address_bits bits of RIPEMD-160(SHA-256(data)). This is also the
/// script engine's OP_HASH160.
AddressHash address_hash(ByteView data, const ModelParams& params);

AddressHash derive_address_hash(const PublicKey& pk, const ModelParams& params);
Address derive_address(const PublicKey& pk, const ModelParams& params);

/// Convenience: keygen-free path secret key -> address hash.
AddressHash address_of(const SecretKey& sk, const ModelParams& params);

std::string encode_address(const AddressHash& hash, const ModelParams& params);
/// Throws AddressDecodeError.
DecodedAddress decode_address(std::string_view text, const ModelParams& params);

Signature sign(const SecretKey& sk, ByteView msg, const ModelParams& params);
bool verify(const PublicKey& pk, ByteView msg, const Signature& sig, const ModelParams& params);

namespace base58 {

std::string encode(ByteView data);
/// Throws AddressDecodeError(InvalidCharacter).
Bytes decode(std::string_view text);

std::string encode_check(ByteView payload, std::size_t checksum_len = 4);

}  // namespace base58

}  // namespace bfsim::crypto

#include "bfsim/crypto.hpp"

#include <algorithm>
#include <cstring>

#include "bfsim/errors.hpp"
#include "bfsim/hash.hpp"

namespace bfsim::crypto {

namespace {

constexpr std::string_view kAlphabet = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

std::uint8_t top_byte_mask(int bits) {
    int extra = (8 - bits % 8) % 8;
    return static_cast<std::uint8_t>(0xffu >> extra);
}

std::uint8_t tail_byte_mask(int bits) {
    int used = bits % 8;
    return used == 0 ? 0xff : static_cast<std::uint8_t>(0xffu << (8 - used));
}

void check_key_width(const SecretKey& sk, const ModelParams& params) {
    if (sk.bits() != params.secret_bits || sk.bytes().size() != params.secret_bytes()) {
        throw ParamsError("secret key width " + std::to_string(sk.bits()) +
                          " does not match secret_bits " + std::to_string(params.secret_bits));
    }
}

bool digest_bit(const Hash256& digest, std::size_t i) {
    return (digest[i / 8] >> (7 - i % 8)) & 1u;
}

}  // namespace

SecretKey SecretKey::from_bytes(Bytes bytes, const ModelParams& params) {
    if (bytes.size() != params.secret_bytes()) {
        throw ParamsError("secret key must be " + std::to_string(params.secret_bytes()) + " bytes");
    }
    if (!bytes.empty() && (bytes[0] & ~top_byte_mask(params.secret_bits)) != 0) {
        throw ParamsError("secret key has bits above secret_bits");
    }
    SecretKey sk;
    sk.bytes_ = std::move(bytes);
    sk.bits_ = params.secret_bits;
    return sk;
}

SecretKey SecretKey::from_hex(std::string_view hex, const ModelParams& params) {
    Bytes raw;
    try {
        raw = bfsim::from_hex(hex);
    } catch (const std::invalid_argument& e) {
        throw ParamsError(std::string("secret key hex: ") + e.what());
    }
    return from_bytes(std::move(raw), params);
}

SecretKey SecretKey::from_u64(std::uint64_t value, const ModelParams& params) {
    if (params.secret_bits < 64 && (value >> params.secret_bits) != 0) {
        throw ParamsError("value does not fit in secret_bits");
    }
    Bytes bytes(params.secret_bytes(), 0);
    for (std::size_t i = 0; i < bytes.size() && i < 8; ++i) {
        bytes[bytes.size() - 1 - i] = static_cast<std::uint8_t>(value >> (8 * i));
    }
    return from_bytes(std::move(bytes), params);
}

std::uint64_t AddressHash::value() const {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < byte_len(); ++i) v = (v << 8) | bytes[i];
    return v >> ((8 - bits % 8) % 8);
}

AddressHash AddressHash::from_bytes(ByteView data, int bits) {
    if (bits < 1 || bits > 160) throw ParamsError("address width out of range");
    AddressHash h;
    h.bits = static_cast<std::uint8_t>(bits);
    if (data.size() != h.byte_len()) throw ParamsError("address hash has wrong byte length");
    std::copy(data.begin(), data.end(), h.bytes.begin());
    if ((h.bytes[h.byte_len() - 1] & ~tail_byte_mask(bits)) != 0) {
        throw ParamsError("address hash padding bits are set");
    }
    return h;
}

std::size_t AddressHashHasher::operator()(const AddressHash& h) const noexcept {
    // Inputs are hash outputs already; the first 8 bytes are uniform.
    std::uint64_t v;
    std::memcpy(&v, h.bytes.data(), sizeof v);
    return static_cast<std::size_t>(v ^ (static_cast<std::uint64_t>(h.bits) << 56));
}

std::string_view to_string(AddressErrorKind kind) {
    switch (kind) {
        case AddressErrorKind::ChecksumMismatch: return "ChecksumMismatch";
        case AddressErrorKind::InvalidCharacter: return "InvalidCharacter";
        case AddressErrorKind::WrongVersion: return "WrongVersion";
        case AddressErrorKind::BadLength: return "BadLength";
    }
    return "Unknown";
}

SecretKey random_key(std::mt19937_64& rng, const ModelParams& params) {
    Bytes bytes(params.secret_bytes());
    std::size_t i = 0;
    while (i < bytes.size()) {
        std::uint64_t word = rng();
        for (int j = 7; j >= 0 && i < bytes.size(); --j, ++i) {
            bytes[i] = static_cast<std::uint8_t>(word >> (8 * j));
        }
    }
    bytes[0] &= top_byte_mask(params.secret_bits);
    return SecretKey::from_bytes(std::move(bytes), params);
}

SecretKey keygen(std::uint64_t seed, const ModelParams& params) {
    params.validate();
    std::mt19937_64 rng(seed);
    return random_key(rng, params);
}

std::array<std::uint8_t, kChunkBytes> lamport_chunk(const SecretKey& sk, std::size_t digest_index, int bit) {
    std::array<std::uint8_t, 35> buf{};
    const auto& key = sk.bytes();
    std::copy(key.begin(), key.end(), buf.begin());
    std::size_t n = key.size();
    buf[n] = static_cast<std::uint8_t>(digest_index >> 8);
    buf[n + 1] = static_cast<std::uint8_t>(digest_index);
    buf[n + 2] = static_cast<std::uint8_t>(bit);
    Hash256 h = hash::sha256(ByteView(buf).first(n + 3));
    std::array<std::uint8_t, kChunkBytes> out{};
    std::copy_n(h.begin(), kChunkBytes, out.begin());
    return out;
}

PublicKey derive_pubkey(const SecretKey& sk, const ModelParams& params) {
    check_key_width(sk, params);
    PublicKey pk;
    pk.data.resize(params.pubkey_bytes());
    auto* out = pk.data.data();
    for (int i = 0; i < params.digest_bits; ++i) {
        for (int b = 0; b < 2; ++b) {
            auto chunk = lamport_chunk(sk, static_cast<std::size_t>(i), b);
            Hash256 c = hash::sha256(chunk);
            std::copy_n(c.begin(), kChunkBytes, out);
            out += kChunkBytes;
        }
    }
    return pk;
}

AddressHash address_hash(ByteView data, const ModelParams& params) {
    hash::Digest160 full = hash::hash160(data);
    AddressHash h;
    h.bits = static_cast<std::uint8_t>(params.address_bits);
    std::size_t n = h.byte_len();
    std::copy_n(full.begin(), n, h.bytes.begin());
    h.bytes[n - 1] &= tail_byte_mask(params.address_bits);
    return h;
}

AddressHash derive_address_hash(const PublicKey& pk, const ModelParams& params) {
    return address_hash(pk.data, params);
}

Address derive_address(const PublicKey& pk, const ModelParams& params) {
    Address a;
    a.hash = derive_address_hash(pk, params);
    a.encoded = encode_address(a.hash, params);
    return a;
}

AddressHash address_of(const SecretKey& sk, const ModelParams& params) {
    return derive_address_hash(derive_pubkey(sk, params), params);
}

std::string encode_address(const AddressHash& hash, const ModelParams& params) {
    if (hash.bits != params.address_bits) throw ParamsError("address hash width does not match address_bits");
    Bytes payload;
    payload.reserve(1 + hash.byte_len());
    payload.push_back(params.version_byte);
    auto v = hash.view();
    payload.insert(payload.end(), v.begin(), v.end());
    return base58::encode_check(payload, static_cast<std::size_t>(params.checksum_len));
}

DecodedAddress decode_address(std::string_view text, const ModelParams& params) {
    Bytes raw = base58::decode(text);
    auto checksum_len = static_cast<std::size_t>(params.checksum_len);
    if (raw.size() <= checksum_len) {
        throw AddressDecodeError(AddressErrorKind::BadLength, "encoding too short for checksum");
    }
    ByteView body = ByteView(raw).first(raw.size() - checksum_len);
    Hash256 check = hash::sha256d(body);
    if (!std::equal(check.begin(), check.begin() + static_cast<std::ptrdiff_t>(checksum_len),
                    raw.end() - static_cast<std::ptrdiff_t>(checksum_len))) {
        throw AddressDecodeError(AddressErrorKind::ChecksumMismatch, "checksum mismatch");
    }
    if (body.size() != 1 + params.address_bytes()) {
        throw AddressDecodeError(AddressErrorKind::BadLength,
                                 "payload is " + std::to_string(body.size()) + " bytes");
    }
    if (body[0] != params.version_byte) {
        throw AddressDecodeError(AddressErrorKind::WrongVersion, "unexpected version byte");
    }
    DecodedAddress out;
    out.version = body[0];
    out.hash.bits = static_cast<std::uint8_t>(params.address_bits);
    std::copy(body.begin() + 1, body.end(), out.hash.bytes.begin());
    out.hash.bytes[out.hash.byte_len() - 1] &= tail_byte_mask(params.address_bits);
    return out;
}

Signature sign(const SecretKey& sk, ByteView msg, const ModelParams& params) {
    check_key_width(sk, params);
    Hash256 digest = hash::sha256(msg);
    Signature sig;
    sig.data.reserve(params.signature_bytes());
    for (int i = 0; i < params.digest_bits; ++i) {
        auto chunk = lamport_chunk(sk, static_cast<std::size_t>(i), digest_bit(digest, i) ? 1 : 0);
        sig.data.insert(sig.data.end(), chunk.begin(), chunk.end());
    }
    return sig;
}

bool verify(const PublicKey& pk, ByteView msg, const Signature& sig, const ModelParams& params) {
    if (pk.data.size() != params.pubkey_bytes() || sig.data.size() != params.signature_bytes()) return false;
    Hash256 digest = hash::sha256(msg);
    for (int i = 0; i < params.digest_bits; ++i) {
        auto idx = static_cast<std::size_t>(i);
        Hash256 h = hash::sha256(ByteView(sig.data).subspan(idx * kChunkBytes, kChunkBytes));
        auto expected = pk.commitment(idx, digest_bit(digest, idx) ? 1 : 0);
        if (!std::equal(expected.begin(), expected.end(), h.begin())) return false;
    }
    return true;
}

namespace base58 {

std::string encode(ByteView data) {
    std::size_t zeros = 0;
    while (zeros < data.size() && data[zeros] == 0) ++zeros;

    // Base-58 digits, little-endian.
    std::vector<std::uint8_t> digits;
    digits.reserve(data.size() * 138 / 100 + 1);
    for (std::size_t i = zeros; i < data.size(); ++i) {
        unsigned carry = data[i];
        for (auto& d : digits) {
            carry += static_cast<unsigned>(d) << 8;
            d = static_cast<std::uint8_t>(carry % 58);
            carry /= 58;
        }
        while (carry > 0) {
            digits.push_back(static_cast<std::uint8_t>(carry % 58));
            carry /= 58;
        }
    }
    std::string out(zeros, '1');
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) out.push_back(kAlphabet[*it]);
    return out;
}

Bytes decode(std::string_view text) {
    std::size_t ones = 0;
    while (ones < text.size() && text[ones] == '1') ++ones;

    std::vector<std::uint8_t> bytes;  // little-endian
    for (std::size_t i = ones; i < text.size(); ++i) {
        auto pos = kAlphabet.find(text[i]);
        if (pos == std::string_view::npos) {
            throw AddressDecodeError(AddressErrorKind::InvalidCharacter,
                                     std::string("invalid base58 character '") + text[i] + "'");
        }
        unsigned carry = static_cast<unsigned>(pos);
        for (auto& b : bytes) {
            carry += static_cast<unsigned>(b) * 58;
            b = static_cast<std::uint8_t>(carry & 0xff);
            carry >>= 8;
        }
        while (carry > 0) {
            bytes.push_back(static_cast<std::uint8_t>(carry & 0xff));
            carry >>= 8;
        }
    }
    Bytes out(ones, 0);
    out.insert(out.end(), bytes.rbegin(), bytes.rend());
    return out;
}

std::string encode_check(ByteView payload, std::size_t checksum_len) {
    Bytes full(payload.begin(), payload.end());
    Hash256 check = hash::sha256d(payload);
    full.insert(full.end(), check.begin(), check.begin() + static_cast<std::ptrdiff_t>(checksum_len));
    return encode(full);
}

}  // namespace base58

}  // namespace bfsim::crypto

#include "bfsim/bytes.hpp"

#include <stdexcept>

#include "bfsim/errors.hpp"

namespace bfsim {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::string to_hex(ByteView data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

Hash256 hash256_from_hex(std::string_view hex) {
    Bytes b = from_hex(hex);
    if (b.size() != 32) throw std::invalid_argument("expected 32-byte hash");
    Hash256 h{};
    std::copy(b.begin(), b.end(), h.begin());
    return h;
}

void ByteWriter::u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::var_bytes(ByteView data) {
    u32(static_cast<std::uint32_t>(data.size()));
    raw(data);
}

ByteView ByteReader::raw(std::size_t n) {
    if (n > remaining()) throw SerializationError("unexpected end of data");
    ByteView out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::uint8_t ByteReader::u8() { return raw(1)[0]; }

std::uint16_t ByteReader::u16() {
    auto b = raw(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t ByteReader::u32() {
    auto b = raw(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t ByteReader::u64() {
    auto b = raw(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

Bytes ByteReader::var_bytes(std::size_t max_len) {
    std::uint32_t n = u32();
    if (n > max_len) throw SerializationError("length prefix exceeds limit");
    auto b = raw(n);
    return {b.begin(), b.end()};
}

Hash256 ByteReader::hash256() {
    auto b = raw(32);
    Hash256 h{};
    std::copy(b.begin(), b.end(), h.begin());
    return h;
}

}  // namespace bfsim

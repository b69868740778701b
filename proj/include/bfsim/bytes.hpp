#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bfsim {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Hash256 = std::array<std::uint8_t, 32>;

std::string to_hex(ByteView data);

/// Parses an even-length hex string. Throws std::invalid_argument on bad input.
Bytes from_hex(std::string_view hex);

Hash256 hash256_from_hex(std::string_view hex);

inline ByteView as_view(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// Little-endian append-only writer used by every binary format in the project.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void raw(ByteView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
    /// u32 length followed by the payload.
    void var_bytes(ByteView data);

    const Bytes& bytes() const& { return buf_; }
    Bytes take() && { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Bounds-checked reader; throws SerializationError when data runs out.
class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    ByteView raw(std::size_t n);
    Bytes var_bytes(std::size_t max_len);
    Hash256 hash256();

    bool empty() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    ByteView data_;
    std::size_t pos_ = 0;
};

}  // namespace bfsim

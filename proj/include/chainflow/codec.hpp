#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chainflow/bits.hpp"

namespace chainflow {

using Bytes = std::vector<std::uint8_t>;
using Hash32 = std::array<std::uint8_t, 32>;

Hash32 sha256(std::span<const std::uint8_t> data);
Hash32 sha256(std::string_view text);
std::string toHex(std::span<const std::uint8_t> data);
/// Accepts an optional 0x prefix; throws std::invalid_argument on bad input.
Bytes fromHex(std::string_view hex);

/// 20-byte instance identity. The all-zero address means "no address".
class Address {
public:
    static constexpr std::size_t kSize = 20;

    constexpr Address() = default;
    explicit Address(const std::array<std::uint8_t, kSize>& raw) : raw_(raw) {}

    static Address fromHash(const Hash32& h);
    /// Parses "0x" + 40 hex digits; throws std::invalid_argument.
    static Address parse(std::string_view text);

    bool isZero() const {
        for (auto b : raw_)
            if (b) return false;
        return true;
    }
    explicit operator bool() const { return !isZero(); }
    const std::array<std::uint8_t, kSize>& raw() const { return raw_; }
    std::string str() const;

    friend auto operator<=>(const Address&, const Address&) = default;

private:
    std::array<std::uint8_t, kSize> raw_{};
};

class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Canonical length-prefixed binary encoding. Integers are fixed-width
/// little-endian; byte strings carry a u32 length prefix.
class Writer {
public:
    Writer& u8(std::uint8_t v) {
        out_.push_back(v);
        return *this;
    }
    Writer& u16(std::uint16_t v) { return fixed(v, 2); }
    Writer& u32(std::uint32_t v) { return fixed(v, 4); }
    Writer& u64(std::uint64_t v) { return fixed(v, 8); }
    Writer& i64(std::int64_t v) { return fixed(static_cast<std::uint64_t>(v), 8); }
    Writer& boolean(bool v) { return u8(v ? 1 : 0); }
    Writer& bytes(std::span<const std::uint8_t> b);
    Writer& str(std::string_view s);
    Writer& address(const Address& a);
    Writer& bits(const Bits256& b);
    Writer& hash(const Hash32& h);
    Writer& raw(std::span<const std::uint8_t> b) {
        out_.insert(out_.end(), b.begin(), b.end());
        return *this;
    }

    const Bytes& data() const& { return out_; }
    Bytes take() { return std::move(out_); }

private:
    Writer& fixed(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }
    Bytes out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(fixed(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(fixed(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(fixed(4)); }
    std::uint64_t u64() { return fixed(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(fixed(8)); }
    bool boolean();
    Bytes bytes();
    std::string str();
    Address address();
    Bits256 bits();
    Hash32 hash();

    bool done() const { return pos_ == in_.size(); }
    std::size_t remaining() const { return in_.size() - pos_; }
    /// Throws DecodeError when trailing bytes remain.
    void expectEnd() const;

private:
    std::uint64_t fixed(int width);
    std::span<const std::uint8_t> take(std::size_t n);

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace chainflow

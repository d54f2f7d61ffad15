#include "chainflow/codec.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cstring>

namespace chainflow {

namespace {

int hexDigit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string_view stripPrefix(std::string_view hex) {
    if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) hex.remove_prefix(2);
    return hex;
}

}  // namespace

Hash32 sha256(std::span<const std::uint8_t> data) {
    Hash32 out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Hash32 sha256(std::string_view text) {
    return sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string toHex(std::span<const std::uint8_t> data) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    s.reserve(data.size() * 2);
    for (auto b : data) {
        s.push_back(kDigits[b >> 4]);
        s.push_back(kDigits[b & 0xf]);
    }
    return s;
}

Bytes fromHex(std::string_view hex) {
    hex = stripPrefix(hex);
    if (hex.size() % 2) throw std::invalid_argument("odd-length hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hexDigit(hex[2 * i]), lo = hexDigit(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
        out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return out;
}

Address Address::fromHash(const Hash32& h) {
    std::array<std::uint8_t, kSize> raw{};
    std::copy_n(h.begin() + (h.size() - kSize), kSize, raw.begin());
    return Address(raw);
}

Address Address::parse(std::string_view text) {
    auto stripped = stripPrefix(text);
    if (stripped.size() != 2 * kSize) throw std::invalid_argument("address must be 20 bytes");
    auto bytes = fromHex(stripped);
    std::array<std::uint8_t, kSize> raw{};
    std::copy(bytes.begin(), bytes.end(), raw.begin());
    return Address(raw);
}

std::string Address::str() const { return "0x" + toHex(raw_); }

std::array<std::uint8_t, 32> Bits256::toBytes() const {
    std::array<std::uint8_t, 32> out{};
    for (unsigned k = 0; k < 4; ++k)
        for (unsigned b = 0; b < 8; ++b)
            out[31 - (k * 8 + b)] = static_cast<std::uint8_t>(words_[k] >> (8 * b));
    return out;
}

Bits256 Bits256::fromBytes(const std::uint8_t* p) {
    Bits256 r;
    for (unsigned k = 0; k < 4; ++k) {
        std::uint64_t w = 0;
        for (unsigned b = 0; b < 8; ++b) w |= std::uint64_t{p[31 - (k * 8 + b)]} << (8 * b);
        r.words_[k] = w;
    }
    return r;
}

std::string Bits256::toHex() const {
    auto bytes = toBytes();
    auto hex = chainflow::toHex(bytes);
    auto first = hex.find_first_not_of('0');
    return "0x" + (first == std::string::npos ? std::string("0") : hex.substr(first));
}

Bits256 Bits256::fromHex(std::string_view hex) {
    hex = stripPrefix(hex);
    if (hex.empty() || hex.size() > 64) throw std::invalid_argument("bitset hex must be 1..64 digits");
    std::string padded(64 - hex.size(), '0');
    padded.append(hex);
    auto bytes = chainflow::fromHex(padded);
    return fromBytes(bytes.data());
}

Writer& Writer::bytes(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    return raw(b);
}

Writer& Writer::str(std::string_view s) {
    return bytes(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

Writer& Writer::address(const Address& a) { return raw(a.raw()); }

Writer& Writer::bits(const Bits256& b) {
    auto bytes = b.toBytes();
    return raw(bytes);
}

Writer& Writer::hash(const Hash32& h) { return raw(h); }

std::uint64_t Reader::fixed(int width) {
    auto s = take(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{s[static_cast<std::size_t>(i)]} << (8 * i);
    return v;
}

std::span<const std::uint8_t> Reader::take(std::size_t n) {
    if (remaining() < n) throw DecodeError("truncated input");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
}

bool Reader::boolean() {
    auto v = u8();
    if (v > 1) throw DecodeError("invalid boolean byte");
    return v == 1;
}

Bytes Reader::bytes() {
    auto n = u32();
    auto s = take(n);
    return Bytes(s.begin(), s.end());
}

std::string Reader::str() {
    auto n = u32();
    auto s = take(n);
    return std::string(s.begin(), s.end());
}

Address Reader::address() {
    auto s = take(Address::kSize);
    std::array<std::uint8_t, Address::kSize> raw{};
    std::copy(s.begin(), s.end(), raw.begin());
    return Address(raw);
}

Bits256 Reader::bits() { return Bits256::fromBytes(take(32).data()); }

Hash32 Reader::hash() {
    auto s = take(32);
    Hash32 h{};
    std::copy(s.begin(), s.end(), h.begin());
    return h;
}

void Reader::expectEnd() const {
    if (!done()) throw DecodeError("trailing bytes");
}

}  // namespace chainflow

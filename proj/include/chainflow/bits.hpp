#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace chainflow {

/// Fixed 256-bit set. Used for edge sets (preC/postC, tokens) and for the
/// set of element indexes with running sub-process cases.
class Bits256 {
public:
    static constexpr unsigned kWidth = 256;

    constexpr Bits256() = default;
    Bits256(std::initializer_list<unsigned> indexes) {
        for (unsigned i : indexes) set(i);
    }

    static Bits256 single(unsigned index) {
        Bits256 b;
        b.set(index);
        return b;
    }
    /// Low 64 bits only; convenient for masks like Listing-style `return 8`.
    static constexpr Bits256 fromU64(std::uint64_t low) {
        Bits256 b;
        b.words_[0] = low;
        return b;
    }

    bool test(unsigned i) const { return i < kWidth && (words_[i / 64] >> (i % 64)) & 1u; }
    void set(unsigned i) {
        if (i < kWidth) words_[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    void reset(unsigned i) {
        if (i < kWidth) words_[i / 64] &= ~(std::uint64_t{1} << (i % 64));
    }

    bool none() const {
        for (auto w : words_)
            if (w) return false;
        return true;
    }
    bool any() const { return !none(); }
    unsigned count() const {
        unsigned c = 0;
        for (auto w : words_) c += static_cast<unsigned>(std::popcount(w));
        return c;
    }
    /// Index of the lowest set bit, or kWidth when empty.
    unsigned lowest() const {
        for (unsigned k = 0; k < 4; ++k)
            if (words_[k]) return k * 64 + static_cast<unsigned>(std::countr_zero(words_[k]));
        return kWidth;
    }
    bool isSubsetOf(const Bits256& other) const { return (*this & ~other).none(); }
    bool intersects(const Bits256& other) const { return (*this & other).any(); }

    std::vector<unsigned> indexes() const {
        std::vector<unsigned> out;
        for (unsigned k = 0; k < 4; ++k) {
            auto w = words_[k];
            while (w) {
                out.push_back(k * 64 + static_cast<unsigned>(std::countr_zero(w)));
                w &= w - 1;
            }
        }
        return out;
    }

    std::uint64_t word(unsigned k) const { return words_[k]; }
    void setWord(unsigned k, std::uint64_t w) { words_[k] = w; }

    /// 32 bytes, big-endian like an EVM uint256.
    std::array<std::uint8_t, 32> toBytes() const;
    static Bits256 fromBytes(const std::uint8_t* p);
    /// Lowercase hex with 0x prefix, minimal digits ("0x0" when empty).
    std::string toHex() const;
    static Bits256 fromHex(std::string_view hex);

    Bits256 operator~() const {
        Bits256 r;
        for (unsigned k = 0; k < 4; ++k) r.words_[k] = ~words_[k];
        return r;
    }
    Bits256& operator|=(const Bits256& o) {
        for (unsigned k = 0; k < 4; ++k) words_[k] |= o.words_[k];
        return *this;
    }
    Bits256& operator&=(const Bits256& o) {
        for (unsigned k = 0; k < 4; ++k) words_[k] &= o.words_[k];
        return *this;
    }
    friend Bits256 operator|(Bits256 a, const Bits256& b) { return a |= b; }
    friend Bits256 operator&(Bits256 a, const Bits256& b) { return a &= b; }
    friend bool operator==(const Bits256&, const Bits256&) = default;
    friend auto operator<=>(const Bits256& a, const Bits256& b) {
        for (int k = 3; k >= 0; --k)
            if (auto c = a.words_[k] <=> b.words_[k]; c != 0) return c;
        return std::strong_ordering::equal;
    }

private:
    std::array<std::uint64_t, 4> words_{};
};

using EdgeSet = Bits256;

}  // namespace chainflow

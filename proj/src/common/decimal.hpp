#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace intentrag {

// Fixed-point decimal with 18 fractional digits backed by a 128-bit integer.
// Money paths never touch binary floating point.
class Decimal {
public:
    static constexpr int kScaleDigits = 18;

    constexpr Decimal() = default;

    // Accepts [-]digits[.digits] with at most 15 fractional digits so that
    // per-1K prices stay exact after dividing by 1000.
    static Decimal parse(std::string_view text);
    static Decimal from_integer(std::int64_t v);

    Decimal operator+(const Decimal& o) const;
    Decimal& operator+=(const Decimal& o);
    Decimal operator-(const Decimal& o) const;
    Decimal operator*(std::int64_t factor) const;
    // Throws if the quotient is not representable exactly at this scale.
    Decimal div_exact(std::int64_t divisor) const;

    bool is_negative() const noexcept { return units_ < 0; }

    // Shortest exact representation, e.g. "186.648", "0", "0.036".
    std::string to_string() const;
    // Rounded half away from zero to `places` fractional digits.
    std::string to_fixed(int places) const;

    friend bool operator==(const Decimal&, const Decimal&) = default;
    friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
        return a.units_ <=> b.units_;
    }

private:
    explicit constexpr Decimal(__int128 units) : units_(units) {}
    __int128 units_ = 0;
};

}  // namespace intentrag

#include "common/decimal.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace intentrag {

namespace {

constexpr __int128 pow10(int n) {
    __int128 v = 1;
    for (int i = 0; i < n; ++i) v *= 10;
    return v;
}

constexpr __int128 kScale = pow10(Decimal::kScaleDigits);

std::string u128_to_string(unsigned __int128 v) {
    if (v == 0) return "0";
    std::string s;
    while (v > 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

unsigned __int128 magnitude(__int128 v) {
    return v < 0 ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
}

}  // namespace

Decimal Decimal::parse(std::string_view text) {
    auto fail = [&](const char* why) {
        return Error(Errc::InvalidArgument, "bad decimal '" + std::string(text) + "': " + why);
    };
    std::string_view s = text;
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    if (s.empty()) throw fail("empty");

    auto dot = s.find('.');
    std::string_view whole = s.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    if (whole.empty()) throw fail("no integer digits");
    if (dot != std::string_view::npos && frac.empty()) throw fail("no digits after the point");
    if (frac.size() > 15) throw fail("more than 15 fractional digits");
    if (whole.size() > 20) throw fail("overflow");

    __int128 units = 0;
    for (char c : whole) {
        if (c < '0' || c > '9') throw fail("non-digit");
        units = units * 10 + (c - '0');
    }
    units *= kScale;
    __int128 place = kScale / 10;
    for (char c : frac) {
        if (c < '0' || c > '9') throw fail("non-digit");
        units += place * (c - '0');
        place /= 10;
    }
    return Decimal(negative ? -units : units);
}

Decimal Decimal::from_integer(std::int64_t v) { return Decimal(static_cast<__int128>(v) * kScale); }

Decimal Decimal::operator+(const Decimal& o) const {
    __int128 r;
    if (__builtin_add_overflow(units_, o.units_, &r)) {
        throw Error(Errc::InvalidArgument, "decimal overflow in addition");
    }
    return Decimal(r);
}

Decimal& Decimal::operator+=(const Decimal& o) { return *this = *this + o; }

Decimal Decimal::operator-(const Decimal& o) const {
    __int128 r;
    if (__builtin_sub_overflow(units_, o.units_, &r)) {
        throw Error(Errc::InvalidArgument, "decimal overflow in subtraction");
    }
    return Decimal(r);
}

Decimal Decimal::operator*(std::int64_t factor) const {
    __int128 r;
    if (__builtin_mul_overflow(units_, static_cast<__int128>(factor), &r)) {
        throw Error(Errc::InvalidArgument, "decimal overflow in multiplication");
    }
    return Decimal(r);
}

Decimal Decimal::div_exact(std::int64_t divisor) const {
    if (divisor == 0) throw Error(Errc::InvalidArgument, "decimal division by zero");
    if (units_ % divisor != 0) {
        throw Error(Errc::InvalidArgument, "decimal division is not exact at 18 digits");
    }
    return Decimal(units_ / divisor);
}

std::string Decimal::to_string() const {
    auto mag = magnitude(units_);
    auto whole = mag / static_cast<unsigned __int128>(kScale);
    auto frac = mag % static_cast<unsigned __int128>(kScale);
    std::string out = units_ < 0 ? "-" : "";
    out += u128_to_string(whole);
    if (frac != 0) {
        std::string f = u128_to_string(frac);
        f.insert(0, static_cast<std::size_t>(kScaleDigits) - f.size(), '0');
        while (!f.empty() && f.back() == '0') f.pop_back();
        out += "." + f;
    }
    return out;
}

std::string Decimal::to_fixed(int places) const {
    places = std::clamp(places, 0, kScaleDigits);
    auto mag = magnitude(units_);
    auto step = static_cast<unsigned __int128>(pow10(kScaleDigits - places));
    auto rounded = (mag + step / 2) / step;
    auto denom = static_cast<unsigned __int128>(pow10(places));
    std::string out = (units_ < 0 && rounded != 0) ? "-" : "";
    out += u128_to_string(rounded / denom);
    if (places > 0) {
        std::string f = u128_to_string(rounded % denom);
        f.insert(0, static_cast<std::size_t>(places) - f.size(), '0');
        out += "." + f;
    }
    return out;
}

}  // namespace intentrag

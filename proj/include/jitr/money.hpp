#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace jitr {

// All currency math runs on int64 picodollars (1e-12 USD). Per-token prices
// are whole picodollars, so cumulative costs over millions of requests stay
// exact and brute-force summation matches the closed forms bit for bit.
struct Money {
    int64_t pico = 0;

    static constexpr int64_t kPicoPerUsd = 1'000'000'000'000LL;

    static Money from_pico(int64_t p) { return Money{p}; }
    static Money from_micros(int64_t micros) { return Money{micros * 1'000'000LL}; }
    static Money zero() { return Money{0}; }

    int64_t micros() const {
        // Round half away from zero at the display boundary only.
        int64_t q = pico / 1'000'000LL;
        int64_t r = pico % 1'000'000LL;
        if (r >= 500'000LL) ++q;
        if (r <= -500'000LL) --q;
        return q;
    }

    double usd() const { return static_cast<double>(pico) / static_cast<double>(kPicoPerUsd); }

    Money operator+(Money o) const { return Money{pico + o.pico}; }
    Money operator-(Money o) const { return Money{pico - o.pico}; }
    Money operator*(int64_t k) const { return Money{pico * k}; }
    Money& operator+=(Money o) { pico += o.pico; return *this; }
    bool operator==(const Money&) const = default;
    auto operator<=>(const Money&) const = default;
};

// Parses a non-negative decimal USD string ("4", "2.00", "0.000044") into
// exact picodollars. Rejects anything that needs more than 12 fractional
// digits rather than rounding silently.
inline Money parse_usd(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("empty money string");
    size_t i = 0;
    int64_t whole = 0;
    bool digits = false;
    for (; i < s.size() && s[i] != '.'; ++i) {
        if (s[i] < '0' || s[i] > '9') throw std::invalid_argument("bad money string: " + std::string(s));
        whole = whole * 10 + (s[i] - '0');
        digits = true;
    }
    int64_t frac = 0;
    int frac_digits = 0;
    if (i < s.size()) {
        ++i; // skip '.'
        for (; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9') throw std::invalid_argument("bad money string: " + std::string(s));
            if (++frac_digits > 12) throw std::invalid_argument("money string too precise: " + std::string(s));
            frac = frac * 10 + (s[i] - '0');
            digits = true;
        }
    }
    if (!digits) throw std::invalid_argument("bad money string: " + std::string(s));
    for (int d = frac_digits; d < 12; ++d) frac *= 10;
    return Money{whole * Money::kPicoPerUsd + frac};
}

// Fixed-point formatting without float round-trips: "$1420.77", "-$0.000044".
inline std::string format_usd(Money m, int max_decimals = 6) {
    int64_t p = m.pico;
    std::string sign;
    if (p < 0) { sign = "-"; p = -p; }
    int64_t whole = p / Money::kPicoPerUsd;
    int64_t frac = p % Money::kPicoPerUsd;
    std::string out = sign + "$" + std::to_string(whole);
    if (max_decimals <= 0) return out;
    std::string f = std::to_string(frac);
    f.insert(f.begin(), 12 - f.size(), '0');
    f.resize(static_cast<size_t>(max_decimals > 12 ? 12 : max_decimals));
    while (!f.empty() && f.back() == '0') f.pop_back();
    if (!f.empty()) out += "." + f;
    return out;
}

} // namespace jitr

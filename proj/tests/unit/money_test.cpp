#include <catch2/catch.hpp>

#include "jitr/money.hpp"

using namespace jitr;

TEST_CASE("usd strings parse to exact picodollars") {
    CHECK(parse_usd("0").pico == 0);
    CHECK(parse_usd("4").pico == 4 * Money::kPicoPerUsd);
    CHECK(parse_usd("4.00").pico == 4 * Money::kPicoPerUsd);
    CHECK(parse_usd("2.00").pico == 2'000'000'000'000LL);
    CHECK(parse_usd("0.01").pico == 10'000'000'000LL);
    CHECK(parse_usd("0.00088").pico == 880'000'000LL);
    CHECK(parse_usd("0.000044").pico == 44'000'000LL);
    CHECK_THROWS_AS(parse_usd(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_usd("1.2.3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_usd("abc"), std::invalid_argument);
    CHECK_THROWS_AS(parse_usd("1.0000000000001"), std::invalid_argument);
}

TEST_CASE("formatting round-trips cleanly") {
    CHECK(format_usd(parse_usd("1420.77")) == "$1420.77");
    CHECK(format_usd(parse_usd("0.000044")) == "$0.000044");
    CHECK(format_usd(parse_usd("8.4145")) == "$8.4145");
    CHECK(format_usd(Money::zero()) == "$0");
    CHECK(format_usd(Money{-parse_usd("0.5").pico}) == "-$0.5");
}

TEST_CASE("micros rounding happens only at the display boundary") {
    CHECK(Money{499'999}.micros() == 0);
    CHECK(Money{500'000}.micros() == 1);
    CHECK(Money{1'400'000}.micros() == 1);
    CHECK(Money{-500'000}.micros() == -1);
    CHECK(parse_usd("0.00088").micros() == 880);
}

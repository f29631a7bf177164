#include <doctest.h>

#include <umx/credits.hpp>

#include <cstdint>

using namespace umx;

TEST_SUITE("credits") {

TEST_CASE("parse accepts up to three fraction digits") {
  CHECK(Credits::parse("12")->millis() == 12000);
  CHECK(Credits::parse("12.5")->millis() == 12500);
  CHECK(Credits::parse("12.345")->millis() == 12345);
  CHECK(Credits::parse("0.001")->millis() == 1);
  CHECK(Credits::parse("-0.001")->millis() == -1);
  CHECK(Credits::parse("0")->millis() == 0);
  CHECK_FALSE(Credits::parse("").has_value());
  CHECK_FALSE(Credits::parse("-").has_value());
  CHECK(Credits::parse(".5")->millis() == 500);  // bare fraction is fine
  CHECK_FALSE(Credits::parse("1.").has_value());
  CHECK_FALSE(Credits::parse("1.2345").has_value());  // too precise
  CHECK_FALSE(Credits::parse("1,5").has_value());
  CHECK_FALSE(Credits::parse("1e3").has_value());
  CHECK_FALSE(Credits::parse("99999999999999999999").has_value());  // overflow
}

TEST_CASE("str always renders three decimals") {
  CHECK(Credits::from_millis(12345).str() == "12.345");
  CHECK(Credits::from_millis(12000).str() == "12.000");
  CHECK(Credits::from_millis(5).str() == "0.005");
  CHECK(Credits::from_millis(-10).str() == "-0.010");
  CHECK(Credits::zero().str() == "0.000");
}

TEST_CASE("parse and str round trip") {
  for (std::int64_t mc : {0LL, 1LL, -1LL, 999LL, 1000LL, 123456789LL, -50000LL}) {
    Credits c = Credits::from_millis(mc);
    auto back = Credits::parse(c.str());
    REQUIRE(back.has_value());
    CHECK(back->millis() == mc);
  }
}

TEST_CASE("arithmetic is exact integer milli-credits") {
  Credits a = Credits::parse("0.1").value();
  Credits sum;
  for (int i = 0; i < 10; ++i) sum += a;
  CHECK(sum == Credits::from_whole(1));  // no float drift
  CHECK((Credits::from_whole(5) - Credits::parse("2.5").value()).millis() == 2500);
  CHECK(Credits::from_millis(1).positive());
  CHECK(Credits::from_millis(-1).negative());
  CHECK(Credits::zero().is_zero());
  CHECK(Credits::from_millis(999) < Credits::from_whole(1));
}

TEST_CASE("scale multiplies unit price by integer quantity with overflow guard") {
  auto total = Credits::scale(Credits::parse("1.5").value(), 100);
  REQUIRE(total.has_value());
  CHECK(total->millis() == 150000);

  CHECK(Credits::scale(Credits::parse("0.001").value(), 1)->millis() == 1);
  CHECK(Credits::scale(Credits::from_whole(3), 0)->is_zero());

  // 2^62 milli-credits times 4 overflows int64 and must be refused.
  CHECK_FALSE(Credits::scale(Credits::from_millis(INT64_C(1) << 62), 4).has_value());
  CHECK_FALSE(Credits::scale(Credits::from_millis(INT64_MAX), 2).has_value());
}

}  // TEST_SUITE

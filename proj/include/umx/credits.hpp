#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

#include "umx/common.hpp"

namespace umx {

// Trade currency amount. Fixed point with 3 decimal places (milli-credits,
// int64 underneath) so balance arithmetic is exact and conservation checks
// can demand equality rather than tolerance. There is no exchange rate
// anywhere in the system: one credit is one credit for every utility.
class Credits {
 public:
  constexpr Credits() = default;

  static constexpr Credits from_millis(std::int64_t mc) { return Credits(mc); }
  static constexpr Credits from_whole(std::int64_t c) { return Credits(c * 1000); }
  static constexpr Credits zero() { return Credits(0); }

  // Parses "12", "12.5", "12.345", "-0.001". At most 3 fraction digits.
  static std::optional<Credits> parse(std::string_view s) {
    if (s.empty()) return std::nullopt;
    bool neg = false;
    std::size_t i = 0;
    if (s[0] == '-') {
      neg = true;
      i = 1;
    }
    if (i >= s.size()) return std::nullopt;
    std::int64_t whole = 0;
    bool any = false;
    for (; i < s.size() && s[i] != '.'; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      if (whole > (INT64_MAX - 9) / 10) return std::nullopt;
      whole = whole * 10 + (s[i] - '0');
      any = true;
    }
    std::int64_t frac = 0;
    if (i < s.size()) {
      ++i;  // skip '.'
      int digits = 0;
      for (; i < s.size(); ++i, ++digits) {
        if (s[i] < '0' || s[i] > '9' || digits >= 3) return std::nullopt;
        frac = frac * 10 + (s[i] - '0');
      }
      if (digits == 0) return std::nullopt;
      for (; digits < 3; ++digits) frac *= 10;
      any = true;
    }
    if (!any) return std::nullopt;
    auto mc = checked_mul(whole, 1000);
    if (!mc) return std::nullopt;
    std::int64_t v = *mc + frac;
    return Credits(neg ? -v : v);
  }

  std::int64_t millis() const { return mc_; }
  bool positive() const { return mc_ > 0; }
  bool negative() const { return mc_ < 0; }
  bool is_zero() const { return mc_ == 0; }

  // Always renders 3 decimals: "12.345", "-0.010".
  std::string str() const {
    std::int64_t v = mc_;
    std::string sign;
    if (v < 0) {
      sign = "-";
      v = -v;
    }
    std::string s = std::to_string(v / 1000);
    std::int64_t f = v % 1000;
    std::string fs = std::to_string(f);
    return sign + s + "." + std::string(3 - fs.size(), '0') + fs;
  }

  friend constexpr Credits operator+(Credits a, Credits b) { return Credits(a.mc_ + b.mc_); }
  friend constexpr Credits operator-(Credits a, Credits b) { return Credits(a.mc_ - b.mc_); }
  Credits& operator+=(Credits o) {
    mc_ += o.mc_;
    return *this;
  }
  Credits& operator-=(Credits o) {
    mc_ -= o.mc_;
    return *this;
  }
  auto operator<=>(const Credits&) const = default;

  // Scale by an integral quantity of utility units; exact by construction.
  static std::optional<Credits> scale(Credits unit_price, std::int64_t quantity) {
    auto p = checked_mul(unit_price.mc_, quantity);
    if (!p) return std::nullopt;
    return Credits(*p);
  }

 private:
  constexpr explicit Credits(std::int64_t mc) : mc_(mc) {}
  std::int64_t mc_ = 0;
};

}  // namespace umx

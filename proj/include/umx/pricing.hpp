#pragma once

#include <cstdint>
#include <string_view>

#include "umx/common.hpp"
#include "umx/credits.hpp"

namespace umx {

enum class PricingPolicy : std::uint8_t { Flat = 0, Dynamic = 1 };

inline const char* to_string(PricingPolicy p) {
  return p == PricingPolicy::Flat ? "flat" : "dynamic";
}

inline std::optional<PricingPolicy> pricing_policy_from(std::string_view s) {
  if (s == "flat") return PricingPolicy::Flat;
  if (s == "dynamic") return PricingPolicy::Dynamic;
  return std::nullopt;
}

// Knobs for a supplier's quoting rule. All fields are integers (milli
// scale) so every node quotes the same price for the same inputs.
struct PricingParams {
  Credits base;                     // unit price at target stock
  std::int64_t k_milli = 500;       // slope of the scarcity response
  std::int64_t floor_milli = 500;   // lowest multiplier
  std::int64_t ceil_milli = 2000;   // highest multiplier
  std::int64_t target_stock = 0;    // units considered "normal" inventory

  bool operator==(const PricingParams&) const = default;
};

// Quotes a unit price for the given stock level.
//
// Flat ignores stock. Dynamic scales the base price by
// 1 + k * (target - stock) / target, clamped to [floor, ceil]: scarce stock
// raises the price, surplus lowers it. Pure integer arithmetic with a
// single rounded division, so a quote can be recomputed bit-exactly from
// the recorded policy, params and stock level.
//
// Worked examples (base 2.000, k 500, floor 500, ceil 2000, target 100):
//   stock 100 -> multiplier 1.0           -> 2.000
//   stock   0 -> multiplier 1.5           -> 3.000
//   stock 300 -> multiplier -0.0, floored -> 1.000
inline Outcome<Credits> quote_price(PricingPolicy policy, const PricingParams& p,
                                    std::int64_t stock) {
  if (!p.base.positive()) return {Err::NonPositivePrice, "base " + p.base.str()};
  if (policy == PricingPolicy::Flat) return p.base;
  if (p.target_stock <= 0) return {Err::ZeroTargetStock, "dynamic pricing needs a target"};
  if (stock < 0) return {Err::InvalidQuantity, "negative stock"};

  using I = __int128;
  I target = p.target_stock;
  I num = 1000 * target + I(p.k_milli) * (target - I(stock));
  I lo = I(p.floor_milli) * target;
  I hi = I(p.ceil_milli) * target;
  if (num < lo) num = lo;
  if (num > hi) num = hi;
  I denom = 1000 * target;
  I scaled = I(p.base.millis()) * num;
  I mc = (scaled + denom / 2) / denom;  // round half up; prices are positive
  if (mc <= 0 || mc > INT64_MAX) return {Err::Overflow, "quoted price out of range"};
  return Credits::from_millis(static_cast<std::int64_t>(mc));
}

}  // namespace umx

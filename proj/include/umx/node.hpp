#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "umx/common.hpp"
#include "umx/credits.hpp"
#include "umx/ledger.hpp"
#include "umx/market.hpp"
#include "umx/pricing.hpp"

namespace umx {

// How a buyer scores a finished contract. Full delivery earns the top
// score, partial delivery the middle one, a revocation with nothing
// delivered the bottom one.
struct RatingPolicy {
  int full = 5;
  int partial = 3;
  int none = 1;

  int score(std::int64_t delivered, std::int64_t contracted) const {
    if (delivered >= contracted) return full;
    return delivered > 0 ? partial : none;
  }
};

// How a node lists surplus of one utility: pricing inputs plus sizing
// rules. `reserve` units are never listed; lots below `min_lot` wait for
// more production; listings stay valid for `valid_for` ticks.
struct OfferPolicy {
  PricingPolicy policy = PricingPolicy::Flat;
  PricingParams params;
  std::int64_t reserve = 0;
  std::int64_t min_lot = 1;
  Tick valid_for = 20;
};

// Per-utility inventory with three views: units on hand, units committed
// to accepted contracts (still on hand, not free), and units advertised on
// the market (reduced as the market reports sales).
class SupplyState {
 public:
  std::int64_t stock(const std::string& u) const { return get(stock_, u); }
  std::int64_t committed(const std::string& u) const { return get(committed_, u); }
  std::int64_t listed(const std::string& u) const { return get(listed_, u); }

  std::int64_t uncommitted(const std::string& u) const { return stock(u) - committed(u); }

  // Surplus a node could add to the market right now.
  std::int64_t listable(const std::string& u, std::int64_t reserve) const {
    return stock(u) - committed(u) - listed(u) - reserve;
  }

  void produce(const std::string& u, std::int64_t q) { stock_[u] += q; }
  void receive(const std::string& u, std::int64_t q) { stock_[u] += q; }

  // Consume from own stock; committed units are untouchable. Returns the
  // quantity actually taken.
  std::int64_t take_self(const std::string& u, std::int64_t want) {
    std::int64_t can = std::max<std::int64_t>(0, uncommitted(u));
    std::int64_t take = std::min(want, can);
    stock_[u] -= take;
    // Listings beyond what is still on hand will simply be declined when
    // the market proposes them.
    listed_[u] = std::min(listed_[u], std::max<std::int64_t>(0, uncommitted(u)));
    return take;
  }

  void list(const std::string& u, std::int64_t q) { listed_[u] += q; }

  // The market sold (or dropped) part of a listing.
  void unlist(const std::string& u, std::int64_t q) {
    listed_[u] = std::max<std::int64_t>(0, listed_[u] - q);
  }

  // Reserve stock for an accepted contract. Fails when free stock is short.
  Status reserve(const std::string& u, std::int64_t q) {
    if (uncommitted(u) < q)
      return Status::fail(Err::InvalidQuantity, "stock short for commitment");
    committed_[u] += q;
    return Status::success();
  }

  // Settle a commitment: `pushed` units left the premises, the full
  // commitment is released (undelivered remainder returns to free stock).
  void deliver(const std::string& u, std::int64_t pushed, std::int64_t committed_qty) {
    stock_[u] -= pushed;
    committed_[u] = std::max<std::int64_t>(0, committed_[u] - committed_qty);
  }

  // Drop a commitment without delivering.
  void release(const std::string& u, std::int64_t q) {
    committed_[u] = std::max<std::int64_t>(0, committed_[u] - q);
  }

 private:
  static std::int64_t get(const std::map<std::string, std::int64_t>& m, const std::string& u) {
    auto it = m.find(u);
    return it == m.end() ? 0 : it->second;
  }

  std::map<std::string, std::int64_t> stock_;
  std::map<std::string, std::int64_t> committed_;
  std::map<std::string, std::int64_t> listed_;
};

// Buyer-side purchase plan over an annotated offer list: cheapest first
// within a credit budget. Whatever cannot be covered is split into the
// part the market could not supply and the part the budget could not pay.
struct SelectionPlan {
  std::vector<MatchSlice> slices;
  std::int64_t unmet_supply = 0;
  std::int64_t unmet_credits = 0;

  std::int64_t planned() const {
    std::int64_t q = 0;
    for (const auto& s : slices) q += s.take;
    return q;
  }
  Credits cost() const {
    Credits c;
    for (const auto& s : slices)
      if (auto v = Credits::scale(s.offer.unit_price, s.take)) c += *v;
    return c;
  }
  std::int64_t unmet() const { return unmet_supply + unmet_credits; }
};

inline SelectionPlan plan_selection(std::vector<Offer> offers, std::int64_t need, Credits budget,
                                    const AccountId& self) {
  SelectionPlan plan;
  if (need <= 0) return plan;
  std::stable_sort(offers.begin(), offers.end(), offer_before);

  std::int64_t left = need;
  std::int64_t supply_seen = 0;
  Credits budget_left = budget;
  for (const auto& o : offers) {
    if (left == 0) break;
    if (o.supplier == self) continue;  // never buy own listing
    if (o.quantity <= 0 || !o.unit_price.positive()) continue;
    supply_seen += o.quantity;
    std::int64_t take = std::min(left, o.quantity);
    // Trim to what the remaining budget pays for.
    std::int64_t afford = budget_left.millis() / o.unit_price.millis();
    take = std::min(take, afford);
    if (take <= 0) continue;
    auto price = Credits::scale(o.unit_price, take);
    if (!price) continue;
    budget_left -= *price;
    left -= take;
    plan.slices.push_back(MatchSlice{o, take});
  }
  plan.unmet_supply = std::max<std::int64_t>(0, need - supply_seen);
  plan.unmet_credits = left - plan.unmet_supply;
  return plan;
}

// Edge-triggered low-balance alarm lives in currency.hpp (LowCreditMonitor);
// nodes keep one per wallet mirror.

// One demand event as the node resolved it, kept for run summaries.
struct DemandRecord {
  std::uint64_t id = 0;
  Tick tick = 0;
  std::string account;
  std::string utility;
  std::int64_t requested = 0;
  std::int64_t self_supplied = 0;
  std::int64_t contracted = 0;
  std::int64_t delivered = 0;
  std::int64_t unmet_supply = 0;
  std::int64_t unmet_credits = 0;

  std::int64_t unmet() const { return unmet_supply + unmet_credits; }
};

}  // namespace umx

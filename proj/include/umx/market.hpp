#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "umx/common.hpp"
#include "umx/credits.hpp"
#include "umx/crypto.hpp"
#include "umx/encoding.hpp"
#include "umx/pricing.hpp"

namespace umx {

// Market-computed standing of a supplier: mean service rating minus half a
// point per revocation, clamped to [0, 5]. Newcomers start neutral at 2.5.
// raw is the pre-clamp value, kept for analysis.
struct ReputationIndex {
  double value = 2.5;
  double raw = 2.5;
  std::int64_t n_ratings = 0;
  std::int64_t n_revocations = 0;

  // Fixed-point view used for display and serialization.
  std::int64_t milli() const { return std::llround(value * 1000.0); }
};

inline ReputationIndex reputation_index(const std::vector<int>& scores,
                                        std::int64_t revocations) {
  ReputationIndex idx;
  idx.n_ratings = static_cast<std::int64_t>(scores.size());
  idx.n_revocations = revocations;
  double base = 2.5;
  if (!scores.empty()) {
    std::int64_t sum = 0;
    for (int s : scores) sum += s;
    base = static_cast<double>(sum) / static_cast<double>(scores.size());
  }
  idx.raw = base - 0.5 * static_cast<double>(revocations);
  idx.value = std::clamp(idx.raw, 0.0, 5.0);
  return idx;
}

// A standing sale listed in the market directory. The supplier signs the
// economic fields, including the pricing inputs so any party can recompute
// the quote; the market adds submitted_at and the reputation annotation,
// which are excluded from the signature.
struct Offer {
  OfferId id;
  AccountId supplier;
  std::string utility;
  std::int64_t quantity = 0;  // units remaining
  Credits unit_price;
  Tick valid_from = 0;
  Tick valid_until = 0;
  PricingPolicy policy = PricingPolicy::Flat;
  PricingParams params;
  std::int64_t stock_at_quote = 0;
  Signature sig{};

  // set by the market, not the supplier
  Tick submitted_at = 0;
  ReputationIndex reputation;

  std::vector<std::uint8_t> signing_bytes() const {
    ByteWriter w;
    w.tag("OFR1");
    w.id(id);
    w.id(supplier);
    w.str(utility);
    w.i64(quantity);
    w.i64(unit_price.millis());
    w.i64(valid_from);
    w.i64(valid_until);
    w.u8(static_cast<std::uint8_t>(policy));
    w.i64(params.base.millis());
    w.i64(params.k_milli);
    w.i64(params.floor_milli);
    w.i64(params.ceil_milli);
    w.i64(params.target_stock);
    w.i64(stock_at_quote);
    return w.take();
  }
};

inline void sign_offer(Offer& o, const KeyPair& supplier_key) {
  o.sig = sign(supplier_key, o.signing_bytes());
}

// Listing order: cheapest first, then best reputation, then earliest
// submission, then offer id. A strict total order over distinct offers.
inline bool offer_before(const Offer& a, const Offer& b) {
  if (a.unit_price != b.unit_price) return a.unit_price < b.unit_price;
  if (a.reputation.value != b.reputation.value) return a.reputation.value > b.reputation.value;
  if (a.submitted_at != b.submitted_at) return a.submitted_at < b.submitted_at;
  return a.id < b.id;
}

struct MatchSlice {
  Offer offer;  // snapshot at match time
  std::int64_t take = 0;
};

struct MatchPlan {
  std::vector<MatchSlice> slices;
  std::int64_t remainder = 0;  // unfilled quantity; 0 when supply covered it

  std::int64_t filled() const {
    std::int64_t n = 0;
    for (const auto& s : slices) n += s.take;
    return n;
  }

  Credits cost() const {
    Credits c;
    for (const auto& s : slices) c += *Credits::scale(s.offer.unit_price, s.take);
    return c;
  }
};

// The posted-offer directory. Every listed offer is visible to every query
// (no hidden inventory); expired offers are purged; matching is greedy over
// the listing order, which is cost-minimal because quantities are divisible.
class MarketBook {
 public:
  using ReputationFn = std::function<ReputationIndex(const AccountId&)>;

  // Lists an offer. The reputation annotation is recomputed from the ledger
  // here; whatever the submitter put in that field is overwritten.
  Outcome<Offer> submit(Offer o, Tick now, const PubKey& supplier_key,
                        const ReputationFn& reputation) {
    if (o.quantity <= 0) return {Err::NonPositiveQuantity, std::to_string(o.quantity)};
    if (!o.unit_price.positive()) return {Err::NonPositivePrice, o.unit_price.str()};
    if (o.valid_until < now) return {Err::AlreadyExpired, "valid_until before now"};
    if (o.valid_from > o.valid_until) return {Err::AlreadyExpired, "empty validity window"};
    if (find(o.id)) return {Err::ScenarioInvalid, "duplicate offer id"};
    if (!verify(supplier_key, o.signing_bytes(), o.sig))
      return {Err::BadSignature, "offer signature invalid"};
    o.submitted_at = now;
    o.reputation = reputation ? reputation(o.supplier) : ReputationIndex{};
    offers_.push_back(o);
    return o;
  }

  // All live offers for a utility, best first.
  std::vector<Offer> query(std::string_view utility, Tick now) const {
    std::vector<Offer> out;
    for (const auto& o : offers_)
      if (o.utility == utility && o.valid_from <= now && now <= o.valid_until)
        out.push_back(o);
    std::sort(out.begin(), out.end(), offer_before);
    return out;
  }

  // Greedy fill in listing order, splitting across offers as needed.
  // Matched quantity is reserved immediately: offer remainders shrink and
  // sold-out offers delist. Short supply is not an error; the plan carries
  // the unfilled remainder. Offers from `exclude` are skipped so a node
  // never buys its own listing.
  MatchPlan match(std::string_view utility, std::int64_t need, Tick now,
                  const AccountId* exclude = nullptr) {
    MatchPlan plan;
    if (need <= 0) return plan;
    purge_expired(now);
    std::vector<Offer> ranked = query(utility, now);
    std::int64_t left = need;
    for (const auto& pick : ranked) {
      if (left == 0) break;
      if (exclude && pick.supplier == *exclude) continue;
      std::int64_t take = std::min(left, pick.quantity);
      MatchSlice slice{pick, take};
      slice.offer.quantity = pick.quantity;  // snapshot carries pre-take remaining
      plan.slices.push_back(std::move(slice));
      left -= take;
      reduce(pick.id, take);
    }
    plan.remainder = left;
    return plan;
  }

  // Returns reserved quantity to the book after a failed negotiation. If
  // the offer was delisted meanwhile it is relisted with its original
  // annotation and submission time.
  void restore(const MatchSlice& slice) {
    for (auto& o : offers_) {
      if (o.id == slice.offer.id) {
        o.quantity += slice.take;
        return;
      }
    }
    Offer back = slice.offer;
    back.quantity = slice.take;
    offers_.push_back(std::move(back));
  }

  std::size_t purge_expired(Tick now) {
    std::size_t before = offers_.size();
    std::erase_if(offers_, [now](const Offer& o) { return o.valid_until < now; });
    return before - offers_.size();
  }

  const Offer* find(const OfferId& id) const {
    for (const auto& o : offers_)
      if (o.id == id) return &o;
    return nullptr;
  }

  bool remove(const OfferId& id) {
    return std::erase_if(offers_, [&](const Offer& o) { return o.id == id; }) > 0;
  }

  // Takes quantity out of a listed offer, delisting it when drained.
  bool reduce(const OfferId& id, std::int64_t by) {
    for (auto& o : offers_) {
      if (o.id != id) continue;
      if (by > o.quantity) return false;
      o.quantity -= by;
      if (o.quantity == 0) remove(id);
      return true;
    }
    return false;
  }

  void clear() { offers_.clear(); }
  std::size_t size() const { return offers_.size(); }
  const std::vector<Offer>& all() const { return offers_; }

 private:
  std::vector<Offer> offers_;
};

}  // namespace umx

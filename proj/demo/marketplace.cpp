// Offer book mechanics in isolation: stock-driven quotes, ranked listing,
// greedy matching of a demand against price, reputation and age.

#include <umx/umx.hpp>

#include <cstdio>

using namespace umx;

static Offer make_offer(const KeyPair& kp, const char* tag, const char* utility,
                        std::int64_t qty, PricingPolicy policy, const PricingParams& params,
                        std::int64_t stock, Tick now) {
  Offer o;
  o.id = id16_from_hash<OfferTag>(sha256(std::string("offer:") + tag));
  o.supplier = account_id_from_pubkey(kp.pub);
  o.utility = utility;
  o.quantity = qty;
  o.unit_price = quote_price(policy, params, stock).value();
  o.valid_from = now;
  o.valid_until = now + 20;
  o.policy = policy;
  o.params = params;
  o.stock_at_quote = stock;
  o.sig = sign(kp, o.signing_bytes());
  return o;
}

int main() {
  // A dynamic quote rises when stock runs below target and falls when stock
  // piles up, clamped to a floor and ceiling around the base price.
  PricingParams dyn;
  dyn.base = Credits::parse("2").value();
  dyn.k_milli = 500;        // slope: 0.5x base per target of imbalance
  dyn.floor_milli = 500;    // never below 0.5x base
  dyn.ceil_milli = 2000;    // never above 2x base
  dyn.target_stock = 100;
  std::puts("dynamic quotes (base 2.000, target stock 100):");
  for (std::int64_t stock : {0, 50, 100, 200, 300, 1000}) {
    std::printf("  stock %4lld -> %s\n", static_cast<long long>(stock),
                quote_price(PricingPolicy::Dynamic, dyn, stock).value().str().c_str());
  }

  // Three suppliers post electricity. Ranking is price first, then supplier
  // reputation, then submission age, then id.
  KeyPair a = KeyPair::derive("alpha"), b = KeyPair::derive("beta"), c = KeyPair::derive("gamma");
  MarketBook book;
  auto reputation = [&](const AccountId& id) {
    ReputationIndex r;
    r.value = 2.5;
    if (id == account_id_from_pubkey(b.pub)) r.value = 4.5;
    return r;
  };
  PricingParams flat;
  flat.base = Credits::parse("1.4").value();
  book.submit(make_offer(a, "a", "Electricity", 60, PricingPolicy::Flat, flat, 60, 1), 1,
              a.pub, reputation);
  book.submit(make_offer(b, "b", "Electricity", 80, PricingPolicy::Flat, flat, 80, 1), 1,
              b.pub, reputation);
  book.submit(make_offer(c, "c", "Electricity", 50, PricingPolicy::Dynamic, dyn, 50, 2), 2,
              c.pub, reputation);

  std::puts("\nranked book at tick 3:");
  for (const auto& o : book.query("Electricity", 3)) {
    std::printf("  %lld @ %s  rep %s\n", static_cast<long long>(o.quantity),
                o.unit_price.str().c_str(),
                Credits::from_millis(o.reputation.milli()).str().c_str());
  }

  // Matching walks that order and slices offers until the demand is covered.
  auto plan = book.match("Electricity", 120, 3);
  std::puts("\nmatch 120 kWh:");
  for (const auto& s : plan.slices) {
    std::printf("  take %lld @ %s from offer %s\n", static_cast<long long>(s.take),
                s.offer.unit_price.str().c_str(), s.offer.id.hex().substr(0, 8).c_str());
  }
  std::printf("  remainder %lld\n", static_cast<long long>(plan.remainder));
  return 0;
}

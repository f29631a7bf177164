#include <doctest.h>

#include <umx/node.hpp>

using namespace umx;

namespace {

Credits cr(const char* s) { return Credits::parse(s).value(); }

AccountId account_of(const char* label) {
  return account_id_from_pubkey(KeyPair::derive(label).pub);
}

Offer plain_offer(std::uint8_t tag, const AccountId& who, std::int64_t qty,
                  const char* price) {
  Offer o;
  o.id.bytes[0] = tag;
  o.supplier = who;
  o.utility = "Electricity";
  o.quantity = qty;
  o.unit_price = cr(price);
  o.valid_until = 100;
  return o;
}

}  // namespace

TEST_SUITE("node") {

TEST_CASE("rating policy maps delivery outcomes to scores") {
  RatingPolicy p;
  CHECK(p.score(100, 100) == 5);
  CHECK(p.score(120, 100) == 5);  // over-delivery still earns full marks
  CHECK(p.score(1, 100) == 3);
  CHECK(p.score(99, 100) == 3);
  CHECK(p.score(0, 100) == 1);

  RatingPolicy strict{4, 2, 1};
  CHECK(strict.score(10, 10) == 4);
  CHECK(strict.score(5, 10) == 2);
  CHECK(strict.score(0, 10) == 1);
}

TEST_CASE("supply state tracks stock, commitments and listings per utility") {
  SupplyState s;
  CHECK(s.stock("Electricity") == 0);
  CHECK(s.listable("Electricity", 0) == 0);

  s.produce("Electricity", 100);
  s.receive("Electricity", 20);
  s.produce("Water", 7);
  CHECK(s.stock("Electricity") == 120);
  CHECK(s.stock("Water") == 7);  // utilities do not bleed into each other
  CHECK(s.uncommitted("Electricity") == 120);
  CHECK(s.listable("Electricity", 30) == 90);  // reserve held back

  s.list("Electricity", 50);
  CHECK(s.listed("Electricity") == 50);
  CHECK(s.listable("Electricity", 30) == 40);
  s.unlist("Electricity", 10);
  CHECK(s.listed("Electricity") == 40);
  s.unlist("Electricity", 999);  // floors at zero
  CHECK(s.listed("Electricity") == 0);
}

TEST_CASE("commitments make stock untouchable until settled") {
  SupplyState s;
  s.produce("Water", 100);
  CHECK(s.reserve("Water", 60).ok());
  CHECK(s.committed("Water") == 60);
  CHECK(s.uncommitted("Water") == 40);
  CHECK(s.reserve("Water", 41).code == Err::InvalidQuantity);
  CHECK(s.committed("Water") == 60);

  // Own consumption cannot eat committed stock.
  CHECK(s.take_self("Water", 100) == 40);
  CHECK(s.stock("Water") == 60);
  CHECK(s.uncommitted("Water") == 0);
  CHECK(s.take_self("Water", 5) == 0);

  // Delivery pushes units out and releases the whole commitment; the
  // undelivered remainder becomes free stock again.
  s.deliver("Water", 45, 60);
  CHECK(s.stock("Water") == 15);
  CHECK(s.committed("Water") == 0);
  CHECK(s.uncommitted("Water") == 15);
}

TEST_CASE("release drops a commitment without moving stock") {
  SupplyState s;
  s.produce("Data", 30);
  REQUIRE(s.reserve("Data", 30).ok());
  CHECK(s.uncommitted("Data") == 0);
  s.release("Data", 30);
  CHECK(s.stock("Data") == 30);
  CHECK(s.committed("Data") == 0);
  s.release("Data", 99);  // floors at zero
  CHECK(s.committed("Data") == 0);
}

TEST_CASE("consuming own stock trims listings that are no longer backed") {
  SupplyState s;
  s.produce("Electricity", 100);
  s.list("Electricity", 80);
  CHECK(s.take_self("Electricity", 50) == 50);
  // 50 remain on hand, so the 80-unit listing is trimmed to 50.
  CHECK(s.listed("Electricity") == 50);
}

TEST_CASE("selection plan: cheapest first until the need is met") {
  AccountId self = account_of("self"), a = account_of("a"), b = account_of("b");
  std::vector<Offer> offers = {plain_offer(2, b, 50, "1.2"), plain_offer(1, a, 100, "1")};

  auto plan = plan_selection(offers, 120, cr("1000"), self);
  REQUIRE(plan.slices.size() == 2);
  CHECK(plan.slices[0].offer.id.bytes[0] == 1);
  CHECK(plan.slices[0].take == 100);
  CHECK(plan.slices[1].offer.id.bytes[0] == 2);
  CHECK(plan.slices[1].take == 20);
  CHECK(plan.planned() == 120);
  CHECK(plan.cost() == cr("124"));  // 100 x 1.0 + 20 x 1.2
  CHECK(plan.unmet() == 0);
}

TEST_CASE("selection plan splits shortfalls into supply and credit causes") {
  AccountId self = account_of("self"), a = account_of("a");

  // Market holds 100, the buyer wants 120 and can only pay for 50.
  auto plan = plan_selection({plain_offer(1, a, 100, "1")}, 120, cr("50"), self);
  REQUIRE(plan.slices.size() == 1);
  CHECK(plan.slices[0].take == 50);
  CHECK(plan.unmet_supply == 20);    // the market never had these
  CHECK(plan.unmet_credits == 50);   // these were listed but unaffordable
  CHECK(plan.unmet() == 70);

  // The budget trims to whole affordable units.
  plan = plan_selection({plain_offer(1, a, 100, "1.2")}, 100, cr("25"), self);
  REQUIRE(plan.slices.size() == 1);
  CHECK(plan.slices[0].take == 20);  // 25 / 1.2 affords 20 whole units
  CHECK(plan.cost() == cr("24"));

  // No budget at all: everything listed becomes a credit shortfall.
  plan = plan_selection({plain_offer(1, a, 100, "1")}, 80, Credits::zero(), self);
  CHECK(plan.slices.empty());
  CHECK(plan.unmet_supply == 0);
  CHECK(plan.unmet_credits == 80);
}

TEST_CASE("selection plan never buys the node's own listing") {
  AccountId self = account_of("self"), other = account_of("other");
  auto plan = plan_selection(
      {plain_offer(1, self, 100, "0.5"), plain_offer(2, other, 40, "2")}, 60, cr("1000"),
      self);
  REQUIRE(plan.slices.size() == 1);
  CHECK(plan.slices[0].offer.supplier == other);
  CHECK(plan.slices[0].take == 40);
  // Own supply does not count toward what the market offered.
  CHECK(plan.unmet_supply == 20);
  CHECK(plan.unmet_credits == 0);
}

TEST_CASE("selection plan ignores degenerate offers and zero need") {
  AccountId self = account_of("self"), a = account_of("a");
  CHECK(plan_selection({plain_offer(1, a, 10, "1")}, 0, cr("10"), self).slices.empty());

  auto zero_qty = plain_offer(1, a, 0, "1");
  auto zero_price = plain_offer(2, a, 10, "1");
  zero_price.unit_price = Credits::zero();
  auto plan = plan_selection({zero_qty, zero_price, plain_offer(3, a, 10, "1")}, 10,
                             cr("100"), self);
  REQUIRE(plan.slices.size() == 1);
  CHECK(plan.slices[0].offer.id.bytes[0] == 3);
}

}  // TEST_SUITE

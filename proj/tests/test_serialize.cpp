#include <doctest.h>

#include <umx/serialize.hpp>

using namespace umx;

namespace {

Credits cr(const char* s) { return Credits::parse(s).value(); }

struct Cast {
  KeyPair state = KeyPair::derive("state");
  KeyPair buyer = KeyPair::derive("buyer");
  KeyPair seller = KeyPair::derive("seller");
  KeyPair out_key = KeyPair::derive("m:out");
  KeyPair in_key = KeyPair::derive("m:in");
  AccountId buyer_id = account_id_from_pubkey(buyer.pub);
  AccountId seller_id = account_id_from_pubkey(seller.pub);

  GenesisConfig config() const {
    GenesisConfig cfg;
    cfg.accounts = {{"state", state.pub}, {"buyer", buyer.pub}, {"seller", seller.pub}};
    cfg.state_account = "state";
    cfg.authorities = {"state", "seller"};
    cfg.meters = {{"feed", out_key.pub, "seller", "Electricity", Direction::Produced},
                  {"sink", in_key.pub, "buyer", "Electricity", Direction::Consumed}};
    cfg.tolerance_permille = 25;
    return cfg;
  }

  ContractTerms terms() const {
    ContractTerms t;
    t.id.bytes[0] = 0xAB;
    t.buyer = buyer_id;
    t.supplier = seller_id;
    t.utility = "Electricity";
    t.quantity = 72;
    t.unit_price = cr("1.25");
    t.deadline = 40;
    return t;
  }

  DeliveryProof proof() const {
    Meter out(MeterInfo{meter_id_from_pubkey(out_key.pub), out_key.pub, seller_id,
                        "Electricity", Direction::Produced, "feed"},
              out_key);
    Meter in(MeterInfo{meter_id_from_pubkey(in_key.pub), in_key.pub, buyer_id, "Electricity",
                       Direction::Consumed, "sink"},
             in_key);
    return build_proof(terms().id, seller_id, buyer_id, "Electricity",
                       out.sign_reading(70, 7).take(), in.sign_reading(70, 7).take(), 25)
        .take();
  }
};

// Deep equality through the wire format itself: serialize, parse, serialize
// again and compare the compact dumps byte for byte.
template <class T, class ToJson, class FromJson>
void roundtrips(const T& value, ToJson encode, FromJson decode) {
  json first = encode(value);
  auto back = decode(first);
  REQUIRE(back.ok());
  json second = encode(back.value());
  CHECK(first.dump() == second.dump());
}

}  // namespace

TEST_SUITE("serialize") {

TEST_CASE("genesis config survives the round trip") {
  Cast c;
  roundtrips(c.config(), config_to_json, config_from_json);

  auto cfg = config_from_json(config_to_json(c.config())).take();
  CHECK(cfg.accounts.size() == 3);
  CHECK(cfg.accounts[1].alias == "buyer");
  CHECK(cfg.accounts[1].pubkey == c.buyer.pub);
  CHECK(cfg.state_account == "state");
  CHECK(cfg.authorities == std::vector<std::string>{"state", "seller"});
  CHECK(cfg.meters.size() == 2);
  CHECK(cfg.meters[0].direction == Direction::Produced);
  CHECK(cfg.meters[1].direction == Direction::Consumed);
  CHECK(cfg.tolerance_permille == 25);
}

TEST_CASE("readings and proofs survive the round trip, bytes intact") {
  Cast c;
  DeliveryProof p = c.proof();
  roundtrips(p.supplied, reading_to_json, reading_from_json);
  roundtrips(p, proof_to_json, proof_from_json);

  // The parsed reading still verifies against the meter key: nothing was
  // lost or reordered in the byte layout.
  auto again = reading_from_json(reading_to_json(p.supplied)).take();
  CHECK(verify(c.out_key.pub, again.signing_bytes(), again.sig));
  auto proof_again = proof_from_json(proof_to_json(p)).take();
  CHECK(proof_again.bytes() == p.bytes());
}

TEST_CASE("contract terms survive the round trip") {
  Cast c;
  roundtrips(c.terms(), terms_to_json, terms_from_json);
  auto t = terms_from_json(terms_to_json(c.terms())).take();
  CHECK(t.quantity == 72);
  CHECK(t.unit_price == cr("1.25"));
  CHECK(t.deadline == 40);
}

TEST_CASE("every transaction kind survives the round trip") {
  Cast c;
  auto t = c.terms();
  std::vector<Transaction> txs = {
      make_mint(c.state, 1, c.buyer_id, cr("500")),
      make_transfer(c.buyer, 1, c.seller_id, cr("2.5"), "with a memo"),
      make_transfer(c.buyer, 2, c.seller_id, cr("1")),  // and without
      make_contract_create(c.buyer, 3, t, endorse_terms(c.seller, t)),
      make_fulfill(c.buyer, 4, c.proof()),
      make_revoke(c.seller, 1, t.id),
      make_revoke(c.seller, 2, t.id, c.proof()),
      make_rating(c.buyer, 5, t.id, 4),
  };

  for (const auto& tx : txs) {
    CAPTURE(tx_to_json(tx)["kind"].get<std::string>());
    roundtrips(tx, tx_to_json, tx_from_json);
    // Byte-level identity: signatures still verify after the round trip.
    auto back = tx_from_json(tx_to_json(tx)).take();
    CHECK(back.full_bytes() == tx.full_bytes());
  }
}

TEST_CASE("blocks round trip with their settlement effects") {
  Cast c;
  Block b;
  b.height = 3;
  b.prev_hash.fill(0x11);
  b.timestamp = 9;
  b.miner = c.seller_id;
  b.txs = {make_mint(c.state, 1, c.buyer_id, cr("10"))};
  b.effects = {{TxKind::Escrow, c.terms().id, c.buyer_id, c.buyer_id, cr("90")},
               {TxKind::Refund, c.terms().id, c.buyer_id, c.buyer_id, cr("90")}};
  b.hash = b.compute_hash();

  roundtrips(b, block_to_json, block_from_json);
  auto back = block_from_json(block_to_json(b)).take();
  CHECK(back.compute_hash() == b.hash);
  CHECK(back.effects.size() == 2);
  CHECK(back.effects[0].kind == TxKind::Escrow);
  CHECK(back.effects[1].amount == cr("90"));
}

TEST_CASE("ledger stream: export, import, re-export is byte identical") {
  Cast c;
  Ledger led = Ledger::create(c.config()).take();
  auto s1 = led.seal({make_mint(c.state, 1, c.buyer_id, cr("100"))},
                     led.expected_miner(0), 1);
  REQUIRE(s1.ok());
  auto t = c.terms();
  auto s2 = led.seal({make_contract_create(c.buyer, 1, t, endorse_terms(c.seller, t)),
                      make_transfer(c.buyer, 2, c.seller_id, cr("1"), "tip")},
                     led.expected_miner(1), 2);
  REQUIRE(s2.ok());
  REQUIRE(s2.value().rejected.empty());
  auto s3 = led.seal({make_fulfill(c.buyer, 3, c.proof())}, led.expected_miner(2), 8);
  REQUIRE(s3.ok());
  REQUIRE(s3.value().rejected.empty());

  std::string text = export_ledger(c.config(), led.chain());
  auto imported = import_ledger(text);
  REQUIRE(imported.ok());
  const auto& [cfg, blocks] = imported.value();
  CHECK(blocks.size() == 3);
  CHECK(export_ledger(cfg, blocks) == text);

  // The imported chain replays and verifies.
  auto verdict = verify_chain(cfg, blocks);
  CHECK(verdict.ok);
}

TEST_CASE("import rejects damaged streams with a parse error") {
  Cast c;
  Ledger led = Ledger::create(c.config()).take();
  REQUIRE(led.seal({make_mint(c.state, 1, c.buyer_id, cr("5"))}, led.expected_miner(0), 1).ok());
  std::string good = export_ledger(c.config(), led.chain());

  CHECK(import_ledger("not json at all\n").code() == Err::ParseError);
  CHECK(import_ledger("{\"type\":\"mystery\"}\n").code() == Err::ParseError);
  CHECK(import_ledger(good.substr(0, good.size() / 2)).code() == Err::ParseError);

  // A block line before the config line is out of order.
  auto nl = good.find('\n');
  std::string swapped = good.substr(nl + 1) + good.substr(0, nl + 1);
  CHECK_FALSE(import_ledger(swapped).ok());

  // Hex damage inside a block line is caught at parse time.
  std::string bent = good;
  auto pos = bent.find("\"sig\":\"");
  REQUIRE(pos != std::string::npos);
  bent[pos + 7] = 'z';
  CHECK_FALSE(import_ledger(bent).ok());
}

TEST_CASE("offer events round trip in every shape") {
  Cast c;
  Offer o;
  o.id.bytes[0] = 7;
  o.supplier = c.seller_id;
  o.utility = "Electricity";
  o.quantity = 40;
  o.unit_price = cr("2");
  o.valid_until = 30;
  o.params.base = cr("2");
  o.sig = sign(c.seller, o.signing_bytes());
  o.submitted_at = 4;
  o.reputation = reputation_index({5, 4}, 0);

  auto ev = [&](std::string kind) {
    OfferEvent e;
    e.tick = 6;
    e.event = std::move(kind);
    e.offer = o;
    e.id = o.id;
    e.qty = 15;
    return e;
  };
  for (const char* kind : {"post", "take", "restore", "remove", "clear"}) {
    CAPTURE(kind);
    json j = ev(kind).to_json();
    auto back = OfferEvent::from_json(j);
    REQUIRE(back.ok());
    CHECK(back.value().to_json().dump() == j.dump());
  }
  CHECK(OfferEvent::from_json(json{{"type", "block"}}).code() == Err::ParseError);

  // The annotations survive: a posted offer replays with its original
  // submission tick and reputation.
  auto back = OfferEvent::from_json(ev("post").to_json()).take();
  CHECK(back.offer.submitted_at == 4);
  CHECK(back.offer.reputation.milli() == 4500);
  CHECK(verify(c.seller.pub, back.offer.signing_bytes(), back.offer.sig));
}

TEST_CASE("replaying the event stream reconstructs the book at any tick") {
  Cast c;
  auto offer = [&](std::uint8_t tag, std::int64_t qty, Tick until) {
    Offer o;
    o.id.bytes[0] = tag;
    o.supplier = c.seller_id;
    o.utility = "Water";
    o.quantity = qty;
    o.unit_price = cr("1");
    o.valid_until = until;
    o.sig = sign(c.seller, o.signing_bytes());
    return o;
  };
  Offer a = offer(1, 100, 50), b = offer(2, 30, 8);

  std::vector<OfferEvent> events;
  auto push = [&](Tick tick, std::string kind, const Offer& o, std::int64_t qty) {
    OfferEvent e;
    e.tick = tick;
    e.event = std::move(kind);
    e.offer = o;
    e.id = o.id;
    e.qty = qty;
    events.push_back(e);
  };
  push(1, "post", a, 0);
  push(2, "post", b, 0);
  push(3, "take", a, 40);
  push(4, "restore", a, 10);
  push(5, "remove", b, 0);

  auto at = [&](Tick t) { return replay_offers(events, t); };
  CHECK(at(0).size() == 0);
  CHECK(at(1).find(a.id)->quantity == 100);
  CHECK(at(2).size() == 2);
  CHECK(at(3).find(a.id)->quantity == 60);
  CHECK(at(4).find(a.id)->quantity == 70);
  CHECK(at(5).find(b.id) == nullptr);
  CHECK(at(5).size() == 1);

  // Expiry pruning applies at the replay tick: b is gone by tick 9 even
  // before its removal event.
  auto early = replay_offers({events[0], events[1]}, 9);
  CHECK(early.find(b.id) == nullptr);
  CHECK(early.find(a.id) != nullptr);

  // A clear event empties the book.
  push(6, "clear", a, 0);
  CHECK(at(6).size() == 0);
}

}  // TEST_SUITE

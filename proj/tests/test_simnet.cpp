#include <doctest.h>

#include <umx/scenario.hpp>
#include <umx/serialize.hpp>
#include <umx/simnet.hpp>

#include <memory>
#include <sstream>

using namespace umx;

namespace {

// One supplier with a four-tick production window, one funded buyer, one
// demand. Sized so exactly one offer is listed and one contract forms.
json canon_doc() {
  return json::parse(R"({
    "name": "canon",
    "end_tick": 30,
    "contract_window": 12,
    "nodes": [
      {"name": "seller",
       "meters": [{"name": "gen", "utility": "Electricity", "direction": "produced",
                   "driver": {"kind": "scripted", "rate": 25, "from": 1, "until": 4}}],
       "offers": [{"utility": "Electricity", "policy": "flat", "base": "1",
                   "min_lot": 100, "valid_for": 25}]},
      {"name": "buyer", "initial_credits": "200",
       "meters": [{"name": "sink", "utility": "Electricity", "direction": "consumed"}]}
    ],
    "events": [
      {"kind": "demand", "tick": 8, "account": "buyer", "utility": "Electricity",
       "quantity": 60}
    ]
  })");
}

std::unique_ptr<Simulation> run_doc(const json& doc) {
  auto setup = parse_scenario(doc);
  REQUIRE(setup.ok());
  DriverRegistry drivers;
  auto sim = std::make_unique<Simulation>();
  REQUIRE(sim->init(setup.value(), drivers).ok());
  REQUIRE(sim->run().ok());
  return sim;
}

ContractId only_contract(const Simulation& sim) {
  REQUIRE(sim.ledger().contracts().size() == 1);
  return sim.ledger().contracts().begin()->first;
}

AccountId id_of(const Simulation& sim, const char* alias) {
  const AccountId* id = sim.ledger().account_id(alias);
  REQUIRE(id != nullptr);
  return *id;
}

bool books_clean(const Simulation& sim) {
  return sim.ledger().conserved() && sim.ledger().escrow_consistent();
}

bool log_mentions(const Simulation& sim, const char* needle) {
  for (const auto& line : sim.log())
    if (line.find(needle) != std::string::npos) return true;
  return false;
}

// Full observable surface of a run, for determinism comparisons.
std::string fingerprint(const Simulation& sim) {
  std::ostringstream out;
  out << export_ledger(sim.ledger().config(), sim.ledger().chain());
  for (const auto& e : sim.trace())
    if (!e.internal) out << format_trace_line(e) << "\n";
  for (const auto& ev : sim.offer_events()) out << ev.to_json().dump() << "\n";
  for (const auto& line : sim.log()) out << line << "\n";
  return out.str();
}

}  // namespace

TEST_SUITE("simnet") {

TEST_CASE("a market-mediated trade walks the fifteen canonical steps") {
  auto sim = run_doc(canon_doc());
  CHECK_FALSE(sim->fault_fired());

  ContractId cid = only_contract(*sim);
  const Contract* c = sim->ledger().contract(cid);
  CHECK(c->state == ContractState::Fulfilled);
  CHECK(c->terms.quantity == 60);
  CHECK(c->delivered == 60);
  CHECK(c->paid == Credits::from_whole(60));
  CHECK(c->refunded.is_zero());
  CHECK(c->rating == 5);

  // The filtered trade is exactly the numbered sequence 1..15.
  auto trade = extract_trade(sim->trace(), cid);
  auto steps = numbered_steps(trade);
  std::vector<int> want(15);
  for (int i = 0; i < 15; ++i) want[i] = i + 1;
  CHECK(steps == want);

  // Each numbered envelope carries the canonical kind.
  std::size_t k = 0;
  for (const auto& e : trade) {
    if (e.msg == 0) continue;
    REQUIRE(k < canonical_sequence().size());
    CHECK(e.kind == canonical_sequence()[k].kind);
    ++k;
  }

  // Money and chain are sound afterwards.
  CHECK(sim->ledger().credits().free(id_of(*sim, "buyer")) == Credits::from_whole(140));
  CHECK(sim->ledger().credits().free(id_of(*sim, "seller")) == Credits::from_whole(60));
  CHECK(books_clean(*sim));
  auto verdict = verify_chain(sim->ledger().config(), sim->ledger().chain());
  CHECK(verdict.ok);

  // The buyer's rating landed on the supplier's record.
  auto [scores, revocations] = sim->ledger().query_ratings(id_of(*sim, "seller"));
  CHECK(scores == std::vector<int>{5});
  CHECK(revocations == 0);

  // The demand is fully accounted.
  auto records = sim->demand_records();
  REQUIRE(records.size() == 1);
  CHECK(records[0].requested == 60);
  CHECK(records[0].contracted == 60);
  CHECK(records[0].delivered == 60);
  CHECK(records[0].unmet() == 0);
}

TEST_CASE("the same scenario replays byte for byte") {
  auto a = run_doc(canon_doc());
  auto b = run_doc(canon_doc());
  CHECK(fingerprint(*a) == fingerprint(*b));
  CHECK(a->ledger().chain().size() == b->ledger().chain().size());
  CHECK(to_hex(a->ledger().chain().back().hash) == to_hex(b->ledger().chain().back().hash));
}

TEST_CASE("a node covers its own demand from stock without market traffic") {
  json doc = json::parse(R"({
    "name": "selfsupply", "end_tick": 12,
    "nodes": [
      {"name": "pro",
       "meters": [
         {"name": "panel", "utility": "Electricity", "direction": "produced",
          "driver": {"kind": "scripted", "rate": 25, "from": 1, "until": 4}},
         {"name": "load", "utility": "Electricity", "direction": "consumed"}]}
    ],
    "events": [
      {"kind": "demand", "tick": 6, "account": "pro", "utility": "Electricity",
       "quantity": 40}
    ]
  })");
  auto sim = run_doc(doc);

  auto records = sim->demand_records();
  REQUIRE(records.size() == 1);
  CHECK(records[0].self_supplied == 40);
  CHECK(records[0].contracted == 0);
  CHECK(records[0].unmet() == 0);
  CHECK(sim->ledger().contracts().empty());
  CHECK(log_mentions(*sim, "self-supplied 40 Electricity"));

  // No demand ever reached the market.
  for (const auto& e : sim->trace()) CHECK(e.msg != 4);
  CHECK(books_clean(*sim));
}

TEST_CASE("drop-offer fault: the book is cleared and the demand goes unmet") {
  // The node lists at tick 4 and the book holds the offer from tick 5, so a
  // tick-6 drop catches it after posting and before the tick-8 demand.
  json doc = canon_doc();
  doc["fault"] = "drop-offer:6";
  auto sim = run_doc(doc);

  CHECK(sim->fault_fired());
  CHECK(log_mentions(*sim, "fault drop-offer cleared 1 listing(s)"));
  CHECK(log_mentions(*sim, "listing"));
  CHECK(sim->ledger().contracts().empty());

  auto records = sim->demand_records();
  REQUIRE(records.size() == 1);
  CHECK(records[0].contracted == 0);
  CHECK(records[0].unmet_supply == 60);

  // The cleared book shows up in the offer event stream as a clear record.
  bool cleared = false;
  for (const auto& ev : sim->offer_events()) cleared |= (ev.event == "clear");
  CHECK(cleared);
  CHECK(books_clean(*sim));
}

TEST_CASE("expire-mid-negotiation fault: the selection dies at the market") {
  json doc = canon_doc();
  doc["fault"] = "expire-mid-negotiation:3";
  auto sim = run_doc(doc);

  CHECK(sim->fault_fired());
  CHECK(log_mentions(*sim, "expire-mid-negotiation killed contract"));
  CHECK(log_mentions(*sim, "negotiation failed on contract"));
  CHECK(sim->ledger().contracts().empty());
  CHECK(sim->ledger().credits().free(id_of(*sim, "buyer")) == Credits::from_whole(200));

  auto records = sim->demand_records();
  REQUIRE(records.size() == 1);
  CHECK(records[0].unmet_supply == 60);
  CHECK(books_clean(*sim));
}

TEST_CASE("tamper-reading fault: the proof bounces and the contract expires") {
  json doc = canon_doc();
  doc["fault"] = "tamper-reading:1";  // armed until the first receipt reading
  auto sim = run_doc(doc);

  CHECK(sim->fault_fired());
  CHECK(log_mentions(*sim, "tamper-reading corrupted receipt"));

  ContractId cid = only_contract(*sim);
  const Contract* c = sim->ledger().contract(cid);
  CHECK(c->state == ContractState::Expired);
  CHECK(c->delivered == 0);
  CHECK(c->paid.is_zero());
  CHECK(c->refunded == Credits::from_whole(60));

  // The forged receipt never became a settlement; escrow went back whole.
  CHECK(sim->ledger().credits().free(id_of(*sim, "buyer")) == Credits::from_whole(200));
  CHECK(sim->ledger().credits().free(id_of(*sim, "seller")).is_zero());
  CHECK(log_mentions(*sim, "tx rejected by ledger"));
  CHECK(books_clean(*sim));
  CHECK(verify_chain(sim->ledger().config(), sim->ledger().chain()).ok);
}

TEST_CASE("push limit zero: the supplier revokes and takes the mark") {
  json doc = canon_doc();
  doc["nodes"][0]["push_limit"] = 0;
  auto sim = run_doc(doc);

  ContractId cid = only_contract(*sim);
  const Contract* c = sim->ledger().contract(cid);
  CHECK(c->state == ContractState::Revoked);
  CHECK(c->delivered == 0);
  CHECK(c->paid.is_zero());
  CHECK(c->refunded == Credits::from_whole(60));
  CHECK(log_mentions(*sim, "revoked contract"));
  CHECK(log_mentions(*sim, "nothing deliverable"));

  // Bottom score from the buyer plus a revocation mark on the supplier.
  CHECK(c->rating == 1);
  auto [scores, revocations] = sim->ledger().query_ratings(id_of(*sim, "seller"));
  CHECK(scores == std::vector<int>{1});
  CHECK(revocations == 1);

  CHECK(sim->ledger().credits().free(id_of(*sim, "buyer")) == Credits::from_whole(200));
  CHECK(books_clean(*sim));
}

TEST_CASE("push limit below the lot: partial delivery, partial score") {
  json doc = canon_doc();
  doc["nodes"][0]["push_limit"] = 40;
  auto sim = run_doc(doc);

  ContractId cid = only_contract(*sim);
  const Contract* c = sim->ledger().contract(cid);
  CHECK(c->state == ContractState::Fulfilled);
  CHECK(c->delivered == 40);
  CHECK(c->paid == Credits::from_whole(40));      // 40 units at 1.0
  CHECK(c->refunded == Credits::from_whole(20));  // the undelivered 20
  CHECK(c->rating == 3);

  auto records = sim->demand_records();
  REQUIRE(records.size() == 1);
  CHECK(records[0].delivered == 40);
  CHECK(records[0].unmet_supply == 20);
  CHECK(books_clean(*sim));
}

TEST_CASE("a run cut short reconciles unresolved purchases as unmet") {
  json doc = canon_doc();
  doc["end_tick"] = 14;  // the trade needs until about tick 19 to settle
  doc["events"][0]["tick"] = 10;
  auto sim = run_doc(doc);

  CHECK(log_mentions(*sim, "unresolved at end of run"));
  auto records = sim->demand_records();
  REQUIRE(records.size() == 1);
  CHECK(records[0].unmet_supply + records[0].delivered >= 60);

  // Whatever contracts exist are terminal and escrow fully drained.
  for (const auto& [id, c] : sim->ledger().contracts()) {
    CHECK(c.state != ContractState::Active);
    CHECK(c.paid + c.refunded == c.escrow);
  }
  Credits zero;
  for (const auto& node : sim->node_names())
    zero += sim->ledger().credits().escrowed(id_of(*sim, node.c_str()));
  CHECK(zero.is_zero());
  CHECK(books_clean(*sim));
}

TEST_CASE("scheduled transfers and mints land as ledger transactions") {
  json doc = canon_doc();
  doc["events"].push_back(json::parse(
      R"({"kind": "mint", "tick": 2, "to": "seller", "amount": 5})"));
  doc["events"].push_back(json::parse(
      R"({"kind": "transfer", "tick": 3, "from": "buyer", "to": "seller",
          "amount": "2.5", "memo": "standing order"})"));
  auto sim = run_doc(doc);

  // 200 initial - 2.5 transfer - 60 trade = 137.5; 5 mint + 2.5 + 60 = 67.5.
  CHECK(sim->ledger().credits().free(id_of(*sim, "buyer")) ==
        Credits::parse("137.5").value());
  CHECK(sim->ledger().credits().free(id_of(*sim, "seller")) ==
        Credits::parse("67.5").value());
  CHECK(sim->ledger().credits().minted() == Credits::from_whole(205));
  CHECK(books_clean(*sim));

  bool memo_seen = false;
  for (const auto& b : sim->ledger().chain())
    for (const auto& tx : b.txs)
      if (const auto* tr = std::get_if<TransferTx>(&tx.payload))
        memo_seen |= (tr->memo == "standing order");
  CHECK(memo_seen);
}

TEST_CASE("low balance warnings are edge-triggered during the run") {
  json doc = canon_doc();
  doc["nodes"][1]["initial_credits"] = "70";
  doc["nodes"][1]["low_credit_threshold"] = "50";
  auto sim = run_doc(doc);

  // The 60-credit escrow dips the buyer to 10, below the 50 threshold.
  CHECK(log_mentions(*sim, "buyer low credits"));
  CHECK(books_clean(*sim));
}

}  // TEST_SUITE

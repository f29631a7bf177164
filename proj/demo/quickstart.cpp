// Smallest end-to-end use of the ledger: mint credits, strike a delivery
// contract, prove delivery with signed meter readings, settle, rate.
// No market, no simulation; just the chain and its state.

#include <umx/umx.hpp>

#include <cstdio>

using namespace umx;

int main() {
  // Deterministic identities. Accounts and meters are key pairs; ids are
  // fingerprints of the public keys.
  KeyPair state = KeyPair::derive("state");
  KeyPair brewer = KeyPair::derive("brewer");
  KeyPair grower = KeyPair::derive("grower");
  KeyPair still = KeyPair::derive("meter:still");   // grower's production meter
  KeyPair vat = KeyPair::derive("meter:vat");       // brewer's consumption meter

  GenesisConfig cfg;
  cfg.accounts = {{"state", state.pub}, {"brewer", brewer.pub}, {"grower", grower.pub}};
  cfg.state_account = "state";
  cfg.authorities = {"state"};
  cfg.meters = {{"still", still.pub, "grower", "Water", Direction::Produced},
                {"vat", vat.pub, "brewer", "Water", Direction::Consumed}};

  auto ledger = Ledger::create(cfg);
  if (!ledger) { std::puts(ledger.message().c_str()); return 1; }
  Ledger& led = ledger.value();
  const AccountId& brewer_id = *led.account_id("brewer");
  const AccountId& grower_id = *led.account_id("grower");

  auto seal = [&](Transaction tx, Tick t) {
    auto sealed = led.seal({std::move(tx)}, led.expected_miner(led.chain().size()), t);
    if (!sealed) { std::printf("seal: %s\n", sealed.message().c_str()); return false; }
    for (const auto& r : sealed.value().rejected) {
      std::printf("rejected: %s\n", r.why.message().c_str());
      return false;
    }
    return true;
  };

  // Block 1: the state account mints working capital for the buyer.
  if (!seal(make_mint(state, 1, brewer_id, Credits::parse("250").value()), 1)) return 1;

  // Block 2: brewer buys 100 L at 1.5 credits each. The supplier endorses the
  // terms first; the buyer signs and submits. 150 credits move to escrow.
  ContractTerms terms;
  terms.id = id16_from_hash<ContractTag>(sha256("demo contract"));
  terms.buyer = brewer_id;
  terms.supplier = grower_id;
  terms.utility = "Water";
  terms.quantity = 100;
  terms.unit_price = Credits::parse("1.5").value();
  terms.deadline = 10;
  if (!seal(make_contract_create(brewer, 1, terms, endorse_terms(grower, terms)), 2)) return 1;
  std::printf("escrowed: %s (brewer free %s)\n",
              led.credits().escrowed(brewer_id).str().c_str(),
              led.credits().free(brewer_id).str().c_str());

  // Both meters sign the same quantity; the proof pairs the two readings.
  Meter producer({meter_id_from_pubkey(still.pub), still.pub, grower_id, "Water",
                  Direction::Produced, "still"},
                 still);
  Meter consumer({meter_id_from_pubkey(vat.pub), vat.pub, brewer_id, "Water",
                  Direction::Consumed, "vat"},
                 vat);
  auto supplied = producer.sign_reading(100, 3);
  auto received = consumer.sign_reading(100, 3);
  auto proof = build_proof(terms.id, grower_id, brewer_id, "Water", supplied.take(),
                           received.take(), led.tolerance_permille());
  if (!proof) { std::printf("proof: %s\n", proof.message().c_str()); return 1; }

  // Block 3: the buyer submits the proof; escrow releases pro rata (here in
  // full). Block 4: the buyer rates the trade.
  if (!seal(make_fulfill(brewer, 2, proof.take()), 3)) return 1;
  if (!seal(make_rating(brewer, 3, terms.id, 5), 4)) return 1;

  const Contract* c = led.contract(terms.id);
  std::printf("contract: %s, delivered %lld, paid %s, refunded %s, rating %d\n",
              to_string(c->state), static_cast<long long>(c->delivered),
              c->paid.str().c_str(), c->refunded.str().c_str(), c->rating);
  std::printf("balances: brewer %s, grower %s, conserved %s\n",
              led.credits().free(brewer_id).str().c_str(),
              led.credits().free(grower_id).str().c_str(),
              led.conserved() ? "yes" : "no");
  auto [scores, revocations] = led.query_ratings(grower_id);
  std::printf("grower reputation: %s\n",
              Credits::from_millis(reputation_index(scores, revocations).milli()).str().c_str());

  auto verdict = verify_chain(led.config(), led.chain());
  std::printf("chain verifies: %s\n", verdict.ok ? "yes" : verdict.why.c_str());
  return 0;
}

#pragma once

#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "umx/common.hpp"
#include "umx/ledger.hpp"
#include "umx/market.hpp"

namespace umx {

using json = nlohmann::json;

// JSON conventions, chosen so exports are byte-stable across platforms and
// re-exports: object keys sorted (nlohmann default), compact dump, amounts
// as integer milli-credits, binary fields hex-encoded, no floating point
// anywhere in the stream.

namespace detail {

template <typename IdT>
Outcome<IdT> id_from_hex(const std::string& s) {
  auto id = IdT::parse(s);
  if (!id) return {Err::ParseError, "bad id: " + s};
  return *id;
}

template <std::size_t N>
Outcome<std::array<std::uint8_t, N>> fixed_from_hex(const std::string& s) {
  auto raw = from_hex(s);
  if (!raw || raw->size() != N) return {Err::ParseError, "bad hex field"};
  std::array<std::uint8_t, N> out;
  std::copy(raw->begin(), raw->end(), out.begin());
  return out;
}

inline Outcome<Direction> direction_from(const std::string& s) {
  if (s == "Produced") return Direction::Produced;
  if (s == "Consumed") return Direction::Consumed;
  return {Err::ParseError, "bad direction: " + s};
}

}  // namespace detail

// --- genesis config ---------------------------------------------------------

inline json config_to_json(const GenesisConfig& cfg) {
  json j;
  j["type"] = "genesis_config";
  j["version"] = 1;
  j["accounts"] = json::array();
  for (const auto& a : cfg.accounts)
    j["accounts"].push_back({{"alias", a.alias}, {"pubkey", to_hex(a.pubkey)}});
  j["state_account"] = cfg.state_account;
  j["authorities"] = cfg.authorities;
  j["meters"] = json::array();
  for (const auto& m : cfg.meters)
    j["meters"].push_back({{"alias", m.alias},
                           {"pubkey", to_hex(m.pubkey)},
                           {"owner", m.owner},
                           {"utility", m.utility},
                           {"direction", to_string(m.direction)}});
  j["utilities"] = json::array();
  for (const auto& u : cfg.utilities)
    j["utilities"].push_back({{"name", u.name}, {"unit", u.unit}});
  j["tolerance_permille"] = cfg.tolerance_permille;
  return j;
}

inline Outcome<GenesisConfig> config_from_json(const json& j) {
  GenesisConfig cfg;
  if (j.value("type", "") != std::string("genesis_config"))
    return {Err::ParseError, "not a genesis_config record"};
  for (const auto& a : j.at("accounts")) {
    auto pk = detail::fixed_from_hex<32>(a.at("pubkey").get<std::string>());
    if (!pk) return {pk.code(), pk.detail()};
    cfg.accounts.push_back({a.at("alias").get<std::string>(), pk.value()});
  }
  cfg.state_account = j.at("state_account").get<std::string>();
  cfg.authorities = j.at("authorities").get<std::vector<std::string>>();
  for (const auto& m : j.at("meters")) {
    auto pk = detail::fixed_from_hex<32>(m.at("pubkey").get<std::string>());
    if (!pk) return {pk.code(), pk.detail()};
    auto dir = detail::direction_from(m.at("direction").get<std::string>());
    if (!dir) return {dir.code(), dir.detail()};
    cfg.meters.push_back({m.at("alias").get<std::string>(), pk.value(),
                          m.at("owner").get<std::string>(), m.at("utility").get<std::string>(),
                          dir.value()});
  }
  for (const auto& u : j.at("utilities"))
    cfg.utilities.push_back({u.at("name").get<std::string>(), u.at("unit").get<std::string>()});
  cfg.tolerance_permille = j.at("tolerance_permille").get<int>();
  return cfg;
}

// --- readings, proofs, transactions ------------------------------------------

inline json reading_to_json(const MeterReading& r) {
  return {{"meter", r.meter.hex()},
          {"owner", r.owner.hex()},
          {"direction", to_string(r.direction)},
          {"utility", r.utility},
          {"quantity", r.quantity},
          {"tick", r.tick},
          {"nonce", r.nonce},
          {"sig", to_hex(r.sig)}};
}

inline Outcome<MeterReading> reading_from_json(const json& j) {
  MeterReading r;
  auto meter = detail::id_from_hex<MeterId>(j.at("meter").get<std::string>());
  if (!meter) return {meter.code(), meter.detail()};
  r.meter = meter.value();
  auto owner = detail::id_from_hex<AccountId>(j.at("owner").get<std::string>());
  if (!owner) return {owner.code(), owner.detail()};
  r.owner = owner.value();
  auto dir = detail::direction_from(j.at("direction").get<std::string>());
  if (!dir) return {dir.code(), dir.detail()};
  r.direction = dir.value();
  r.utility = j.at("utility").get<std::string>();
  r.quantity = j.at("quantity").get<std::int64_t>();
  r.tick = j.at("tick").get<Tick>();
  r.nonce = j.at("nonce").get<std::uint64_t>();
  auto sig = detail::fixed_from_hex<64>(j.at("sig").get<std::string>());
  if (!sig) return {sig.code(), sig.detail()};
  r.sig = sig.value();
  return r;
}

inline json proof_to_json(const DeliveryProof& p) {
  return {{"contract", p.contract.hex()},
          {"supplied", reading_to_json(p.supplied)},
          {"received", reading_to_json(p.received)},
          {"quantity", p.quantity}};
}

inline Outcome<DeliveryProof> proof_from_json(const json& j) {
  DeliveryProof p;
  auto c = detail::id_from_hex<ContractId>(j.at("contract").get<std::string>());
  if (!c) return {c.code(), c.detail()};
  p.contract = c.value();
  auto s = reading_from_json(j.at("supplied"));
  if (!s) return {s.code(), s.detail()};
  p.supplied = s.take();
  auto r = reading_from_json(j.at("received"));
  if (!r) return {r.code(), r.detail()};
  p.received = r.take();
  p.quantity = j.at("quantity").get<std::int64_t>();
  return p;
}

inline json terms_to_json(const ContractTerms& t) {
  return {{"id", t.id.hex()},
          {"buyer", t.buyer.hex()},
          {"supplier", t.supplier.hex()},
          {"utility", t.utility},
          {"quantity", t.quantity},
          {"unit_price_mc", t.unit_price.millis()},
          {"deadline", t.deadline},
          {"offer", t.offer.hex()}};
}

inline Outcome<ContractTerms> terms_from_json(const json& j) {
  ContractTerms t;
  auto id = detail::id_from_hex<ContractId>(j.at("id").get<std::string>());
  if (!id) return {id.code(), id.detail()};
  t.id = id.value();
  auto buyer = detail::id_from_hex<AccountId>(j.at("buyer").get<std::string>());
  if (!buyer) return {buyer.code(), buyer.detail()};
  t.buyer = buyer.value();
  auto supplier = detail::id_from_hex<AccountId>(j.at("supplier").get<std::string>());
  if (!supplier) return {supplier.code(), supplier.detail()};
  t.supplier = supplier.value();
  t.utility = j.at("utility").get<std::string>();
  t.quantity = j.at("quantity").get<std::int64_t>();
  t.unit_price = Credits::from_millis(j.at("unit_price_mc").get<std::int64_t>());
  t.deadline = j.at("deadline").get<Tick>();
  auto offer = detail::id_from_hex<OfferId>(j.at("offer").get<std::string>());
  if (!offer) return {offer.code(), offer.detail()};
  t.offer = offer.value();
  return t;
}

inline json tx_to_json(const Transaction& tx) {
  json j;
  j["kind"] = to_string(tx.kind());
  j["signer"] = tx.signer.hex();
  j["seq"] = tx.seq;
  j["sig"] = to_hex(tx.sig);
  json p;
  std::visit(
      [&](const auto& pay) {
        using P = std::decay_t<decltype(pay)>;
        if constexpr (std::is_same_v<P, MintTx>) {
          p = {{"to", pay.to.hex()}, {"amount_mc", pay.amount.millis()}};
        } else if constexpr (std::is_same_v<P, TransferTx>) {
          p = {{"to", pay.to.hex()}, {"amount_mc", pay.amount.millis()}, {"memo", pay.memo}};
        } else if constexpr (std::is_same_v<P, ContractCreateTx>) {
          p = {{"terms", terms_to_json(pay.terms)}, {"supplier_sig", to_hex(pay.supplier_sig)}};
        } else if constexpr (std::is_same_v<P, ContractFulfillTx>) {
          p = {{"contract", pay.contract.hex()}, {"proof", proof_to_json(pay.proof)}};
        } else if constexpr (std::is_same_v<P, ContractRevokeTx>) {
          p = {{"contract", pay.contract.hex()}};
          if (pay.proof) p["proof"] = proof_to_json(*pay.proof);
        } else {
          p = {{"contract", pay.contract.hex()}, {"score", pay.score}};
        }
      },
      tx.payload);
  j["payload"] = std::move(p);
  return j;
}

inline Outcome<Transaction> tx_from_json(const json& j) {
  Transaction tx;
  auto signer = detail::id_from_hex<AccountId>(j.at("signer").get<std::string>());
  if (!signer) return {signer.code(), signer.detail()};
  tx.signer = signer.value();
  tx.seq = j.at("seq").get<std::uint64_t>();
  auto sig = detail::fixed_from_hex<64>(j.at("sig").get<std::string>());
  if (!sig) return {sig.code(), sig.detail()};
  tx.sig = sig.value();
  std::string kind = j.at("kind").get<std::string>();
  const json& p = j.at("payload");
  if (kind == "Mint" || kind == "Transfer") {
    auto to = detail::id_from_hex<AccountId>(p.at("to").get<std::string>());
    if (!to) return {to.code(), to.detail()};
    Credits amount = Credits::from_millis(p.at("amount_mc").get<std::int64_t>());
    if (kind == "Mint")
      tx.payload = MintTx{to.value(), amount};
    else
      tx.payload = TransferTx{to.value(), amount, p.at("memo").get<std::string>()};
  } else if (kind == "ContractCreate") {
    auto terms = terms_from_json(p.at("terms"));
    if (!terms) return {terms.code(), terms.detail()};
    auto ssig = detail::fixed_from_hex<64>(p.at("supplier_sig").get<std::string>());
    if (!ssig) return {ssig.code(), ssig.detail()};
    tx.payload = ContractCreateTx{terms.take(), ssig.value()};
  } else if (kind == "ContractFulfill") {
    auto c = detail::id_from_hex<ContractId>(p.at("contract").get<std::string>());
    if (!c) return {c.code(), c.detail()};
    auto proof = proof_from_json(p.at("proof"));
    if (!proof) return {proof.code(), proof.detail()};
    tx.payload = ContractFulfillTx{c.value(), proof.take()};
  } else if (kind == "ContractRevoke") {
    auto c = detail::id_from_hex<ContractId>(p.at("contract").get<std::string>());
    if (!c) return {c.code(), c.detail()};
    ContractRevokeTx rv{c.value(), std::nullopt};
    if (p.contains("proof")) {
      auto proof = proof_from_json(p.at("proof"));
      if (!proof) return {proof.code(), proof.detail()};
      rv.proof = proof.take();
    }
    tx.payload = std::move(rv);
  } else if (kind == "RatingStore") {
    auto c = detail::id_from_hex<ContractId>(p.at("contract").get<std::string>());
    if (!c) return {c.code(), c.detail()};
    tx.payload = RatingTx{c.value(), p.at("score").get<std::uint8_t>()};
  } else {
    return {Err::ParseError, "unknown tx kind: " + kind};
  }
  return tx;
}

// --- blocks -------------------------------------------------------------------

inline json block_to_json(const Block& b) {
  json j;
  j["type"] = "block";
  j["height"] = b.height;
  j["prev_hash"] = to_hex(b.prev_hash);
  j["hash"] = to_hex(b.hash);
  j["miner"] = b.miner.hex();
  j["timestamp"] = b.timestamp;
  j["txs"] = json::array();
  for (const auto& tx : b.txs) j["txs"].push_back(tx_to_json(tx));
  j["effects"] = json::array();
  for (const auto& e : b.effects)
    j["effects"].push_back({{"kind", to_string(e.kind)},
                            {"contract", e.contract.hex()},
                            {"from", e.from.hex()},
                            {"to", e.to.hex()},
                            {"amount_mc", e.amount.millis()}});
  return j;
}

inline Outcome<Block> block_from_json(const json& j) {
  if (j.value("type", "") != std::string("block")) return {Err::ParseError, "not a block record"};
  Block b;
  b.height = j.at("height").get<std::uint64_t>();
  auto prev = detail::fixed_from_hex<32>(j.at("prev_hash").get<std::string>());
  if (!prev) return {prev.code(), prev.detail()};
  b.prev_hash = prev.value();
  auto hash = detail::fixed_from_hex<32>(j.at("hash").get<std::string>());
  if (!hash) return {hash.code(), hash.detail()};
  b.hash = hash.value();
  auto miner = detail::id_from_hex<AccountId>(j.at("miner").get<std::string>());
  if (!miner) return {miner.code(), miner.detail()};
  b.miner = miner.value();
  b.timestamp = j.at("timestamp").get<Tick>();
  for (const auto& t : j.at("txs")) {
    auto tx = tx_from_json(t);
    if (!tx) return {tx.code(), tx.detail()};
    b.txs.push_back(tx.take());
  }
  for (const auto& e : j.at("effects")) {
    SettlementEntry se;
    std::string kind = e.at("kind").get<std::string>();
    if (kind == "Escrow")
      se.kind = TxKind::Escrow;
    else if (kind == "Release")
      se.kind = TxKind::Release;
    else if (kind == "Refund")
      se.kind = TxKind::Refund;
    else
      return {Err::ParseError, "bad effect kind: " + kind};
    auto c = detail::id_from_hex<ContractId>(e.at("contract").get<std::string>());
    if (!c) return {c.code(), c.detail()};
    se.contract = c.value();
    auto from = detail::id_from_hex<AccountId>(e.at("from").get<std::string>());
    if (!from) return {from.code(), from.detail()};
    se.from = from.value();
    auto to = detail::id_from_hex<AccountId>(e.at("to").get<std::string>());
    if (!to) return {to.code(), to.detail()};
    se.to = to.value();
    se.amount = Credits::from_millis(e.at("amount_mc").get<std::int64_t>());
    b.effects.push_back(std::move(se));
  }
  return b;
}

// --- ledger stream --------------------------------------------------------------

// One JSON record per line: the genesis configuration first, then every
// block in height order. Re-exporting an imported stream reproduces it byte
// for byte.
inline std::string export_ledger(const GenesisConfig& cfg, const std::vector<Block>& blocks) {
  std::string out = config_to_json(cfg).dump();
  out += '\n';
  for (const auto& b : blocks) {
    out += block_to_json(b).dump();
    out += '\n';
  }
  return out;
}

inline Outcome<std::pair<GenesisConfig, std::vector<Block>>> import_ledger(std::string_view text) {
  std::pair<GenesisConfig, std::vector<Block>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  bool have_config = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      return {Err::ParseError, "line " + std::to_string(line_no) + ": not valid JSON"};
    try {
      if (!have_config) {
        auto cfg = config_from_json(j);
        if (!cfg) return {cfg.code(), "line " + std::to_string(line_no) + ": " + cfg.detail()};
        out.first = cfg.take();
        have_config = true;
      } else {
        auto b = block_from_json(j);
        if (!b) return {b.code(), "line " + std::to_string(line_no) + ": " + b.detail()};
        out.second.push_back(b.take());
      }
    } catch (const json::exception& e) {
      return {Err::ParseError, "line " + std::to_string(line_no) + ": " + e.what()};
    }
  }
  if (!have_config) return {Err::ParseError, "empty ledger stream"};
  return out;
}

// --- market offers ----------------------------------------------------------------

inline json offer_to_json(const Offer& o) {
  return {{"id", o.id.hex()},
          {"supplier", o.supplier.hex()},
          {"utility", o.utility},
          {"quantity", o.quantity},
          {"unit_price_mc", o.unit_price.millis()},
          {"valid_from", o.valid_from},
          {"valid_until", o.valid_until},
          {"policy", to_string(o.policy)},
          {"params",
           {{"base_mc", o.params.base.millis()},
            {"k_milli", o.params.k_milli},
            {"floor_milli", o.params.floor_milli},
            {"ceil_milli", o.params.ceil_milli},
            {"target_stock", o.params.target_stock}}},
          {"stock_at_quote", o.stock_at_quote},
          {"sig", to_hex(o.sig)},
          {"submitted_at", o.submitted_at},
          {"reputation",
           {{"value_milli", o.reputation.milli()},
            {"n_ratings", o.reputation.n_ratings},
            {"n_revocations", o.reputation.n_revocations}}}};
}

inline Outcome<Offer> offer_from_json(const json& j) {
  Offer o;
  auto id = detail::id_from_hex<OfferId>(j.at("id").get<std::string>());
  if (!id) return {id.code(), id.detail()};
  o.id = id.value();
  auto supplier = detail::id_from_hex<AccountId>(j.at("supplier").get<std::string>());
  if (!supplier) return {supplier.code(), supplier.detail()};
  o.supplier = supplier.value();
  o.utility = j.at("utility").get<std::string>();
  o.quantity = j.at("quantity").get<std::int64_t>();
  o.unit_price = Credits::from_millis(j.at("unit_price_mc").get<std::int64_t>());
  o.valid_from = j.at("valid_from").get<Tick>();
  o.valid_until = j.at("valid_until").get<Tick>();
  auto pol = pricing_policy_from(j.at("policy").get<std::string>());
  if (!pol) return {Err::ParseError, "bad policy"};
  o.policy = *pol;
  const json& p = j.at("params");
  o.params.base = Credits::from_millis(p.at("base_mc").get<std::int64_t>());
  o.params.k_milli = p.at("k_milli").get<std::int64_t>();
  o.params.floor_milli = p.at("floor_milli").get<std::int64_t>();
  o.params.ceil_milli = p.at("ceil_milli").get<std::int64_t>();
  o.params.target_stock = p.at("target_stock").get<std::int64_t>();
  o.stock_at_quote = j.at("stock_at_quote").get<std::int64_t>();
  auto sig = detail::fixed_from_hex<64>(j.at("sig").get<std::string>());
  if (!sig) return {sig.code(), sig.detail()};
  o.sig = sig.value();
  o.submitted_at = j.at("submitted_at").get<Tick>();
  const json& r = j.at("reputation");
  o.reputation.value = static_cast<double>(r.at("value_milli").get<std::int64_t>()) / 1000.0;
  o.reputation.raw = o.reputation.value;
  o.reputation.n_ratings = r.at("n_ratings").get<std::int64_t>();
  o.reputation.n_revocations = r.at("n_revocations").get<std::int64_t>();
  return o;
}

// Market directory event: enough to replay the book to any tick.
struct OfferEvent {
  Tick tick = 0;
  std::string event;  // post | take | restore | remove | clear
  Offer offer;        // full snapshot for post/restore
  OfferId id;         // target for take/remove
  std::int64_t qty = 0;  // take/restore quantity

  json to_json() const {
    json j;
    j["type"] = "offer_event";
    j["tick"] = tick;
    j["event"] = event;
    if (event == "post" || event == "restore") j["offer"] = offer_to_json(offer);
    if (event == "take" || event == "remove") j["id"] = id.hex();
    if (event == "take" || event == "restore") j["qty"] = qty;
    return j;
  }

  static Outcome<OfferEvent> from_json(const json& j) {
    OfferEvent ev;
    if (j.value("type", "") != std::string("offer_event"))
      return {Err::ParseError, "not an offer_event record"};
    ev.tick = j.at("tick").get<Tick>();
    ev.event = j.at("event").get<std::string>();
    if (ev.event == "post" || ev.event == "restore") {
      auto o = offer_from_json(j.at("offer"));
      if (!o) return {o.code(), o.detail()};
      ev.offer = o.take();
      ev.id = ev.offer.id;
    }
    if (j.contains("id")) {
      auto id = detail::id_from_hex<OfferId>(j.at("id").get<std::string>());
      if (!id) return {id.code(), id.detail()};
      ev.id = id.value();
    }
    ev.qty = j.value("qty", std::int64_t{0});
    return ev;
  }
};

// Replays directory events up to and including `at`, then prunes to what a
// live query at that tick would show.
inline MarketBook replay_offers(const std::vector<OfferEvent>& events, Tick at) {
  MarketBook book;
  for (const auto& ev : events) {
    if (ev.tick > at) break;
    if (ev.event == "post") {
      MatchSlice s{ev.offer, ev.offer.quantity};
      book.restore(s);  // insert preserving annotation and submitted_at
    } else if (ev.event == "take") {
      book.reduce(ev.id, ev.qty);
    } else if (ev.event == "restore") {
      MatchSlice s{ev.offer, ev.qty};
      book.restore(s);
    } else if (ev.event == "remove") {
      book.remove(ev.id);
    } else if (ev.event == "clear") {
      book.clear();
    }
  }
  book.purge_expired(at);
  return book;
}

}  // namespace umx

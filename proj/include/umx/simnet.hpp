#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "umx/common.hpp"
#include "umx/credits.hpp"
#include "umx/crypto.hpp"
#include "umx/ledger.hpp"
#include "umx/market.hpp"
#include "umx/metering.hpp"
#include "umx/node.hpp"
#include "umx/pricing.hpp"
#include "umx/serialize.hpp"

namespace umx {

// ---------------------------------------------------------------------------
// Protocol messages. Numbered steps 1..15 form the canonical trade; every
// other payload travels as an auxiliary envelope (msg 0).
// ---------------------------------------------------------------------------

struct MsgReading {  // 1 production, 11 delivery, 12 receipt
  MeterReading reading;
};

struct MsgOfferSubmit {  // 2
  Offer offer;
  MeterId source_meter;        // production reading that backed this listing
  std::uint64_t source_nonce = 0;
};

struct MsgRepQuery {  // 3
  AccountId subject;
};

struct MsgRepReply {  // aux: ledger answers 3
  AccountId subject;
  ReputationIndex rep;
};

struct MsgDemandQuery {  // 4
  std::uint64_t demand = 0;
  std::string utility;
  std::int64_t quantity = 0;
};

struct MsgOfferList {  // 5
  std::uint64_t demand = 0;
  std::vector<Offer> offers;
};

struct MsgSelection {  // 6: buyer-signed creation, endorsement still missing
  std::uint64_t demand = 0;
  ContractTerms terms;
  Transaction tx;
};

struct MsgProposal {  // 7
  ContractTerms terms;
};

struct MsgAccept {  // 8 when accepted; aux decline otherwise
  ContractTerms terms;
  Signature endorsement{};
  bool accepted = false;
  std::string reason;
};

struct MsgTxSubmit {  // 9 contract, 13 proof, 15 rating; aux for the rest
  Transaction tx;
};

struct MsgConfirmation {  // 10
  ContractTerms terms;
};

struct MsgHandoff {  // aux: supplier hands the delivery reading to the buyer
  ContractId contract;
  MeterReading supplied;
  bool partial = false;
};

struct MsgSettlement {  // 14
  ContractId contract;
  ContractState state = ContractState::Fulfilled;
  std::int64_t delivered = 0;
  Credits paid;
  Credits refunded;
};

struct MsgReject {  // aux: ledger bounced a transaction back to its sender
  Transaction tx;
  Status why;
};

struct MsgBalance {  // aux: ledger pushes wallet changes to the owner
  AccountId account;
  Credits free;
  Credits escrowed;
};

struct MsgOfferGone {  // aux: negotiation died before reaching the ledger
  std::uint64_t demand = 0;
  ContractId contract;
  OfferId offer;
  std::string reason;
};

struct MsgOfferRejected {  // aux: market refused or dropped a listing
  Offer offer;
  std::string reason;
};

struct MsgExpired {  // aux: contract expired, escrow refunded
  ContractId contract;
};

// Internal scheduler events, delivered to the owning node itself.
struct EvDemand {
  std::uint64_t id = 0;
  std::string utility;
  std::int64_t quantity = 0;
};

struct EvTransfer {
  AccountId to;
  Credits amount;
  std::string memo;
};

struct EvMint {
  AccountId to;
  Credits amount;
};

using Payload =
    std::variant<MsgReading, MsgOfferSubmit, MsgRepQuery, MsgRepReply, MsgDemandQuery,
                 MsgOfferList, MsgSelection, MsgProposal, MsgAccept, MsgTxSubmit,
                 MsgConfirmation, MsgHandoff, MsgSettlement, MsgReject, MsgBalance,
                 MsgOfferGone, MsgOfferRejected, MsgExpired, EvDemand, EvTransfer, EvMint>;

// One message in flight. Meter and local deliveries land the same tick,
// network hops take one tick. Correlation handles stay zero when unused.
struct Envelope {
  std::uint64_t no = 0;  // global enqueue order; ties within a tick keep it
  Tick sent = 0;
  Tick at = 0;
  std::string from;
  std::string to;
  int msg = 0;  // canonical step number, 0 for auxiliary traffic
  std::string kind;
  OfferId offer;
  std::uint64_t demand = 0;
  ContractId contract;
  MeterId meter;
  std::uint64_t nonce = 0;
  bool internal = false;  // scheduler bookkeeping, kept out of the trace
  std::string note;
  Payload payload;
};

inline std::string format_trace_line(const Envelope& e) {
  std::string s = "tick=" + std::to_string(e.at) + " msg=" + std::to_string(e.msg) + " " +
                  e.from + "→" + e.to + " " + e.kind;
  if (!e.note.empty()) s += " " + e.note;
  return s;
}

// The fifteen numbered steps of a market-mediated trade.
struct CanonicalStep {
  int msg;
  const char* kind;
  const char* from;
  const char* to;
};

inline const std::array<CanonicalStep, 15>& canonical_sequence() {
  static const std::array<CanonicalStep, 15> steps{{
      {1, "reading", "producer meter", "supplier"},
      {2, "offer", "supplier", "market"},
      {3, "reputation_query", "market", "ledger"},
      {4, "demand_query", "consumer", "market"},
      {5, "offer_list", "market", "consumer"},
      {6, "selection", "consumer", "market"},
      {7, "proposal", "market", "supplier"},
      {8, "acceptance", "supplier", "market"},
      {9, "contract_submit", "market", "ledger"},
      {10, "confirmation", "ledger", "parties"},
      {11, "delivery_reading", "supplier meter", "supplier"},
      {12, "receipt_reading", "consumer meter", "consumer"},
      {13, "delivery_proof", "consumer", "ledger"},
      {14, "settlement", "ledger", "parties"},
      {15, "rating", "consumer", "ledger"},
  }};
  return steps;
}

// Everything in the trace that belongs to one contract's trade: its own
// envelopes plus the demand, offer and production-reading envelopes that
// led to it. Broadcast steps (10, 14) are deduplicated to their first
// delivery. Auxiliary envelopes for the contract are included.
inline std::vector<Envelope> extract_trade(const std::vector<Envelope>& trace,
                                           const ContractId& contract) {
  std::uint64_t demand = 0;
  OfferId offer;
  for (const auto& e : trace) {
    if (e.msg == 6 && e.contract == contract) {
      demand = e.demand;
      offer = e.offer;
      break;
    }
  }
  MeterId src_meter;
  std::uint64_t src_nonce = 0;
  if (!offer.is_zero()) {
    for (const auto& e : trace) {
      if (e.msg == 2 && e.offer == offer) {
        src_meter = e.meter;
        src_nonce = e.nonce;
        break;
      }
    }
  }
  std::vector<Envelope> out;
  bool seen10 = false, seen14 = false;
  for (const auto& e : trace) {
    bool mine = false;
    if (e.contract == contract && !e.contract.is_zero()) mine = true;
    else if ((e.msg == 4 || e.msg == 5) && demand != 0 && e.demand == demand) mine = true;
    else if ((e.msg == 2 || e.msg == 3) && !offer.is_zero() && e.offer == offer) mine = true;
    else if (e.msg == 1 && src_nonce != 0 && e.meter == src_meter && e.nonce == src_nonce)
      mine = true;
    if (!mine) continue;
    if (e.msg == 10) {
      if (seen10) continue;
      seen10 = true;
    }
    if (e.msg == 14) {
      if (seen14) continue;
      seen14 = true;
    }
    out.push_back(e);
  }
  return out;
}

inline std::vector<int> numbered_steps(const std::vector<Envelope>& trade) {
  std::vector<int> out;
  for (const auto& e : trade)
    if (e.msg > 0) out.push_back(e.msg);
  return out;
}

// ---------------------------------------------------------------------------
// Fault injection: a single switchable defect per run.
// ---------------------------------------------------------------------------

struct FaultPlan {
  enum class Kind { None, DropOffer, ExpireMidNegotiation, TamperReading };
  Kind kind = Kind::None;
  Tick at = 0;

  static const char* name(Kind k) {
    switch (k) {
      case Kind::None: return "none";
      case Kind::DropOffer: return "drop-offer";
      case Kind::ExpireMidNegotiation: return "expire-mid-negotiation";
      case Kind::TamperReading: return "tamper-reading";
    }
    return "?";
  }
};

inline Outcome<FaultPlan> parse_fault(std::string_view spec) {
  FaultPlan plan;
  if (spec.empty() || spec == "none") return plan;
  auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    return {Err::ParseError, "fault spec wants kind:tick"};
  std::string_view kind = spec.substr(0, colon);
  std::string_view tick = spec.substr(colon + 1);
  if (kind == "drop" || kind == "drop-offer")
    plan.kind = FaultPlan::Kind::DropOffer;
  else if (kind == "expire" || kind == "expire-mid-negotiation")
    plan.kind = FaultPlan::Kind::ExpireMidNegotiation;
  else if (kind == "tamper" || kind == "tamper-reading")
    plan.kind = FaultPlan::Kind::TamperReading;
  else
    return {Err::ParseError, "unknown fault kind: " + std::string(kind)};
  Tick t = 0;
  if (tick.empty()) return {Err::ParseError, "fault tick missing"};
  for (char c : tick) {
    if (c < '0' || c > '9') return {Err::ParseError, "fault tick not a number"};
    t = t * 10 + (c - '0');
    if (t > 1'000'000'000) return {Err::ParseError, "fault tick out of range"};
  }
  plan.at = t;
  return plan;
}

// ---------------------------------------------------------------------------
// Simulation setup, filled by hand or from a scenario file.
// ---------------------------------------------------------------------------

struct ScheduledEvent {
  enum class Kind { Demand, Transfer, Mint };
  Kind kind = Kind::Demand;
  Tick tick = 0;
  std::string account;  // demand consumer / transfer sender; mints come from the state
  std::string utility;
  std::int64_t quantity = 0;
  std::string to;  // transfer and mint recipient alias
  Credits amount;
  std::string memo;
};

struct MeterSetup {
  std::string alias;
  std::string utility;
  Direction direction = Direction::Produced;
  std::string driver;  // empty for passive meters
  DriverRegistry::Params driver_params;
};

struct NodeSetup {
  std::string name;
  Credits initial_credits;
  Credits low_threshold = Credits::from_whole(10);
  std::int64_t push_limit = -1;  // cap per delivery; 0 forces revocation; -1 unlimited
  RatingPolicy rating;
  std::map<std::string, OfferPolicy> offers;  // by utility
  std::vector<MeterSetup> meters;
};

struct SimSetup {
  std::string name = "run";
  Tick end_tick = 30;
  Tick contract_window = 12;
  int tolerance_permille = 50;
  std::vector<std::string> authorities;  // defaults to the state account
  std::vector<UtilityType> extra_utilities;
  std::vector<NodeSetup> nodes;
  std::vector<ScheduledEvent> events;
  FaultPlan fault;
};

// ---------------------------------------------------------------------------
// Runtime actors.
// ---------------------------------------------------------------------------

namespace detail {

struct MeterPort {
  Meter meter;
  std::unique_ptr<DeviceDriver> driver;  // null for passive meters
};

struct Listing {
  OfferId id;
  std::string utility;
  std::int64_t left = 0;  // units still listed, by this node's accounting
  Tick valid_until = 0;
};

struct Purchase {
  std::uint64_t demand = 0;
  ContractTerms terms;
  Credits escrow;
  MeterReading supplied;  // handed over by the supplier, empty until then
  bool have_supplied = false;
};

struct Sale {
  ContractTerms terms;
  std::int64_t committed = 0;
};

struct DeferredTx {
  TxPayload payload;
  int msg = 0;
  std::string kind;
  ContractId contract;
};

struct NodeRuntime {
  // identity and configuration
  std::string name;
  KeyPair key;
  AccountId id;
  Credits low_threshold;
  std::int64_t push_limit = -1;
  RatingPolicy rating;
  std::map<std::string, OfferPolicy> offer_policies;
  std::vector<MeterPort> meters;

  // runtime state
  SupplyState supply;
  Credits mirror_free;
  Credits mirror_escrow;
  Credits pending_escrow;
  LowCreditMonitor monitor;
  std::uint64_t next_seq = 1;
  int pending_creates = 0;
  std::deque<DeferredTx> outbox;
  std::map<OfferId, Listing> listings;
  std::map<ContractId, Purchase> purchases;
  std::map<ContractId, Sale> sales;
  std::map<std::uint64_t, DemandRecord> demands;
  std::map<std::string, std::pair<MeterId, std::uint64_t>> last_production;  // by utility
  std::uint64_t next_offer = 1;
  std::uint64_t next_contract = 1;

  MeterPort* port(const std::string& utility, Direction d) {
    for (auto& p : meters)
      if (p.meter.info().utility == utility && p.meter.info().direction == d) return &p;
    return nullptr;
  }
};

struct Negotiation {
  MatchSlice slice;
  std::uint64_t demand = 0;
  std::string buyer;
  std::string supplier;
  ContractTerms terms;
  Transaction tx;
};

struct MarketRuntime {
  MarketBook book;
  std::map<AccountId, ReputationIndex> rep_cache;
  std::map<ContractId, Negotiation> negotiations;
  std::vector<OfferEvent> events;
  bool force_gone = false;  // armed by the expire-mid-negotiation fault
};

struct LedgerRuntime {
  struct Pending {
    Transaction tx;
    std::string origin;
    int msg = 0;
    ContractId contract;
  };
  std::vector<Pending> pending;
  std::set<ContractId> expiry_notified;
  std::map<AccountId, std::pair<Credits, Credits>> balances;  // last pushed (free, escrow)
};

}  // namespace detail

// ---------------------------------------------------------------------------
// The deterministic single-threaded network. Ticks advance in order; each
// tick delivers queued envelopes FIFO, then the ledger seals a block if any
// transactions arrived. No randomness anywhere: two runs of the same setup
// produce identical traces, blocks and logs.
// ---------------------------------------------------------------------------

class Simulation {
 public:
  Status init(const SimSetup& setup, DriverRegistry& drivers) {
    setup_name_ = setup.name;
    end_tick_ = setup.end_tick;
    contract_window_ = setup.contract_window;
    fault_ = setup.fault;

    GenesisConfig cfg;
    cfg.state_account = "state";
    cfg.tolerance_permille = setup.tolerance_permille;
    cfg.utilities = setup.extra_utilities;
    cfg.authorities = setup.authorities.empty()
                          ? std::vector<std::string>{"state"}
                          : setup.authorities;

    bool state_declared = false;
    for (const auto& n : setup.nodes)
      if (n.name == "state") state_declared = true;

    auto add_node = [&](const NodeSetup& ns) -> Status {
      if (ns.name.empty() || ns.name == "market" || ns.name == "ledger" ||
          ns.name.rfind("meter:", 0) == 0)
        return Status::fail(Err::ScenarioInvalid, "reserved node name: " + ns.name);
      auto node = std::make_unique<detail::NodeRuntime>();
      node->name = ns.name;
      node->key = KeyPair::derive(ns.name);
      node->id = account_id_from_pubkey(node->key.pub);
      node->low_threshold = ns.low_threshold;
      node->push_limit = ns.push_limit;
      node->rating = ns.rating;
      node->offer_policies = ns.offers;
      node->monitor = LowCreditMonitor(ns.low_threshold);
      cfg.accounts.push_back({ns.name, node->key.pub});

      for (const auto& ms : ns.meters) {
        KeyPair mk = KeyPair::derive("meter:" + ms.alias);
        GenesisConfig::MeterDecl decl;
        decl.alias = ms.alias;
        decl.pubkey = mk.pub;
        decl.owner = ns.name;
        decl.utility = ms.utility;
        decl.direction = ms.direction;
        cfg.meters.push_back(decl);

        MeterInfo info;
        info.id = meter_id_from_pubkey(mk.pub);
        info.pubkey = mk.pub;
        info.owner = node->id;
        info.utility = ms.utility;
        info.direction = ms.direction;
        info.alias = ms.alias;
        detail::MeterPort port{Meter(info, mk), nullptr};
        if (!ms.driver.empty()) {
          if (ms.direction != Direction::Produced)
            return Status::fail(Err::ScenarioInvalid,
                                "driver on a consumption meter: " + ms.alias);
          DeviceDriver::Description d{ms.utility, "", ms.alias};
          auto made = drivers.make(ms.driver, d, ms.driver_params);
          if (!made)
            return Status::fail(made.code(), "meter " + ms.alias + ": " + made.message());
          port.driver = made.take();
        }
        node->meters.push_back(std::move(port));
      }
      nodes_.push_back(std::move(node));
      return Status::success();
    };

    if (!state_declared) {
      NodeSetup st;
      st.name = "state";
      st.low_threshold = Credits::zero();
      Status s = add_node(st);
      if (!s.ok()) return s;
    }
    for (const auto& ns : setup.nodes) {
      Status s = add_node(ns);
      if (!s.ok()) return s;
    }

    // The state account leads the declaration so authority defaults hold.
    auto led = Ledger::create(cfg);
    if (!led) return led.status();
    ledger_.emplace(led.take());

    // Listing policies need a production meter to prove deliveries with.
    for (const auto& node : nodes_) {
      for (const auto& [utility, pol] : node->offer_policies) {
        if (!ledger_->utilities().find(utility))
          return Status::fail(Err::ScenarioInvalid,
                              node->name + " lists unknown utility " + utility);
        if (!node->port(utility, Direction::Produced))
          return Status::fail(Err::ScenarioInvalid,
                              node->name + " lists " + utility + " without a production meter");
        auto probe = quote_price(pol.policy, pol.params, std::max<std::int64_t>(
                                                             pol.params.target_stock, 1));
        if (!probe)
          return Status::fail(probe.code(),
                              node->name + " pricing for " + utility + ": " + probe.message());
      }
    }

    // Validate and keep the schedule.
    for (std::size_t i = 0; i < setup.events.size(); ++i) {
      const auto& ev = setup.events[i];
      std::string where = "event " + std::to_string(i + 1);
      if (ev.tick < 1 || ev.tick > end_tick_)
        return Status::fail(Err::ScenarioInvalid, where + ": tick outside 1..end_tick");
      switch (ev.kind) {
        case ScheduledEvent::Kind::Demand: {
          auto* node = node_by_name(ev.account);
          if (!node) return Status::fail(Err::ScenarioInvalid, where + ": unknown account");
          if (!ledger_->utilities().find(ev.utility))
            return Status::fail(Err::ScenarioInvalid, where + ": unknown utility");
          if (ev.quantity <= 0)
            return Status::fail(Err::ScenarioInvalid, where + ": non-positive quantity");
          if (!node->port(ev.utility, Direction::Consumed))
            return Status::fail(Err::ScenarioInvalid,
                                where + ": " + ev.account + " has no consumption meter for " +
                                    ev.utility);
          break;
        }
        case ScheduledEvent::Kind::Transfer:
          if (!node_by_name(ev.account))
            return Status::fail(Err::ScenarioInvalid, where + ": unknown sender");
          if (!node_by_name(ev.to))
            return Status::fail(Err::ScenarioInvalid, where + ": unknown recipient");
          if (!ev.amount.positive())
            return Status::fail(Err::ScenarioInvalid, where + ": non-positive amount");
          break;
        case ScheduledEvent::Kind::Mint:
          if (!node_by_name(ev.to))
            return Status::fail(Err::ScenarioInvalid, where + ": unknown recipient");
          if (!ev.amount.positive())
            return Status::fail(Err::ScenarioInvalid, where + ": non-positive amount");
          break;
      }
    }
    events_ = setup.events;

    // Provision initial balances in the first block, sealed at tick 0.
    auto* state = node_by_name("state");
    std::vector<Transaction> mints;
    for (const auto& ns : setup.nodes) {
      if (!ns.initial_credits.positive()) continue;
      auto* node = node_by_name(ns.name);
      mints.push_back(
          make_mint(state->key, state->next_seq++, node->id, ns.initial_credits));
    }
    auto sealed = ledger_->seal(std::move(mints), ledger_->expected_miner(0), 0);
    if (!sealed) return sealed.status();
    if (!sealed.value().rejected.empty())
      return Status::fail(Err::ScenarioInvalid,
                          "genesis mint rejected: " + sealed.value().rejected[0].why.message());
    logf(0, "genesis block sealed, " + std::to_string(sealed.value().block.txs.size()) +
                " mint(s)");

    for (const auto& node : nodes_) {
      node->mirror_free = ledger_->credits().free(node->id);
      node->next_seq = ledger_->last_seq(node->id) + 1;
      ledger_rt_.balances[node->id] = {node->mirror_free, Credits::zero()};
    }
    return Status::success();
  }

  Status run() {
    for (Tick t = 1; t <= end_tick_; ++t) {
      begin_tick(t);
      drain(t);
      seal_tick(t);
    }
    // Final sweep: expire whatever is still active so every contract ends
    // terminal and escrow drains back to the buyers.
    Tick latest = end_tick_;
    bool active = false;
    for (const auto& [id, c] : ledger_->contracts()) {
      if (c.state != ContractState::Active) continue;
      active = true;
      latest = std::max(latest, c.terms.deadline);
    }
    Tick closed = end_tick_;
    if (active) {
      Tick hb = latest + 1;
      auto sealed =
          ledger_->seal({}, ledger_->expected_miner(ledger_->chain().size()), hb);
      if (!sealed) return sealed.status();
      logf(hb, "final sweep block sealed, expired outstanding contracts");
      closed = hb;
    }
    // Messages past end_tick are never delivered, so settle the books of
    // nodes still waiting on one: anything unresolved counts as unmet.
    for (const auto& node : nodes_) {
      for (const auto& [cid, p] : node->purchases) {
        const Contract* c = ledger_->contract(cid);
        std::int64_t got = c ? c->delivered : 0;
        auto dit = node->demands.find(p.demand);
        if (dit != node->demands.end()) {
          dit->second.delivered += got;
          dit->second.unmet_supply += p.terms.quantity - got;
        }
        logf(closed, node->name + " contract " + cid.hex().substr(0, 8) +
                         " unresolved at end of run");
      }
      node->purchases.clear();
    }
    return Status::success();
  }

  // --- results ------------------------------------------------------------

  const Ledger& ledger() const { return *ledger_; }
  const std::vector<Envelope>& trace() const { return trace_; }
  const std::vector<OfferEvent>& offer_events() const { return market_rt_.events; }
  const std::vector<std::string>& log() const { return log_; }
  const std::string& name() const { return setup_name_; }
  Tick end_tick() const { return end_tick_; }
  bool fault_fired() const { return fault_fired_; }

  std::vector<DemandRecord> demand_records() const {
    std::vector<DemandRecord> out;
    for (const auto& node : nodes_)
      for (const auto& [id, rec] : node->demands) out.push_back(rec);
    std::sort(out.begin(), out.end(),
              [](const DemandRecord& a, const DemandRecord& b) { return a.id < b.id; });
    return out;
  }

  std::vector<std::string> node_names() const {
    std::vector<std::string> out;
    for (const auto& node : nodes_) out.push_back(node->name);
    return out;
  }

 private:
  // --- plumbing -------------------------------------------------------------

  detail::NodeRuntime* node_by_name(const std::string& name) {
    for (auto& node : nodes_)
      if (node->name == name) return node.get();
    return nullptr;
  }

  detail::NodeRuntime* node_by_id(const AccountId& id) {
    for (auto& node : nodes_)
      if (node->id == id) return node.get();
    return nullptr;
  }

  void logf(Tick t, const std::string& text) {
    log_.push_back("tick=" + std::to_string(t) + " " + text);
  }

  Envelope& enqueue(Envelope e) {
    e.no = ++envelope_seq_;
    auto& bucket = queue_[e.at];
    bucket.push_back(std::move(e));
    return bucket.back();
  }

  Envelope make(std::string from, std::string to, Tick now, Tick latency, int msg,
                std::string kind, Payload payload) {
    Envelope e;
    e.sent = now;
    e.at = now + latency;
    e.from = std::move(from);
    e.to = std::move(to);
    e.msg = msg;
    e.kind = std::move(kind);
    e.payload = std::move(payload);
    return e;
  }

  // --- tick phases ----------------------------------------------------------

  void begin_tick(Tick t) {
    if (fault_.kind == FaultPlan::Kind::DropOffer && t == fault_.at) {
      auto dropped = market_rt_.book.all();
      market_rt_.book.clear();
      market_rt_.events.push_back({t, "clear", {}, {}, 0});
      fault_fired_ = true;
      logf(t, "fault drop-offer cleared " + std::to_string(dropped.size()) + " listing(s)");
      for (const auto& o : dropped) {
        auto* owner = node_by_id(o.supplier);
        if (!owner) continue;
        Envelope e = make("market", owner->name, t, 1, 0, "offer_dropped",
                          MsgOfferRejected{o, "dropped by fault"});
        e.offer = o.id;
        enqueue(std::move(e));
      }
    }
    if (fault_.kind == FaultPlan::Kind::ExpireMidNegotiation && t == fault_.at) {
      market_rt_.force_gone = true;
      logf(t, "fault expire-mid-negotiation armed");
    }
    if (fault_.kind == FaultPlan::Kind::TamperReading && t == fault_.at) {
      tamper_armed_ = true;
      logf(t, "fault tamper-reading armed");
    }

    // Device polls: meters measure production and report to their node.
    for (auto& node : nodes_) {
      for (auto& port : node->meters) {
        if (!port.driver) continue;
        auto qty = port.driver->poll(t);
        if (!qty || *qty <= 0) continue;
        auto reading = port.meter.sign_reading(*qty, t);
        if (!reading) {
          logf(t, node->name + " meter " + port.meter.info().alias + ": " + reading.message());
          continue;
        }
        Envelope e = make("meter:" + port.meter.info().alias, node->name, t, 0, 1, "reading",
                          MsgReading{reading.value()});
        e.meter = port.meter.info().id;
        e.nonce = reading.value().nonce;
        e.note = std::to_string(*qty) + " " + port.meter.info().utility;
        enqueue(std::move(e));
      }
    }

    // Scheduled events fire after polls so demands see this tick's output.
    for (const auto& ev : events_) {
      if (ev.tick != t) continue;
      switch (ev.kind) {
        case ScheduledEvent::Kind::Demand: {
          Envelope e = make(ev.account, ev.account, t, 0, 0, "demand_event",
                            EvDemand{++demand_seq_, ev.utility, ev.quantity});
          e.internal = true;
          e.demand = demand_seq_;
          enqueue(std::move(e));
          break;
        }
        case ScheduledEvent::Kind::Transfer: {
          auto* to = node_by_name(ev.to);
          Envelope e = make(ev.account, ev.account, t, 0, 0, "transfer_event",
                            EvTransfer{to->id, ev.amount, ev.memo});
          e.internal = true;
          enqueue(std::move(e));
          break;
        }
        case ScheduledEvent::Kind::Mint: {
          auto* to = node_by_name(ev.to);
          Envelope e = make("state", "state", t, 0, 0, "mint_event",
                            EvMint{to->id, ev.amount});
          e.internal = true;
          enqueue(std::move(e));
          break;
        }
      }
    }
  }

  void drain(Tick t) {
    auto it = queue_.find(t);
    while (it != queue_.end() && !it->second.empty()) {
      Envelope e = std::move(it->second.front());
      it->second.pop_front();
      deliver(e, t);
      it = queue_.find(t);
    }
    if (it != queue_.end()) queue_.erase(it);
  }

  void deliver(Envelope& e, Tick t) {
    if (!e.internal) trace_.push_back(e);
    if (e.to == "market") {
      market_handle(e, t);
    } else if (e.to == "ledger") {
      ledger_handle(e, t);
    } else if (auto* node = node_by_name(e.to)) {
      node_handle(*node, e, t);
    } else {
      logf(t, "undeliverable envelope to " + e.to);
    }
  }

  // --- node behaviour -------------------------------------------------------

  void node_handle(detail::NodeRuntime& n, Envelope& e, Tick t) {
    if (auto* m = std::get_if<MsgReading>(&e.payload)) {
      on_reading(n, e, *m, t);
    } else if (auto* m = std::get_if<MsgOfferList>(&e.payload)) {
      on_offer_list(n, *m, t);
    } else if (auto* m = std::get_if<MsgProposal>(&e.payload)) {
      on_proposal(n, *m, t);
    } else if (auto* m = std::get_if<MsgConfirmation>(&e.payload)) {
      on_confirmation(n, *m, t);
    } else if (auto* m = std::get_if<MsgHandoff>(&e.payload)) {
      on_handoff(n, *m, t);
    } else if (auto* m = std::get_if<MsgSettlement>(&e.payload)) {
      on_settlement(n, *m, t);
    } else if (auto* m = std::get_if<MsgBalance>(&e.payload)) {
      n.mirror_free = m->free;
      n.mirror_escrow = m->escrowed;
      if (n.monitor.observe(m->free))
        logf(t, n.name + " low credits: " + m->free.str() + " below " +
                    n.low_threshold.str());
    } else if (auto* m = std::get_if<MsgOfferGone>(&e.payload)) {
      on_offer_gone(n, *m, t);
    } else if (auto* m = std::get_if<MsgOfferRejected>(&e.payload)) {
      auto it = n.listings.find(m->offer.id);
      if (it != n.listings.end()) {
        n.supply.unlist(it->second.utility, it->second.left);
        n.listings.erase(it);
      }
      logf(t, n.name + " listing " + m->offer.id.hex().substr(0, 8) + " gone: " + m->reason);
    } else if (auto* m = std::get_if<MsgReject>(&e.payload)) {
      logf(t, n.name + " tx rejected by ledger: " + m->why.message());
    } else if (auto* m = std::get_if<MsgExpired>(&e.payload)) {
      on_expired(n, *m, t);
    } else if (auto* m = std::get_if<EvDemand>(&e.payload)) {
      on_demand(n, *m, t);
    } else if (auto* m = std::get_if<EvTransfer>(&e.payload)) {
      submit_tx(n, TransferTx{m->to, m->amount, m->memo}, t, 0, "transfer", {});
    } else if (auto* m = std::get_if<EvMint>(&e.payload)) {
      submit_tx(n, MintTx{m->to, m->amount}, t, 0, "mint", {});
    }
  }

  void on_reading(detail::NodeRuntime& n, Envelope& e, MsgReading& m, Tick t) {
    const MeterReading& r = m.reading;
    if (r.direction == Direction::Produced && e.contract.is_zero()) {
      // Step 1: production lands in stock; surplus may go to market.
      n.supply.produce(r.utility, r.quantity);
      n.last_production[r.utility] = {r.meter, r.nonce};
      maybe_list(n, r.utility, t);
      return;
    }
    if (r.direction == Direction::Produced) {
      // Step 11: delivery reading for a sale; hand it to the buyer.
      auto it = n.sales.find(e.contract);
      if (it == n.sales.end()) return;
      detail::Sale& sale = it->second;
      n.supply.deliver(r.utility, r.quantity, sale.committed);
      sale.committed = 0;
      bool partial = r.quantity < sale.terms.quantity;
      auto* buyer = node_by_id(sale.terms.buyer);
      Envelope h = make(n.name, buyer->name, t, 1, 0, "handoff",
                        MsgHandoff{e.contract, r, partial});
      h.contract = e.contract;
      h.note = std::to_string(r.quantity) + " of " + std::to_string(sale.terms.quantity) +
               " " + r.utility;
      enqueue(std::move(h));
      if (partial)
        logf(t, n.name + " delivered " + std::to_string(r.quantity) + "/" +
                    std::to_string(sale.terms.quantity) + " on contract " +
                    e.contract.hex().substr(0, 8));
      maybe_list(n, r.utility, t);
      return;
    }
    // Step 12: receipt reading; assemble and submit the delivery proof.
    auto it = n.purchases.find(e.contract);
    if (it == n.purchases.end() || !it->second.have_supplied) return;
    DeliveryProof proof;
    proof.contract = e.contract;
    proof.supplied = it->second.supplied;
    proof.received = r;
    proof.quantity = r.quantity;
    submit_tx(n, ContractFulfillTx{e.contract, std::move(proof)}, t, 13, "delivery_proof",
              e.contract);
  }

  void on_demand(detail::NodeRuntime& n, EvDemand& m, Tick t) {
    DemandRecord rec;
    rec.id = m.id;
    rec.tick = t;
    rec.account = n.name;
    rec.utility = m.utility;
    rec.requested = m.quantity;
    rec.self_supplied = n.supply.take_self(m.utility, m.quantity);
    std::int64_t left = m.quantity - rec.self_supplied;
    if (rec.self_supplied > 0)
      logf(t, n.name + " self-supplied " + std::to_string(rec.self_supplied) + " " +
                  m.utility + (left > 0 ? ", needs " + std::to_string(left) + " more" : ""));
    n.demands[m.id] = rec;
    if (left == 0) return;  // fully covered from own stock: no envelopes
    Envelope q = make(n.name, "market", t, 1, 4, "demand_query",
                      MsgDemandQuery{m.id, m.utility, left});
    q.demand = m.id;
    q.note = std::to_string(left) + " " + m.utility;
    enqueue(std::move(q));
  }

  void on_offer_list(detail::NodeRuntime& n, MsgOfferList& m, Tick t) {
    auto dit = n.demands.find(m.demand);
    if (dit == n.demands.end()) return;
    DemandRecord& rec = dit->second;
    std::int64_t need = rec.requested - rec.self_supplied - rec.contracted;
    if (need <= 0) return;
    Credits budget = n.mirror_free - n.pending_escrow;
    if (budget.negative()) budget = Credits::zero();
    SelectionPlan plan = plan_selection(m.offers, need, budget, n.id);
    for (const auto& slice : plan.slices) {
      ContractTerms terms;
      terms.id = id16_from_hash<ContractTag>(
          sha256(std::string("contract:") + n.name + ":" + std::to_string(n.next_contract++)));
      terms.buyer = n.id;
      terms.supplier = slice.offer.supplier;
      terms.utility = slice.offer.utility;
      terms.quantity = slice.take;
      terms.unit_price = slice.offer.unit_price;
      terms.deadline = t + contract_window_;
      terms.offer = slice.offer.id;
      Credits escrow = *Credits::scale(terms.unit_price, terms.quantity);

      Transaction tx = make_contract_create(n.key, n.next_seq++, terms, Signature{});
      n.pending_creates += 1;
      n.pending_escrow += escrow;
      detail::Purchase p;
      p.demand = m.demand;
      p.terms = terms;
      p.escrow = escrow;
      n.purchases[terms.id] = p;
      rec.contracted += slice.take;

      Envelope sel = make(n.name, "market", t, 1, 6, "selection",
                          MsgSelection{m.demand, terms, std::move(tx)});
      sel.demand = m.demand;
      sel.offer = slice.offer.id;
      sel.contract = terms.id;
      sel.note = std::to_string(slice.take) + " " + terms.utility + " @ " +
                 terms.unit_price.str() + " from " + alias_of(terms.supplier);
      enqueue(std::move(sel));
    }
    rec.unmet_supply += plan.unmet_supply;
    rec.unmet_credits += plan.unmet_credits;
    if (plan.unmet() > 0)
      logf(t, n.name + " unmet demand for " + std::to_string(plan.unmet()) + " " +
                  rec.utility + " (supply short " + std::to_string(plan.unmet_supply) +
                  ", credits short " + std::to_string(plan.unmet_credits) + ")");
  }

  void on_proposal(detail::NodeRuntime& n, MsgProposal& m, Tick t) {
    const ContractTerms& terms = m.terms;
    reclaim_listings(n, t);
    Status held = n.supply.reserve(terms.utility, terms.quantity);
    Envelope reply = make(n.name, "market", t, 1, held.ok() ? 8 : 0,
                          held.ok() ? "acceptance" : "decline",
                          MsgAccept{terms, held.ok() ? endorse_terms(n.key, terms) : Signature{},
                                    held.ok(), held.ok() ? "" : held.message()});
    reply.contract = terms.id;
    reply.offer = terms.offer;
    if (held.ok()) {
      n.sales[terms.id] = {terms, terms.quantity};
      auto lit = n.listings.find(terms.offer);
      if (lit != n.listings.end()) {
        std::int64_t sold = std::min(lit->second.left, terms.quantity);
        lit->second.left -= sold;
        n.supply.unlist(terms.utility, sold);
        if (lit->second.left == 0) n.listings.erase(lit);
      }
      reply.note = std::to_string(terms.quantity) + " " + terms.utility + " to " +
                   alias_of(terms.buyer);
    } else {
      reply.note = held.message();
      logf(t, n.name + " declined proposal on contract " + terms.id.hex().substr(0, 8) +
                  ": " + held.message());
    }
    enqueue(std::move(reply));
  }

  void on_confirmation(detail::NodeRuntime& n, MsgConfirmation& m, Tick t) {
    const ContractTerms& terms = m.terms;
    if (terms.buyer == n.id) {
      auto it = n.purchases.find(terms.id);
      if (it != n.purchases.end()) {
        n.pending_creates -= 1;
        n.pending_escrow -= it->second.escrow;
        flush_outbox(n, t);
      }
      return;
    }
    if (terms.supplier != n.id) return;
    auto it = n.sales.find(terms.id);
    if (it == n.sales.end()) return;
    detail::Sale& sale = it->second;

    std::int64_t push = terms.quantity;
    if (n.push_limit >= 0) push = std::min(push, n.push_limit);
    if (push == 0) {
      // Nothing deliverable: revoke up front so escrow frees immediately.
      n.supply.release(terms.utility, sale.committed);
      sale.committed = 0;
      submit_tx(n, ContractRevokeTx{terms.id, std::nullopt}, t, 0, "revoke", terms.id);
      logf(t, n.name + " revoked contract " + terms.id.hex().substr(0, 8) +
                  ": nothing deliverable");
      return;
    }
    auto* port = n.port(terms.utility, Direction::Produced);
    if (!port) return;  // setup validation makes this unreachable for sellers
    auto reading = port->meter.sign_reading(push, t);
    if (!reading) return;
    Envelope e = make("meter:" + port->meter.info().alias, n.name, t, 0, 11,
                      "delivery_reading", MsgReading{reading.value()});
    e.contract = terms.id;
    e.meter = port->meter.info().id;
    e.nonce = reading.value().nonce;
    e.note = std::to_string(push) + " " + terms.utility;
    enqueue(std::move(e));
  }

  void on_handoff(detail::NodeRuntime& n, MsgHandoff& m, Tick t) {
    auto it = n.purchases.find(m.contract);
    if (it == n.purchases.end()) return;
    it->second.supplied = m.supplied;
    it->second.have_supplied = true;
    auto* port = n.port(m.supplied.utility, Direction::Consumed);
    if (!port) return;  // setup validation requires a consumption meter
    auto reading = port->meter.sign_reading(m.supplied.quantity, t);
    if (!reading) return;
    MeterReading r = reading.value();
    if (tamper_armed_) {
      r.quantity += 1;  // signature no longer covers the payload
      tamper_armed_ = false;
      fault_fired_ = true;
      logf(t, "fault tamper-reading corrupted receipt on contract " +
                  m.contract.hex().substr(0, 8));
    }
    Envelope e = make("meter:" + port->meter.info().alias, n.name, t, 0, 12,
                      "receipt_reading", MsgReading{r});
    e.contract = m.contract;
    e.meter = port->meter.info().id;
    e.nonce = r.nonce;
    e.note = std::to_string(r.quantity) + " " + r.utility;
    enqueue(std::move(e));
  }

  void on_settlement(detail::NodeRuntime& n, MsgSettlement& m, Tick t) {
    if (auto pit = n.purchases.find(m.contract); pit != n.purchases.end()) {
      detail::Purchase& p = pit->second;
      auto dit = n.demands.find(p.demand);
      if (dit != n.demands.end()) {
        DemandRecord& rec = dit->second;
        rec.delivered += m.delivered;
        std::int64_t shortfall = p.terms.quantity - m.delivered;
        if (shortfall > 0) rec.unmet_supply += shortfall;
        // Delivered units arrive in stock, then the demand consumes them.
        n.supply.receive(p.terms.utility, m.delivered);
        n.supply.take_self(p.terms.utility, m.delivered);
      }
      if (m.state == ContractState::Fulfilled || m.state == ContractState::Revoked) {
        int score = n.rating.score(m.delivered, p.terms.quantity);
        submit_tx(n, RatingTx{m.contract, static_cast<std::uint8_t>(score)}, t, 15, "rating",
                  m.contract);
      }
      n.purchases.erase(pit);
      return;
    }
    if (auto sit = n.sales.find(m.contract); sit != n.sales.end()) {
      if (sit->second.committed > 0)
        n.supply.release(sit->second.terms.utility, sit->second.committed);
      n.sales.erase(sit);
      logf(t, n.name + " settled contract " + m.contract.hex().substr(0, 8) + ": paid " +
                  m.paid.str());
    }
  }

  void on_offer_gone(detail::NodeRuntime& n, MsgOfferGone& m, Tick t) {
    auto it = n.purchases.find(m.contract);
    if (it == n.purchases.end()) return;
    detail::Purchase& p = it->second;
    n.pending_creates -= 1;
    n.pending_escrow -= p.escrow;
    auto dit = n.demands.find(p.demand);
    if (dit != n.demands.end()) {
      dit->second.contracted -= p.terms.quantity;
      dit->second.unmet_supply += p.terms.quantity;
    }
    logf(t, n.name + " negotiation failed on contract " + m.contract.hex().substr(0, 8) +
                ": " + m.reason);
    n.purchases.erase(it);
    flush_outbox(n, t);
  }

  void on_expired(detail::NodeRuntime& n, MsgExpired& m, Tick t) {
    if (auto pit = n.purchases.find(m.contract); pit != n.purchases.end()) {
      auto dit = n.demands.find(pit->second.demand);
      if (dit != n.demands.end())
        dit->second.unmet_supply += pit->second.terms.quantity;
      logf(t, n.name + " contract " + m.contract.hex().substr(0, 8) +
                  " expired unfulfilled, escrow refunded");
      n.purchases.erase(pit);
    }
    if (auto sit = n.sales.find(m.contract); sit != n.sales.end()) {
      if (sit->second.committed > 0)
        n.supply.release(sit->second.terms.utility, sit->second.committed);
      n.sales.erase(sit);
    }
  }

  // Lists accumulated surplus once it reaches the minimum lot size.
  void maybe_list(detail::NodeRuntime& n, const std::string& utility, Tick t) {
    reclaim_listings(n, t);
    auto pit = n.offer_policies.find(utility);
    if (pit == n.offer_policies.end()) return;
    const OfferPolicy& pol = pit->second;
    std::int64_t lot = n.supply.listable(utility, pol.reserve);
    if (lot < std::max<std::int64_t>(1, pol.min_lot)) return;

    std::int64_t stock = n.supply.stock(utility);
    auto price = quote_price(pol.policy, pol.params, stock);
    if (!price) {
      logf(t, n.name + " cannot price " + utility + ": " + price.message());
      return;
    }
    Offer o;
    o.id = id16_from_hash<OfferTag>(
        sha256(std::string("offer:") + n.name + ":" + std::to_string(n.next_offer++)));
    o.supplier = n.id;
    o.utility = utility;
    o.quantity = lot;
    o.unit_price = price.value();
    o.valid_from = t;
    o.valid_until = t + pol.valid_for;
    o.policy = pol.policy;
    o.params = pol.params;
    o.stock_at_quote = stock;
    sign_offer(o, n.key);
    n.supply.list(utility, lot);
    n.listings[o.id] = {o.id, utility, lot, o.valid_until};

    auto src = n.last_production[utility];
    Envelope e = make(n.name, "market", t, 1, 2, "offer",
                      MsgOfferSubmit{o, src.first, src.second});
    e.offer = o.id;
    e.meter = src.first;
    e.nonce = src.second;
    e.note = std::to_string(lot) + " " + utility + " @ " + o.unit_price.str();
    enqueue(std::move(e));
  }

  void reclaim_listings(detail::NodeRuntime& n, Tick t) {
    for (auto it = n.listings.begin(); it != n.listings.end();) {
      if (it->second.valid_until < t) {
        n.supply.unlist(it->second.utility, it->second.left);
        it = n.listings.erase(it);
      } else {
        ++it;
      }
    }
  }

  // Signs and ships a transaction, or queues it while contract creations
  // are in flight so sequence numbers reach the ledger in signing order.
  void submit_tx(detail::NodeRuntime& n, TxPayload payload, Tick t, int msg, std::string kind,
                 ContractId contract) {
    if (n.pending_creates > 0) {
      n.outbox.push_back({std::move(payload), msg, std::move(kind), contract});
      return;
    }
    Transaction tx = sign_tx(n.key, n.next_seq++, std::move(payload));
    Envelope e = make(n.name, "ledger", t, 1, msg, std::move(kind), MsgTxSubmit{std::move(tx)});
    e.contract = contract;
    enqueue(std::move(e));
  }

  void flush_outbox(detail::NodeRuntime& n, Tick t) {
    while (n.pending_creates == 0 && !n.outbox.empty()) {
      detail::DeferredTx d = std::move(n.outbox.front());
      n.outbox.pop_front();
      Transaction tx = sign_tx(n.key, n.next_seq++, std::move(d.payload));
      Envelope e = make(n.name, "ledger", t, 1, d.msg, std::move(d.kind),
                        MsgTxSubmit{std::move(tx)});
      e.contract = d.contract;
      enqueue(std::move(e));
    }
  }

  // --- market behaviour -----------------------------------------------------

  void market_handle(Envelope& e, Tick t) {
    if (auto* m = std::get_if<MsgOfferSubmit>(&e.payload)) {
      on_market_offer(e, *m, t);
    } else if (auto* m = std::get_if<MsgRepReply>(&e.payload)) {
      market_rt_.rep_cache[m->subject] = m->rep;
    } else if (auto* m = std::get_if<MsgDemandQuery>(&e.payload)) {
      market_rt_.book.purge_expired(t);
      Envelope r = make("market", e.from, t, 1, 5, "offer_list",
                        MsgOfferList{m->demand, market_rt_.book.query(m->utility, t)});
      r.demand = m->demand;
      r.note = std::to_string(std::get<MsgOfferList>(r.payload).offers.size()) +
               " offer(s) for " + m->utility;
      enqueue(std::move(r));
    } else if (auto* m = std::get_if<MsgSelection>(&e.payload)) {
      on_market_selection(e, *m, t);
    } else if (auto* m = std::get_if<MsgAccept>(&e.payload)) {
      on_market_accept(e, *m, t);
    } else if (auto* m = std::get_if<MsgReject>(&e.payload)) {
      on_market_reject(*m, t);
    } else if (auto* m = std::get_if<MsgConfirmation>(&e.payload)) {
      market_rt_.negotiations.erase(m->terms.id);
    }
  }

  void on_market_offer(Envelope& e, MsgOfferSubmit& m, Tick t) {
    const PubKey* key = ledger_->account_key(m.offer.supplier);
    auto rep = [this](const AccountId& who) {
      auto it = market_rt_.rep_cache.find(who);
      return it == market_rt_.rep_cache.end() ? ReputationIndex{} : it->second;
    };
    if (!key) {
      enqueue(make("market", e.from, t, 1, 0, "offer_rejected",
                   MsgOfferRejected{m.offer, "unknown supplier"}));
      return;
    }
    auto listed = market_rt_.book.submit(m.offer, t, *key, rep);
    if (!listed) {
      Envelope r = make("market", e.from, t, 1, 0, "offer_rejected",
                        MsgOfferRejected{m.offer, listed.message()});
      r.offer = m.offer.id;
      enqueue(std::move(r));
      logf(t, "market rejected offer from " + e.from + ": " + listed.message());
      return;
    }
    market_rt_.events.push_back({t, "post", listed.value(), listed.value().id, 0});
    Envelope q = make("market", "ledger", t, 1, 3, "reputation_query",
                      MsgRepQuery{m.offer.supplier});
    q.offer = m.offer.id;
    q.note = "supplier " + e.from;
    enqueue(std::move(q));
  }

  void on_market_selection(Envelope& e, MsgSelection& m, Tick t) {
    auto gone = [&](const std::string& why) {
      Envelope r = make("market", e.from, t, 1, 0, "offer_gone",
                        MsgOfferGone{m.demand, m.terms.id, m.terms.offer, why});
      r.demand = m.demand;
      r.contract = m.terms.id;
      r.offer = m.terms.offer;
      r.note = why;
      enqueue(std::move(r));
    };
    if (market_rt_.force_gone) {
      market_rt_.force_gone = false;
      fault_fired_ = true;
      logf(t, "fault expire-mid-negotiation killed contract " +
                  m.terms.id.hex().substr(0, 8));
      gone("listing expired mid-negotiation");
      return;
    }
    market_rt_.book.purge_expired(t);
    const Offer* o = market_rt_.book.find(m.terms.offer);
    if (!o) return gone("listing no longer on the book");
    if (o->supplier != m.terms.supplier || o->utility != m.terms.utility ||
        o->unit_price != m.terms.unit_price)
      return gone("terms diverge from the listing");
    if (m.terms.quantity <= 0 || m.terms.quantity > o->quantity)
      return gone("quantity no longer available");
    if (m.tx.signer != m.terms.buyer) return gone("selection not signed by the buyer");

    detail::Negotiation neg;
    neg.slice = MatchSlice{*o, m.terms.quantity};
    neg.demand = m.demand;
    neg.buyer = e.from;
    neg.supplier = alias_of(o->supplier);
    neg.terms = m.terms;
    neg.tx = m.tx;
    market_rt_.book.reduce(o->id, m.terms.quantity);
    market_rt_.events.push_back({t, "take", {}, m.terms.offer, m.terms.quantity});

    Envelope p = make("market", neg.supplier, t, 1, 7, "proposal", MsgProposal{m.terms});
    p.demand = m.demand;
    p.contract = m.terms.id;
    p.offer = m.terms.offer;
    p.note = std::to_string(m.terms.quantity) + " " + m.terms.utility + " @ " +
             m.terms.unit_price.str() + " for " + neg.buyer;
    market_rt_.negotiations[m.terms.id] = std::move(neg);
    enqueue(std::move(p));
  }

  void on_market_accept(Envelope& e, MsgAccept& m, Tick t) {
    auto it = market_rt_.negotiations.find(m.terms.id);
    if (it == market_rt_.negotiations.end()) return;
    detail::Negotiation& neg = it->second;
    const PubKey* key = ledger_->account_key(m.terms.supplier);
    bool good = m.accepted && key && verify(*key, m.terms.bytes(), m.endorsement);
    if (!good) {
      market_rt_.book.restore(neg.slice);
      Offer snap = neg.slice.offer;
      market_rt_.events.push_back({t, "restore", snap, snap.id, neg.slice.take});
      Envelope r = make("market", neg.buyer, t, 1, 0, "offer_gone",
                        MsgOfferGone{neg.demand, m.terms.id, m.terms.offer,
                                     m.reason.empty() ? "supplier declined" : m.reason});
      r.demand = neg.demand;
      r.contract = m.terms.id;
      r.offer = m.terms.offer;
      enqueue(std::move(r));
      market_rt_.negotiations.erase(it);
      return;
    }
    Transaction tx = neg.tx;
    std::get<ContractCreateTx>(tx.payload).supplier_sig = m.endorsement;
    neg.tx = tx;
    Envelope s = make("market", "ledger", t, 1, 9, "contract_submit", MsgTxSubmit{std::move(tx)});
    s.demand = neg.demand;
    s.contract = m.terms.id;
    s.offer = m.terms.offer;
    s.note = "buyer " + neg.buyer + ", supplier " + neg.supplier;
    enqueue(std::move(s));
  }

  void on_market_reject(MsgReject& m, Tick t) {
    // The ledger bounced a contract creation the market forwarded.
    auto* create = std::get_if<ContractCreateTx>(&m.tx.payload);
    if (!create) return;
    auto it = market_rt_.negotiations.find(create->terms.id);
    if (it == market_rt_.negotiations.end()) return;
    detail::Negotiation& neg = it->second;
    market_rt_.book.restore(neg.slice);
    Offer snap = neg.slice.offer;
    market_rt_.events.push_back({t, "restore", snap, snap.id, neg.slice.take});
    Envelope r = make("market", neg.buyer, t, 1, 0, "offer_gone",
                      MsgOfferGone{neg.demand, create->terms.id, create->terms.offer,
                                   "ledger rejected creation: " + m.why.message()});
    r.demand = neg.demand;
    r.contract = create->terms.id;
    r.offer = create->terms.offer;
    enqueue(std::move(r));
    logf(t, "ledger rejected contract " + create->terms.id.hex().substr(0, 8) + ": " +
                m.why.message());
    market_rt_.negotiations.erase(it);
  }

  // --- ledger behaviour -------------------------------------------------------

  void ledger_handle(Envelope& e, Tick t) {
    if (auto* m = std::get_if<MsgTxSubmit>(&e.payload)) {
      ledger_rt_.pending.push_back({m->tx, e.from, e.msg, e.contract});
    } else if (auto* m = std::get_if<MsgRepQuery>(&e.payload)) {
      auto [scores, revs] = ledger_->query_ratings(m->subject);
      Envelope r = make("ledger", e.from, t, 1, 0, "reputation",
                        MsgRepReply{m->subject, reputation_index(scores, revs)});
      r.offer = e.offer;
      enqueue(std::move(r));
    }
  }

  void seal_tick(Tick t) {
    if (ledger_rt_.pending.empty()) return;
    std::vector<detail::LedgerRuntime::Pending> batch;
    batch.swap(ledger_rt_.pending);
    std::vector<Transaction> txs;
    txs.reserve(batch.size());
    for (auto& p : batch) txs.push_back(p.tx);

    auto sealed = ledger_->seal(std::move(txs), ledger_->expected_miner(ledger_->chain().size()), t);
    if (!sealed) {
      logf(t, "seal failed: " + sealed.message());
      return;
    }
    const Block& b = sealed.value().block;
    logf(t, "block " + std::to_string(b.height) + " sealed: " + std::to_string(b.txs.size()) +
                " tx(s), " + std::to_string(b.effects.size()) + " effect(s)");

    // Expiries first: they were swept before any transaction ran.
    for (const auto& fx : b.effects) {
      if (fx.kind != TxKind::Refund) continue;
      const Contract* c = ledger_->contract(fx.contract);
      if (!c || c->state != ContractState::Expired) continue;
      if (!ledger_rt_.expiry_notified.insert(fx.contract).second) continue;
      for (const AccountId& who : {c->terms.buyer, c->terms.supplier}) {
        auto* node = node_by_id(who);
        if (!node) continue;
        Envelope n = make("ledger", node->name, t, 1, 0, "expired", MsgExpired{fx.contract});
        n.contract = fx.contract;
        enqueue(std::move(n));
      }
    }

    // Per-transaction notifications in block order.
    for (const auto& tx : b.txs) {
      if (auto* create = std::get_if<ContractCreateTx>(&tx.payload)) {
        const ContractTerms& terms = create->terms;
        for (const AccountId& who : {terms.buyer, terms.supplier}) {
          auto* node = node_by_id(who);
          if (!node) continue;
          Envelope n = make("ledger", node->name, t, 1, 10, "confirmation",
                            MsgConfirmation{terms});
          n.contract = terms.id;
          n.offer = terms.offer;
          n.note = "contract " + terms.id.hex().substr(0, 8) + " active";
          enqueue(std::move(n));
        }
        Envelope mn = make("ledger", "market", t, 1, 0, "contract_active",
                           MsgConfirmation{terms});
        mn.contract = terms.id;
        enqueue(std::move(mn));
      } else if (auto* ful = std::get_if<ContractFulfillTx>(&tx.payload)) {
        notify_settlement(ful->contract, t);
      } else if (auto* rev = std::get_if<ContractRevokeTx>(&tx.payload)) {
        notify_settlement(rev->contract, t);
      }
    }

    // Bounce rejected transactions back to whoever sent them in.
    for (std::size_t i = 0; i < sealed.value().rejected.size(); ++i) {
      const Rejection& rej = sealed.value().rejected[i];
      std::string origin;
      for (const auto& p : batch) {
        if (p.tx.signer == rej.tx.signer && p.tx.seq == rej.tx.seq) {
          origin = p.origin;
          break;
        }
      }
      logf(t, "ledger rejected " + std::string(to_string(rej.tx.kind())) + " from " +
                  (origin.empty() ? std::string("?") : origin) + ": " + rej.why.message());
      if (origin.empty()) continue;
      enqueue(make("ledger", origin, t, 1, 0, "tx_rejected", MsgReject{rej.tx, rej.why}));
    }

    // Wallet deltas go to their owners.
    for (const auto& node : nodes_) {
      Credits free = ledger_->credits().free(node->id);
      Credits escrow = ledger_->credits().escrowed(node->id);
      auto& last = ledger_rt_.balances[node->id];
      if (last.first == free && last.second == escrow) continue;
      last = {free, escrow};
      Envelope n = make("ledger", node->name, t, 1, 0, "balance",
                        MsgBalance{node->id, free, escrow});
      n.note = "free " + free.str() + ", escrowed " + escrow.str();
      enqueue(std::move(n));
    }
  }

  void notify_settlement(const ContractId& id, Tick t) {
    const Contract* c = ledger_->contract(id);
    if (!c) return;
    for (const AccountId& who : {c->terms.buyer, c->terms.supplier}) {
      auto* node = node_by_id(who);
      if (!node) continue;
      Envelope n = make("ledger", node->name, t, 1, 14, "settlement",
                        MsgSettlement{id, c->state, c->delivered, c->paid, c->refunded});
      n.contract = id;
      n.note = std::string(to_string(c->state)) + ", delivered " +
               std::to_string(c->delivered) + ", paid " + c->paid.str() + ", refunded " +
               c->refunded.str();
      enqueue(std::move(n));
    }
  }

  std::string alias_of(const AccountId& id) {
    auto* node = node_by_id(id);
    return node ? node->name : id.hex().substr(0, 8);
  }

  // --- data -----------------------------------------------------------------

  std::string setup_name_;
  Tick end_tick_ = 0;
  Tick contract_window_ = 12;
  FaultPlan fault_;
  bool fault_fired_ = false;
  bool tamper_armed_ = false;

  std::optional<Ledger> ledger_;
  std::vector<std::unique_ptr<detail::NodeRuntime>> nodes_;
  detail::MarketRuntime market_rt_;
  detail::LedgerRuntime ledger_rt_;
  std::vector<ScheduledEvent> events_;

  std::map<Tick, std::deque<Envelope>> queue_;
  std::uint64_t envelope_seq_ = 0;
  std::uint64_t demand_seq_ = 0;
  std::vector<Envelope> trace_;
  std::vector<std::string> log_;
};

}  // namespace umx

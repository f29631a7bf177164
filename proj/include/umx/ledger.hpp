#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "umx/common.hpp"
#include "umx/credits.hpp"
#include "umx/crypto.hpp"
#include "umx/currency.hpp"
#include "umx/encoding.hpp"
#include "umx/metering.hpp"
#include "umx/utility.hpp"

namespace umx {

enum class TxKind : std::uint8_t {
  Mint = 0,
  Transfer = 1,
  Escrow = 2,
  Release = 3,
  Refund = 4,
  ContractCreate = 5,
  ContractFulfill = 6,
  ContractRevoke = 7,
  RatingStore = 8,
};

inline const char* to_string(TxKind k) {
  switch (k) {
    case TxKind::Mint: return "Mint";
    case TxKind::Transfer: return "Transfer";
    case TxKind::Escrow: return "Escrow";
    case TxKind::Release: return "Release";
    case TxKind::Refund: return "Refund";
    case TxKind::ContractCreate: return "ContractCreate";
    case TxKind::ContractFulfill: return "ContractFulfill";
    case TxKind::ContractRevoke: return "ContractRevoke";
    case TxKind::RatingStore: return "RatingStore";
  }
  return "?";
}

enum class ContractState : std::uint8_t {
  Proposed = 0,
  Active = 1,
  Fulfilled = 2,
  Revoked = 3,
  Expired = 4,
};

inline const char* to_string(ContractState s) {
  switch (s) {
    case ContractState::Proposed: return "Proposed";
    case ContractState::Active: return "Active";
    case ContractState::Fulfilled: return "Fulfilled";
    case ContractState::Revoked: return "Revoked";
    case ContractState::Expired: return "Expired";
  }
  return "?";
}

inline bool terminal(ContractState s) {
  return s == ContractState::Fulfilled || s == ContractState::Revoked ||
         s == ContractState::Expired;
}

// The agreed economics of a trade. Both parties sign these bytes: the buyer
// through the enclosing transaction, the supplier through a detached
// endorsement over the same bytes.
struct ContractTerms {
  ContractId id;
  AccountId buyer;
  AccountId supplier;
  std::string utility;
  std::int64_t quantity = 0;  // whole base units
  Credits unit_price;         // per unit
  Tick deadline = 0;          // last tick a delivery proof is accepted
  OfferId offer;              // market provenance; zero for direct deals

  bool operator==(const ContractTerms&) const = default;

  std::vector<std::uint8_t> bytes() const {
    ByteWriter w;
    w.tag("CTR1");
    w.id(id);
    w.id(buyer);
    w.id(supplier);
    w.str(utility);
    w.i64(quantity);
    w.i64(unit_price.millis());
    w.i64(deadline);
    w.id(offer);
    return w.take();
  }
};

inline Signature endorse_terms(const KeyPair& supplier_key, const ContractTerms& t) {
  return sign(supplier_key, t.bytes());
}

// On-ledger contract record. Escrow is locked in full at creation; the
// first terminal transition settles it completely, so paid + refunded =
// escrow for every terminal contract.
struct Contract {
  ContractTerms terms;
  ContractState state = ContractState::Active;
  std::int64_t delivered = 0;
  Credits escrow;
  Credits paid;
  Credits refunded;
  bool rated = false;
  int rating = 0;  // buyer's score once rated, 0 otherwise
};

struct MintTx {
  AccountId to;
  Credits amount;
};

struct TransferTx {
  AccountId to;
  Credits amount;
  std::string memo;
};

struct ContractCreateTx {
  ContractTerms terms;
  Signature supplier_sig{};  // over terms.bytes()
};

struct ContractFulfillTx {
  ContractId contract;
  DeliveryProof proof;
};

struct ContractRevokeTx {
  ContractId contract;
  std::optional<DeliveryProof> proof;
};

struct RatingTx {
  ContractId contract;
  std::uint8_t score = 0;
};

using TxPayload = std::variant<MintTx, TransferTx, ContractCreateTx, ContractFulfillTx,
                               ContractRevokeTx, RatingTx>;

// A signed ledger transaction. Escrow, Release and Refund are never
// submitted: they exist only as settlement effects the ledger derives while
// executing contract transactions.
//
// The buyer signs a contract creation before the supplier has endorsed it
// (the endorsement is collected during negotiation), so the supplier
// signature sits outside the signer-signed bytes but inside the bytes a
// block hashes.
struct Transaction {
  AccountId signer;
  std::uint64_t seq = 0;  // strictly increasing per signer; gaps allowed
  TxPayload payload;
  Signature sig{};

  TxKind kind() const {
    switch (payload.index()) {
      case 0: return TxKind::Mint;
      case 1: return TxKind::Transfer;
      case 2: return TxKind::ContractCreate;
      case 3: return TxKind::ContractFulfill;
      case 4: return TxKind::ContractRevoke;
      default: return TxKind::RatingStore;
    }
  }

  std::vector<std::uint8_t> signing_bytes() const { return encode(false); }

  std::vector<std::uint8_t> full_bytes() const {
    auto b = encode(true);
    b.insert(b.end(), sig.begin(), sig.end());
    return b;
  }

 private:
  std::vector<std::uint8_t> encode(bool with_endorsements) const {
    ByteWriter w;
    w.tag("TXS1");
    w.u8(static_cast<std::uint8_t>(kind()));
    w.id(signer);
    w.u64(seq);
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, MintTx>) {
            w.id(p.to);
            w.i64(p.amount.millis());
          } else if constexpr (std::is_same_v<P, TransferTx>) {
            w.id(p.to);
            w.i64(p.amount.millis());
            w.str(p.memo);
          } else if constexpr (std::is_same_v<P, ContractCreateTx>) {
            w.raw(p.terms.bytes());
            if (with_endorsements) w.fixed(p.supplier_sig);
          } else if constexpr (std::is_same_v<P, ContractFulfillTx>) {
            w.id(p.contract);
            w.raw(p.proof.bytes());
          } else if constexpr (std::is_same_v<P, ContractRevokeTx>) {
            w.id(p.contract);
            w.u8(p.proof ? 1 : 0);
            if (p.proof) w.raw(p.proof->bytes());
          } else {
            w.id(p.contract);
            w.u8(p.score);
          }
        },
        payload);
    return w.take();
  }
};

inline Transaction sign_tx(const KeyPair& key, std::uint64_t seq, TxPayload payload) {
  Transaction tx;
  tx.signer = account_id_from_pubkey(key.pub);
  tx.seq = seq;
  tx.payload = std::move(payload);
  tx.sig = sign(key, tx.signing_bytes());
  return tx;
}

inline Transaction make_mint(const KeyPair& authority, std::uint64_t seq, const AccountId& to,
                             Credits amount) {
  return sign_tx(authority, seq, MintTx{to, amount});
}

inline Transaction make_transfer(const KeyPair& from, std::uint64_t seq, const AccountId& to,
                                 Credits amount, std::string memo = {}) {
  return sign_tx(from, seq, TransferTx{to, amount, std::move(memo)});
}

inline Transaction make_contract_create(const KeyPair& buyer, std::uint64_t seq,
                                        ContractTerms terms, const Signature& supplier_sig) {
  return sign_tx(buyer, seq, ContractCreateTx{std::move(terms), supplier_sig});
}

inline Transaction make_fulfill(const KeyPair& submitter, std::uint64_t seq,
                                DeliveryProof proof) {
  ContractId c = proof.contract;
  return sign_tx(submitter, seq, ContractFulfillTx{c, std::move(proof)});
}

inline Transaction make_revoke(const KeyPair& party, std::uint64_t seq, const ContractId& contract,
                               std::optional<DeliveryProof> proof = std::nullopt) {
  return sign_tx(party, seq, ContractRevokeTx{contract, std::move(proof)});
}

inline Transaction make_rating(const KeyPair& buyer, std::uint64_t seq, const ContractId& contract,
                               int score) {
  return sign_tx(buyer, seq, RatingTx{contract, static_cast<std::uint8_t>(score)});
}

// Credit movement performed by the ledger while executing a block. Escrow
// locks buyer funds, Release pays the supplier from escrow, Refund returns
// escrow to the buyer.
struct SettlementEntry {
  TxKind kind = TxKind::Escrow;
  ContractId contract;
  AccountId from;
  AccountId to;
  Credits amount;

  bool operator==(const SettlementEntry&) const = default;
};

// A sealed block. The hash covers height, previous hash, the full
// transaction bytes, the miner and the timestamp; the settlement effects
// are derived data that every replay must reproduce exactly.
struct Block {
  std::uint64_t height = 0;
  Hash32 prev_hash{};
  std::vector<Transaction> txs;
  AccountId miner;
  Tick timestamp = 0;
  Hash32 hash{};
  std::vector<SettlementEntry> effects;

  std::vector<std::uint8_t> header_bytes() const {
    ByteWriter w;
    w.tag("BLK1");
    w.u64(height);
    w.fixed(prev_hash);
    w.u32(static_cast<std::uint32_t>(txs.size()));
    for (const auto& tx : txs) {
      auto b = tx.full_bytes();
      w.bytes(b);
    }
    w.id(miner);
    w.i64(timestamp);
    return w.take();
  }

  Hash32 compute_hash() const { return sha256(header_bytes()); }
};

// Everything a deployment is born with: accounts, the mint authority, the
// block-sealing rotation, enrolled meters, tradable utilities and the
// delivery tolerance. The genesis configuration plus the block stream fully
// determine ledger state.
struct GenesisConfig {
  struct AccountDecl {
    std::string alias;
    PubKey pubkey{};
  };

  struct MeterDecl {
    std::string alias;
    PubKey pubkey{};
    std::string owner;  // account alias
    std::string utility;
    Direction direction = Direction::Produced;
  };

  std::vector<AccountDecl> accounts;
  std::string state_account;            // alias of the mint authority
  std::vector<std::string> authorities; // aliases, round-robin seal order
  std::vector<MeterDecl> meters;
  std::vector<UtilityType> utilities;   // empty means the default registry
  int tolerance_permille = 50;
};

struct Rejection {
  Transaction tx;
  Status why;
};

struct SealResult {
  Block block;
  std::vector<Rejection> rejected;
};

struct ChainVerdict {
  bool ok = true;
  std::uint64_t first_bad_height = 0;
  std::string why;
};

// The permissioned ledger: a hash chain of blocks sealed by a fixed
// round-robin of authority accounts, plus the state those blocks produce
// (wallets, contracts, ratings, consumed meter nonces). Single writer: all
// mutation flows through seal() or apply_block().
class Ledger {
 public:
  static Outcome<Ledger> create(GenesisConfig cfg) {
    Ledger led(std::move(cfg));
    Status st = led.init();
    if (!st.ok()) return {st.code, st.detail};
    return led;
  }

  // --- chain construction -------------------------------------------------

  AccountId expected_miner(std::uint64_t height) const {
    return authority_ids_[height % authority_ids_.size()];
  }

  // Builds, executes and appends the next block. Invalid transactions are
  // excluded from the block and reported; the block itself is still sealed
  // (empty heartbeat blocks are legal). Contracts past deadline are expired
  // and refunded before any transaction runs.
  Outcome<SealResult> seal(std::vector<Transaction> txs, const AccountId& miner, Tick now) {
    if (miner != expected_miner(chain_.size()))
      return {Err::WrongAuthority, "height " + std::to_string(chain_.size()) +
                                       " seals by " + alias(expected_miner(chain_.size()))};
    if (!chain_.empty() && now < chain_.back().timestamp)
      return {Err::ScenarioInvalid, "timestamp regression"};

    SealResult result;
    Block& b = result.block;
    b.height = chain_.size();
    b.prev_hash = chain_.empty() ? Hash32{} : chain_.back().hash;
    b.miner = miner;
    b.timestamp = now;

    sweep_expired(now, b.effects);
    for (auto& tx : txs) {
      std::vector<SettlementEntry> fx;
      Status st = exec_tx(tx, now, fx);
      if (st.ok()) {
        b.txs.push_back(std::move(tx));
        for (auto& e : fx) b.effects.push_back(std::move(e));
      } else {
        result.rejected.push_back({std::move(tx), st});
      }
    }
    b.hash = b.compute_hash();
    chain_.push_back(b);
    return result;
  }

  // Validates and applies a foreign block (import/replay). All or nothing:
  // on failure the ledger is unchanged.
  Status apply_block(const Block& b) {
    if (b.height != chain_.size())
      return Status::fail(Err::ParseError, "expected height " + std::to_string(chain_.size()));
    Hash32 want_prev = chain_.empty() ? Hash32{} : chain_.back().hash;
    if (b.prev_hash != want_prev) return Status::fail(Err::ParseError, "previous hash mismatch");
    if (!chain_.empty() && b.timestamp < chain_.back().timestamp)
      return Status::fail(Err::ParseError, "timestamp regression");
    if (b.miner != expected_miner(b.height))
      return Status::fail(Err::WrongAuthority, "wrong sealing authority");
    if (b.hash != b.compute_hash()) return Status::fail(Err::ParseError, "block hash mismatch");

    State snapshot = state_;
    std::vector<SettlementEntry> fx;
    sweep_expired(b.timestamp, fx);
    for (const auto& tx : b.txs) {
      std::vector<SettlementEntry> tx_fx;
      Status st = exec_tx(tx, b.timestamp, tx_fx);
      if (!st.ok()) {
        state_ = std::move(snapshot);
        return Status::fail(st.code, "tx invalid: " + st.message());
      }
      for (auto& e : tx_fx) fx.push_back(std::move(e));
    }
    if (fx != b.effects) {
      state_ = std::move(snapshot);
      return Status::fail(Err::ParseError, "settlement effects do not replay");
    }
    chain_.push_back(b);
    return Status::success();
  }

  // --- queries --------------------------------------------------------------

  const std::vector<Block>& chain() const { return chain_; }
  const GenesisConfig& config() const { return cfg_; }
  const CreditBook& credits() const { return state_.book; }
  const MeterRegistry& meters() const { return state_.meters; }
  const UtilityRegistry& utilities() const { return utilities_; }
  const AccountId& state_account() const { return state_id_; }
  int tolerance_permille() const { return cfg_.tolerance_permille; }

  const Contract* contract(const ContractId& id) const {
    auto it = state_.contracts.find(id);
    return it == state_.contracts.end() ? nullptr : &it->second;
  }

  const std::map<ContractId, Contract>& contracts() const { return state_.contracts; }

  // All scores received as supplier plus the account's own revocation count.
  std::pair<std::vector<int>, std::int64_t> query_ratings(const AccountId& id) const {
    std::pair<std::vector<int>, std::int64_t> out;
    auto r = state_.ratings.find(id);
    if (r != state_.ratings.end()) out.first = r->second;
    auto v = state_.revocations.find(id);
    out.second = v == state_.revocations.end() ? 0 : v->second;
    return out;
  }

  std::uint64_t last_seq(const AccountId& id) const {
    auto it = state_.last_seq.find(id);
    return it == state_.last_seq.end() ? 0 : it->second;
  }

  const AccountId* account_id(std::string_view alias) const {
    auto it = by_alias_.find(std::string(alias));
    return it == by_alias_.end() ? nullptr : &it->second;
  }

  std::string alias(const AccountId& id) const {
    auto it = aliases_.find(id);
    return it == aliases_.end() ? id.hex() : it->second;
  }

  const PubKey* account_key(const AccountId& id) const {
    auto it = keys_.find(id);
    return it == keys_.end() ? nullptr : &it->second;
  }

  const std::map<AccountId, PubKey>& account_keys() const { return keys_; }

  bool conserved() const { return state_.book.conserved(); }

  // Escrow safety: every Active contract's earmark equals its full escrow;
  // terminal contracts hold none.
  bool escrow_consistent() const {
    for (const auto& [id, c] : state_.contracts) {
      Credits mark = state_.book.escrowed_for(c.terms.buyer, id);
      if (c.state == ContractState::Active) {
        if (mark != c.escrow) return false;
      } else if (!mark.is_zero()) {
        return false;
      }
      if (terminal(c.state) && c.paid + c.refunded != c.escrow) return false;
    }
    return true;
  }

 private:
  struct State {
    CreditBook book;
    std::map<AccountId, std::uint64_t> last_seq;
    std::map<ContractId, Contract> contracts;
    std::map<AccountId, std::vector<int>> ratings;
    std::map<AccountId, std::int64_t> revocations;
    MeterRegistry meters;
  };

  explicit Ledger(GenesisConfig cfg) : cfg_(std::move(cfg)) {}

  Status init() {
    if (cfg_.accounts.empty()) return Status::fail(Err::ScenarioInvalid, "no accounts");
    for (const auto& a : cfg_.accounts) {
      if (a.alias.empty()) return Status::fail(Err::ScenarioInvalid, "account without alias");
      AccountId id = account_id_from_pubkey(a.pubkey);
      if (!by_alias_.try_emplace(a.alias, id).second)
        return Status::fail(Err::ScenarioInvalid, "duplicate account alias: " + a.alias);
      if (!aliases_.try_emplace(id, a.alias).second)
        return Status::fail(Err::ScenarioInvalid, "duplicate account key: " + a.alias);
      keys_[id] = a.pubkey;
      state_.book.open(id);
    }
    auto st = by_alias_.find(cfg_.state_account);
    if (st == by_alias_.end())
      return Status::fail(Err::ScenarioInvalid, "unknown state account: " + cfg_.state_account);
    state_id_ = st->second;
    if (cfg_.authorities.empty())
      return Status::fail(Err::ScenarioInvalid, "empty authority rotation");
    for (const auto& alias : cfg_.authorities) {
      auto it = by_alias_.find(alias);
      if (it == by_alias_.end())
        return Status::fail(Err::ScenarioInvalid, "unknown authority: " + alias);
      authority_ids_.push_back(it->second);
    }
    for (const auto& u : cfg_.utilities) {
      if (utilities_.find(u.name)) continue;
      Status s = utilities_.add(u.name, u.unit);
      if (!s.ok()) return s;
    }
    if (cfg_.tolerance_permille < 0 || cfg_.tolerance_permille > 1000)
      return Status::fail(Err::ScenarioInvalid, "tolerance out of range");
    for (const auto& m : cfg_.meters) {
      auto owner = by_alias_.find(m.owner);
      if (owner == by_alias_.end())
        return Status::fail(Err::ScenarioInvalid, "meter owner unknown: " + m.owner);
      if (!utilities_.find(m.utility))
        return Status::fail(Err::ScenarioInvalid, "meter utility unknown: " + m.utility);
      MeterInfo info;
      info.id = meter_id_from_pubkey(m.pubkey);
      info.pubkey = m.pubkey;
      info.owner = owner->second;
      info.utility = m.utility;
      info.direction = m.direction;
      info.alias = m.alias;
      Status s = state_.meters.enroll(std::move(info));
      if (!s.ok()) return Status::fail(Err::ScenarioInvalid, "meter " + m.alias + ": " + s.message());
    }
    return Status::success();
  }

  void sweep_expired(Tick now, std::vector<SettlementEntry>& fx) {
    for (auto& [id, c] : state_.contracts) {
      if (c.state != ContractState::Active || c.terms.deadline >= now) continue;
      c.state = ContractState::Expired;
      c.refunded = c.escrow;
      state_.book.refund(c.terms.buyer, id, c.escrow);
      fx.push_back({TxKind::Refund, id, c.terms.buyer, c.terms.buyer, c.escrow});
    }
  }

  // Validates a proof against a contract's terms and the meter registry.
  // Registration and signature failures surface as BadProof; quantity
  // disagreements beyond tolerance as Disputed.
  Status check_proof(const Contract& c, const ContractId& id, const DeliveryProof& p) const {
    if (p.contract != id) return Status::fail(Err::BadProof, "proof bound to another contract");
    Status s = state_.meters.check(p.supplied);
    if (!s.ok()) return Status::fail(Err::BadProof, "supplier reading: " + s.message());
    s = state_.meters.check(p.received);
    if (!s.ok()) return Status::fail(Err::BadProof, "consumer reading: " + s.message());
    if (p.supplied.owner != c.terms.supplier)
      return Status::fail(Err::BadProof, "supplier reading not from the supplier");
    if (p.received.owner != c.terms.buyer)
      return Status::fail(Err::BadProof, "consumer reading not from the buyer");
    if (p.supplied.utility != c.terms.utility || p.received.utility != c.terms.utility)
      return Status::fail(Err::BadProof, "readings for a different utility");
    auto qty = match_readings(p.supplied, p.received, cfg_.tolerance_permille);
    if (!qty) {
      if (qty.code() == Err::Disputed) return qty.status();
      return Status::fail(Err::BadProof, qty.message());
    }
    if (p.quantity != qty.value())
      return Status::fail(Err::BadProof, "proof quantity is not the consumer reading");
    if (p.quantity > c.terms.quantity)
      return Status::fail(Err::BadProof, "delivered more than contracted");
    return Status::success();
  }

  // Pays the supplier pro rata for delivered units and refunds the rest of
  // the escrow to the buyer. Caller has validated everything.
  void settle(const ContractId& id, Contract& c, std::int64_t delivered, ContractState final_state,
              std::vector<SettlementEntry>& fx) {
    c.delivered = delivered;
    auto payout = Credits::scale(c.terms.unit_price, delivered);
    c.paid = *payout;
    c.refunded = c.escrow - c.paid;
    if (c.paid.positive()) {
      state_.book.release(c.terms.buyer, c.terms.supplier, id, c.paid);
      fx.push_back({TxKind::Release, id, c.terms.buyer, c.terms.supplier, c.paid});
    }
    if (c.refunded.positive()) {
      state_.book.refund(c.terms.buyer, id, c.refunded);
      fx.push_back({TxKind::Refund, id, c.terms.buyer, c.terms.buyer, c.refunded});
    }
    c.state = final_state;
  }

  Status exec_tx(const Transaction& tx, Tick now, std::vector<SettlementEntry>& fx) {
    auto key = keys_.find(tx.signer);
    if (key == keys_.end()) return Status::fail(Err::UnknownAccount, tx.signer.hex());
    if (!verify(key->second, tx.signing_bytes(), tx.sig))
      return Status::fail(Err::BadSignature, "transaction signature invalid");
    std::uint64_t& last = state_.last_seq[tx.signer];
    if (tx.seq <= last)
      return Status::fail(Err::BadSeq, "seq " + std::to_string(tx.seq) + " not above " +
                                           std::to_string(last));

    Status st = std::visit([&](const auto& p) { return exec_payload(tx, p, now, fx); },
                           tx.payload);
    if (!st.ok()) return st;
    last = tx.seq;
    return Status::success();
  }

  Status exec_payload(const Transaction& tx, const MintTx& p, Tick, std::vector<SettlementEntry>&) {
    if (tx.signer != state_id_)
      return Status::fail(Err::NotMintAuthority, alias(tx.signer) + " cannot mint");
    return state_.book.mint(p.to, p.amount);
  }

  Status exec_payload(const Transaction& tx, const TransferTx& p, Tick,
                      std::vector<SettlementEntry>&) {
    return state_.book.transfer(tx.signer, p.to, p.amount);
  }

  Status exec_payload(const Transaction& tx, const ContractCreateTx& p, Tick now,
                      std::vector<SettlementEntry>& fx) {
    const ContractTerms& t = p.terms;
    if (t.id.is_zero()) return Status::fail(Err::ScenarioInvalid, "zero contract id");
    if (state_.contracts.count(t.id)) return Status::fail(Err::DuplicateContract, t.id.hex());
    if (tx.signer != t.buyer)
      return Status::fail(Err::NotBuyer, "contract creation is submitted by the buyer");
    auto sup = keys_.find(t.supplier);
    if (sup == keys_.end()) return Status::fail(Err::UnknownAccount, "supplier");
    if (!utilities_.find(t.utility))
      return Status::fail(Err::UtilityMismatch, "unknown utility: " + t.utility);
    if (t.quantity <= 0) return Status::fail(Err::InvalidQuantity, std::to_string(t.quantity));
    if (!t.unit_price.positive())
      return Status::fail(Err::NonPositivePrice, t.unit_price.str());
    if (t.deadline <= now) return Status::fail(Err::DeadlineInPast, "deadline not after now");
    if (!verify(sup->second, t.bytes(), p.supplier_sig))
      return Status::fail(Err::BadSignature, "supplier endorsement invalid");
    auto escrow = Credits::scale(t.unit_price, t.quantity);
    if (!escrow) return Status::fail(Err::Overflow, "escrow amount");
    Status st = state_.book.escrow(t.buyer, t.id, *escrow);
    if (!st.ok()) return st;

    Contract c;
    c.terms = t;
    c.state = ContractState::Active;
    c.escrow = *escrow;
    state_.contracts.emplace(t.id, std::move(c));
    fx.push_back({TxKind::Escrow, t.id, t.buyer, t.buyer, *escrow});
    return Status::success();
  }

  Status exec_payload(const Transaction&, const ContractFulfillTx& p, Tick now,
                      std::vector<SettlementEntry>& fx) {
    auto it = state_.contracts.find(p.contract);
    if (it == state_.contracts.end()) return Status::fail(Err::NoSuchTarget, p.contract.hex());
    Contract& c = it->second;
    if (c.state == ContractState::Expired)
      return Status::fail(Err::DeadlinePassed, "contract already expired");
    if (c.state != ContractState::Active)
      return Status::fail(Err::ContractNotActive, to_string(c.state));
    if (now > c.terms.deadline) return Status::fail(Err::DeadlinePassed, "past deadline");
    Status st = check_proof(c, p.contract, p.proof);
    if (!st.ok()) return st;
    state_.meters.consume(p.proof.supplied);
    state_.meters.consume(p.proof.received);
    settle(p.contract, c, p.proof.quantity, ContractState::Fulfilled, fx);
    return Status::success();
  }

  Status exec_payload(const Transaction& tx, const ContractRevokeTx& p, Tick,
                      std::vector<SettlementEntry>& fx) {
    auto it = state_.contracts.find(p.contract);
    if (it == state_.contracts.end()) return Status::fail(Err::NoSuchTarget, p.contract.hex());
    Contract& c = it->second;
    if (c.state != ContractState::Active)
      return Status::fail(Err::ContractNotActive, to_string(c.state));
    if (tx.signer != c.terms.buyer && tx.signer != c.terms.supplier)
      return Status::fail(Err::NotAParty, "revocation is reserved to the parties");
    std::int64_t delivered = 0;
    if (p.proof) {
      Status st = check_proof(c, p.contract, *p.proof);
      if (!st.ok()) return st;
      delivered = p.proof->quantity;
    }
    if (p.proof) {
      state_.meters.consume(p.proof->supplied);
      state_.meters.consume(p.proof->received);
    }
    settle(p.contract, c, delivered, ContractState::Revoked, fx);
    state_.revocations[tx.signer] += 1;
    return Status::success();
  }

  Status exec_payload(const Transaction& tx, const RatingTx& p, Tick,
                      std::vector<SettlementEntry>&) {
    auto it = state_.contracts.find(p.contract);
    if (it == state_.contracts.end()) return Status::fail(Err::NoSuchTarget, p.contract.hex());
    Contract& c = it->second;
    if (tx.signer != c.terms.buyer)
      return Status::fail(Err::NotBuyer, "only the buyer rates");
    if (c.state != ContractState::Fulfilled && c.state != ContractState::Revoked)
      return Status::fail(Err::ContractNotTerminal,
                          c.state == ContractState::Expired ? "expired contracts are not rated"
                                                            : to_string(c.state));
    if (c.rated) return Status::fail(Err::DuplicateRating, p.contract.hex());
    if (p.score < 1 || p.score > 5)
      return Status::fail(Err::InvalidScore, std::to_string(int(p.score)));
    c.rated = true;
    c.rating = p.score;
    state_.ratings[c.terms.supplier].push_back(p.score);
    return Status::success();
  }

  GenesisConfig cfg_;
  UtilityRegistry utilities_;
  AccountId state_id_;
  std::vector<AccountId> authority_ids_;
  std::map<std::string, AccountId> by_alias_;
  std::map<AccountId, std::string> aliases_;
  std::map<AccountId, PubKey> keys_;
  State state_;
  std::vector<Block> chain_;
};

// Replays a block stream from scratch against a genesis configuration.
// Valid when every block's hash recomputes and links, the authority
// rotation is honored, every transaction revalidates, and the recorded
// settlement effects reproduce.
inline ChainVerdict verify_chain(const GenesisConfig& cfg, const std::vector<Block>& blocks) {
  auto led = Ledger::create(cfg);
  if (!led) return {false, 0, led.message()};
  for (const auto& b : blocks) {
    Status st = led.value().apply_block(b);
    if (!st.ok()) return {false, b.height, st.message()};
  }
  return {true, 0, ""};
}

}  // namespace umx

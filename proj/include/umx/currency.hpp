#pragma once

#include <map>

#include "umx/common.hpp"
#include "umx/credits.hpp"

namespace umx {

// Per-account wallets in the single trade currency. Each wallet has a free
// balance and escrow locked per contract. Every movement either conserves
// the total supply or is an explicit mint, so sum(free) + sum(escrowed)
// equals the sum of all mints at every point in time.
class CreditBook {
 public:
  struct Wallet {
    Credits free;
    std::map<ContractId, Credits> escrowed;

    Credits escrow_total() const {
      Credits sum;
      for (const auto& [c, amt] : escrowed) sum += amt;
      return sum;
    }
  };

  void open(const AccountId& id) { wallets_.try_emplace(id); }
  bool exists(const AccountId& id) const { return wallets_.count(id) != 0; }

  Credits free(const AccountId& id) const {
    auto it = wallets_.find(id);
    return it == wallets_.end() ? Credits::zero() : it->second.free;
  }

  Credits escrowed(const AccountId& id) const {
    auto it = wallets_.find(id);
    return it == wallets_.end() ? Credits::zero() : it->second.escrow_total();
  }

  Credits escrowed_for(const AccountId& id, const ContractId& c) const {
    auto it = wallets_.find(id);
    if (it == wallets_.end()) return Credits::zero();
    auto e = it->second.escrowed.find(c);
    return e == it->second.escrowed.end() ? Credits::zero() : e->second;
  }

  Credits total(const AccountId& id) const { return free(id) + escrowed(id); }

  // Creates new credits. Authority checks live in the ledger; the book only
  // guards the amount.
  Status mint(const AccountId& to, Credits amount) {
    if (!amount.positive()) return Status::fail(Err::NonPositiveAmount, "mint " + amount.str());
    auto it = wallets_.find(to);
    if (it == wallets_.end()) return Status::fail(Err::UnknownAccount, to.hex());
    it->second.free += amount;
    minted_ += amount;
    return Status::success();
  }

  Status transfer(const AccountId& from, const AccountId& to, Credits amount) {
    if (!amount.positive())
      return Status::fail(Err::NonPositiveAmount, "transfer " + amount.str());
    auto f = wallets_.find(from);
    if (f == wallets_.end()) return Status::fail(Err::UnknownAccount, from.hex());
    auto t = wallets_.find(to);
    if (t == wallets_.end()) return Status::fail(Err::UnknownAccount, to.hex());
    if (f->second.free < amount)
      return Status::fail(Err::InsufficientCredits,
                          "have " + f->second.free.str() + ", need " + amount.str());
    f->second.free -= amount;
    t->second.free += amount;
    return Status::success();
  }

  // Locks part of an account's free balance, earmarked to one contract.
  Status escrow(const AccountId& who, const ContractId& contract, Credits amount) {
    if (!amount.positive()) return Status::fail(Err::NonPositiveAmount, "escrow " + amount.str());
    auto it = wallets_.find(who);
    if (it == wallets_.end()) return Status::fail(Err::UnknownAccount, who.hex());
    if (it->second.free < amount)
      return Status::fail(Err::InsufficientCredits,
                          "have " + it->second.free.str() + ", need " + amount.str());
    if (it->second.escrowed.count(contract))
      return Status::fail(Err::DuplicateContract, "escrow already placed");
    it->second.free -= amount;
    it->second.escrowed[contract] = amount;
    return Status::success();
  }

  // Pays earmarked funds out to another account.
  Status release(const AccountId& from, const AccountId& to, const ContractId& contract,
                 Credits amount) {
    if (!amount.positive()) return Status::fail(Err::NonPositiveAmount, "release " + amount.str());
    auto f = wallets_.find(from);
    if (f == wallets_.end()) return Status::fail(Err::UnknownAccount, from.hex());
    auto t = wallets_.find(to);
    if (t == wallets_.end()) return Status::fail(Err::UnknownAccount, to.hex());
    auto e = f->second.escrowed.find(contract);
    if (e == f->second.escrowed.end() || e->second < amount)
      return Status::fail(Err::InsufficientCredits, "earmark smaller than release");
    e->second -= amount;
    if (e->second.is_zero()) f->second.escrowed.erase(e);
    t->second.free += amount;
    return Status::success();
  }

  // Returns earmarked funds to their owner's free balance.
  Status refund(const AccountId& who, const ContractId& contract, Credits amount) {
    if (!amount.positive()) return Status::fail(Err::NonPositiveAmount, "refund " + amount.str());
    auto it = wallets_.find(who);
    if (it == wallets_.end()) return Status::fail(Err::UnknownAccount, who.hex());
    auto e = it->second.escrowed.find(contract);
    if (e == it->second.escrowed.end() || e->second < amount)
      return Status::fail(Err::InsufficientCredits, "earmark smaller than refund");
    e->second -= amount;
    if (e->second.is_zero()) it->second.escrowed.erase(e);
    it->second.free += amount;
    return Status::success();
  }

  Credits minted() const { return minted_; }

  Credits circulating() const {
    Credits sum;
    for (const auto& [id, w] : wallets_) sum += w.free + w.escrow_total();
    return sum;
  }

  // Conservation invariant: nothing is created or destroyed outside mint.
  bool conserved() const { return circulating() == minted_; }

  const std::map<AccountId, Wallet>& wallets() const { return wallets_; }

 private:
  std::map<AccountId, Wallet> wallets_;
  Credits minted_;
};

// Edge-triggered low-balance alarm: fires once when the free balance drops
// below the threshold (strictly) and re-arms once it recovers to at least
// the threshold.
class LowCreditMonitor {
 public:
  explicit LowCreditMonitor(Credits threshold = Credits::from_whole(10))
      : threshold_(threshold) {}

  Credits threshold() const { return threshold_; }

  // Feed the current free balance; true means "notify now".
  bool observe(Credits free) {
    if (free >= threshold_) {
      armed_ = true;
      return false;
    }
    if (!armed_) return false;
    armed_ = false;
    return true;
  }

 private:
  Credits threshold_;
  bool armed_ = true;
};

}  // namespace umx

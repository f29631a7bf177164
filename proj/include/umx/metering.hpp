#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "umx/common.hpp"
#include "umx/crypto.hpp"
#include "umx/encoding.hpp"

namespace umx {

enum class Direction : std::uint8_t { Produced = 0, Consumed = 1 };

inline const char* to_string(Direction d) {
  return d == Direction::Produced ? "Produced" : "Consumed";
}

// Registration record for a metering device. Meters are enrolled in the
// genesis configuration; the genesis block is the root of trust, so no
// further endorsement is needed. A meter measures one utility flowing in
// one direction for one account and signs every reading with its own key.
struct MeterInfo {
  MeterId id;
  PubKey pubkey{};
  AccountId owner;
  std::string utility;
  Direction direction = Direction::Produced;
  std::string alias;  // display only
};

// One signed measurement. The nonce makes each reading single-use: the
// ledger consumes it when a delivery proof is accepted, so a reading can
// never back two settlements.
struct MeterReading {
  MeterId meter;
  AccountId owner;
  Direction direction = Direction::Produced;
  std::string utility;
  std::int64_t quantity = 0;  // whole base units
  Tick tick = 0;
  std::uint64_t nonce = 0;
  Signature sig{};

  std::vector<std::uint8_t> signing_bytes() const {
    ByteWriter w;
    w.tag("MTR1");
    w.id(meter);
    w.id(owner);
    w.u8(static_cast<std::uint8_t>(direction));
    w.str(utility);
    w.i64(quantity);
    w.i64(tick);
    w.u64(nonce);
    return w.take();
  }
};

inline bool verify_reading(const MeterReading& r, const PubKey& meter_pub) {
  return verify(meter_pub, r.signing_bytes(), r.sig);
}

// A live meter: registration data plus the signing key and a nonce counter.
class Meter {
 public:
  Meter(MeterInfo info, KeyPair key) : info_(std::move(info)), key_(key) {}

  const MeterInfo& info() const { return info_; }

  Outcome<MeterReading> sign_reading(std::int64_t quantity, Tick tick) {
    if (quantity < 0) return {Err::BadReading, "negative quantity"};
    MeterReading r;
    r.meter = info_.id;
    r.owner = info_.owner;
    r.direction = info_.direction;
    r.utility = info_.utility;
    r.quantity = quantity;
    r.tick = tick;
    r.nonce = next_nonce_++;
    r.sig = sign(key_, r.signing_bytes());
    return r;
  }

 private:
  MeterInfo info_;
  KeyPair key_;
  std::uint64_t next_nonce_ = 1;
};

// The ledger-side view of enrolled meters plus the consumed-nonce set.
// check() is read only; consume() is called once a proof is accepted into
// a block, which is the single point where replay protection advances.
class MeterRegistry {
 public:
  Status enroll(MeterInfo info) {
    if (info.id != meter_id_from_pubkey(info.pubkey))
      return Status::fail(Err::BadReading, "meter id does not match key");
    auto [it, fresh] = meters_.try_emplace(info.id, std::move(info));
    if (!fresh) return Status::fail(Err::BadReading, "meter already enrolled");
    return Status::success();
  }

  const MeterInfo* find(const MeterId& id) const {
    auto it = meters_.find(id);
    return it == meters_.end() ? nullptr : &it->second;
  }

  Status check(const MeterReading& r) const {
    auto it = meters_.find(r.meter);
    if (it == meters_.end()) return Status::fail(Err::UnregisteredMeter, r.meter.hex());
    const MeterInfo& m = it->second;
    if (r.owner != m.owner)
      return Status::fail(Err::OwnerMismatch, "reading claims a different owner");
    if (r.utility != m.utility)
      return Status::fail(Err::UtilityMismatch, r.utility + " from a " + m.utility + " meter");
    if (r.direction != m.direction)
      return Status::fail(Err::BadReading, "meter does not measure that direction");
    if (!verify_reading(r, m.pubkey))
      return Status::fail(Err::BadReading, "reading signature invalid");
    auto seen = seen_.find(r.meter);
    if (seen != seen_.end() && seen->second.count(r.nonce))
      return Status::fail(Err::BadReading, "nonce already consumed");
    return Status::success();
  }

  void consume(const MeterReading& r) { seen_[r.meter].insert(r.nonce); }

  const std::map<MeterId, MeterInfo>& all() const { return meters_; }

 private:
  std::map<MeterId, MeterInfo> meters_;
  std::map<MeterId, std::set<std::uint64_t>> seen_;
};

// Proof of delivery: the supplier's outgoing measurement paired with the
// consumer's incoming one, bound to the contract they settle. The proof
// quantity is what the consumer metered.
struct DeliveryProof {
  ContractId contract;
  MeterReading supplied;
  MeterReading received;
  std::int64_t quantity = 0;

  std::vector<std::uint8_t> bytes() const {
    ByteWriter w;
    w.tag("PRF1");
    w.id(contract);
    auto s = supplied.signing_bytes();
    w.bytes(s);
    w.fixed(supplied.sig);
    auto r = received.signing_bytes();
    w.bytes(r);
    w.fixed(received.sig);
    w.i64(quantity);
    return w.take();
  }
};

// Cross-checks the two readings of a proof, ignoring signatures and meter
// registration (the ledger checks those against its registry). Losses up to
// tolerance_permille of the supplied quantity are accepted; the consumer
// metering more than the supplier sent is always a dispute, as is a
// shortfall beyond tolerance. Returns the delivered quantity.
inline Outcome<std::int64_t> match_readings(const MeterReading& supplied,
                                            const MeterReading& received,
                                            int tolerance_permille) {
  if (supplied.direction != Direction::Produced)
    return {Err::BadProof, "supplier reading must be Produced"};
  if (received.direction != Direction::Consumed)
    return {Err::BadProof, "consumer reading must be Consumed"};
  if (supplied.utility != received.utility)
    return {Err::UtilityMismatch, supplied.utility + " vs " + received.utility};
  if (supplied.quantity <= 0 || received.quantity <= 0)
    return {Err::BadProof, "reading quantities must be positive"};
  if (received.quantity > supplied.quantity)
    return {Err::Disputed, "consumer metered more than supplied"};
  auto shortfall = checked_mul(supplied.quantity - received.quantity, 1000);
  auto band = checked_mul(static_cast<std::int64_t>(tolerance_permille), supplied.quantity);
  if (!shortfall || !band) return {Err::Overflow, "reading quantity"};
  if (*shortfall > *band) return {Err::Disputed, "loss exceeds tolerance"};
  return received.quantity;
}

// Assembles a proof for a contract from the two party readings. Owners and
// utility must line up with the contract; quantity tolerance per
// match_readings. Signature and nonce validity are the ledger's check.
inline Outcome<DeliveryProof> build_proof(const ContractId& contract, const AccountId& supplier,
                                          const AccountId& buyer, std::string_view utility,
                                          MeterReading supplied, MeterReading received,
                                          int tolerance_permille) {
  if (supplied.owner != supplier) return {Err::OwnerMismatch, "supplier reading owner"};
  if (received.owner != buyer) return {Err::OwnerMismatch, "consumer reading owner"};
  if (supplied.utility != utility)
    return {Err::UtilityMismatch, supplied.utility + " on a " + std::string(utility) + " contract"};
  if (received.utility != utility)
    return {Err::UtilityMismatch, received.utility + " on a " + std::string(utility) + " contract"};
  auto qty = match_readings(supplied, received, tolerance_permille);
  if (!qty) return {qty.code(), qty.detail()};
  DeliveryProof p;
  p.contract = contract;
  p.supplied = std::move(supplied);
  p.received = std::move(received);
  p.quantity = qty.value();
  return p;
}

// Anything that can feed a meter: physical hardware adapters and the
// simulator's scripted generators implement the same contract. poll()
// returns the units produced or consumed since the previous poll, or
// nothing when the device is idle.
class DeviceDriver {
 public:
  struct Description {
    std::string utility;
    std::string unit;
    std::string meter_alias;
  };

  virtual ~DeviceDriver() = default;
  virtual Description describe() const = 0;
  virtual std::optional<std::int64_t> poll(Tick now) = 0;
};

// Scripted generator: a constant rate over [from, until], the default
// driver for simulated devices.
class ScriptedDriver : public DeviceDriver {
 public:
  ScriptedDriver(Description desc, std::int64_t rate, Tick from, Tick until)
      : desc_(std::move(desc)), rate_(rate), from_(from), until_(until) {}

  Description describe() const override { return desc_; }

  std::optional<std::int64_t> poll(Tick now) override {
    if (now < from_ || now > until_ || rate_ <= 0) return std::nullopt;
    return rate_;
  }

 private:
  Description desc_;
  std::int64_t rate_ = 0;
  Tick from_ = 0;
  Tick until_ = 0;
};

// Named driver factories. Scenario files refer to drivers by name; tests
// and embedders may register additional kinds. Factories receive the
// description plus an opaque key/value parameter map.
class DriverRegistry {
 public:
  using Params = std::map<std::string, std::int64_t>;
  using Factory =
      std::function<std::unique_ptr<DeviceDriver>(DeviceDriver::Description, const Params&)>;

  DriverRegistry() {
    register_factory("scripted", [](DeviceDriver::Description d, const Params& p) {
      auto get = [&](const char* k, std::int64_t dflt) {
        auto it = p.find(k);
        return it == p.end() ? dflt : it->second;
      };
      return std::make_unique<ScriptedDriver>(std::move(d), get("rate", 0), get("from", 0),
                                              get("until", INT64_MAX));
    });
  }

  Status register_factory(std::string name, Factory f) {
    if (name.empty() || !f) return Status::fail(Err::ScenarioInvalid, "bad driver factory");
    auto [it, fresh] = factories_.try_emplace(std::move(name), std::move(f));
    if (!fresh) return Status::fail(Err::ScenarioInvalid, "duplicate driver: " + it->first);
    return Status::success();
  }

  Outcome<std::unique_ptr<DeviceDriver>> make(const std::string& name,
                                              DeviceDriver::Description desc,
                                              const Params& params) const {
    auto it = factories_.find(name);
    if (it == factories_.end()) return {Err::NoSuchTarget, "driver: " + name};
    auto drv = it->second(std::move(desc), params);
    if (!drv) return {Err::ScenarioInvalid, "driver factory returned nothing: " + name};
    return drv;
  }

  bool has(const std::string& name) const { return factories_.count(name) != 0; }

 private:
  std::map<std::string, Factory> factories_;
};

}  // namespace umx

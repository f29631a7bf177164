#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace umx {

// Simulation time is a global logical clock of integer ticks.
using Tick = std::int64_t;

enum class Err {
  None,
  // ledger / chain
  WrongAuthority,
  BadSignature,
  BadSeq,
  UnknownAccount,
  DuplicateContract,
  InvalidKind,
  // currency
  NotMintAuthority,
  NonPositiveAmount,
  InsufficientCredits,
  // contracts
  InvalidQuantity,
  DeadlineInPast,
  ContractNotActive,
  DeadlinePassed,
  NotAParty,
  BadProof,
  // ratings
  DuplicateRating,
  NotBuyer,
  ContractNotTerminal,
  InvalidScore,
  // metering
  UnregisteredMeter,
  UtilityMismatch,
  OwnerMismatch,
  Disputed,
  BadReading,
  // market
  AlreadyExpired,
  NonPositiveQuantity,
  OfferGone,
  // pricing
  NonPositivePrice,
  ZeroTargetStock,
  // scenario / cli
  ScenarioInvalid,
  NoSuchTarget,
  ParseError,
  Overflow,
};

inline const char* to_string(Err e) {
  switch (e) {
    case Err::None: return "None";
    case Err::WrongAuthority: return "WrongAuthority";
    case Err::BadSignature: return "BadSignature";
    case Err::BadSeq: return "BadSeq";
    case Err::UnknownAccount: return "UnknownAccount";
    case Err::DuplicateContract: return "DuplicateContract";
    case Err::InvalidKind: return "InvalidKind";
    case Err::NotMintAuthority: return "NotMintAuthority";
    case Err::NonPositiveAmount: return "NonPositiveAmount";
    case Err::InsufficientCredits: return "InsufficientCredits";
    case Err::InvalidQuantity: return "InvalidQuantity";
    case Err::DeadlineInPast: return "DeadlineInPast";
    case Err::ContractNotActive: return "ContractNotActive";
    case Err::DeadlinePassed: return "DeadlinePassed";
    case Err::NotAParty: return "NotAParty";
    case Err::BadProof: return "BadProof";
    case Err::DuplicateRating: return "DuplicateRating";
    case Err::NotBuyer: return "NotBuyer";
    case Err::ContractNotTerminal: return "ContractNotTerminal";
    case Err::InvalidScore: return "InvalidScore";
    case Err::UnregisteredMeter: return "UnregisteredMeter";
    case Err::UtilityMismatch: return "UtilityMismatch";
    case Err::OwnerMismatch: return "OwnerMismatch";
    case Err::Disputed: return "Disputed";
    case Err::BadReading: return "BadReading";
    case Err::AlreadyExpired: return "AlreadyExpired";
    case Err::NonPositiveQuantity: return "NonPositiveQuantity";
    case Err::OfferGone: return "OfferGone";
    case Err::NonPositivePrice: return "NonPositivePrice";
    case Err::ZeroTargetStock: return "ZeroTargetStock";
    case Err::ScenarioInvalid: return "ScenarioInvalid";
    case Err::NoSuchTarget: return "NoSuchTarget";
    case Err::ParseError: return "ParseError";
    case Err::Overflow: return "Overflow";
  }
  return "?";
}

// Success/failure result for operations that have no interesting value.
struct Status {
  Err code = Err::None;
  std::string detail;

  bool ok() const { return code == Err::None; }
  explicit operator bool() const { return ok(); }

  static Status success() { return {}; }
  static Status fail(Err e, std::string d = {}) { return {e, std::move(d)}; }

  std::string message() const {
    std::string m = to_string(code);
    if (!detail.empty()) {
      m += ": ";
      m += detail;
    }
    return m;
  }
};

// Result carrying either a value or an error code with detail.
template <typename T>
class Outcome {
 public:
  Outcome(T value) : value_(std::move(value)) {}
  Outcome(Err code, std::string detail = {}) : err_{code, std::move(detail)} {}
  Outcome(Status failed) : err_(std::move(failed)) {}  // propagate a failure from another result

  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }

  const T& value() const& { return *value_; }
  T& value() & { return *value_; }
  T&& take() { return std::move(*value_); }

  Err code() const { return err_.code; }
  const std::string& detail() const { return err_.detail; }
  Status status() const { return ok() ? Status::success() : err_; }
  std::string message() const { return err_.message(); }

 private:
  std::optional<T> value_;
  Status err_;
};

inline char hex_digit(unsigned v) { return "0123456789abcdef"[v & 0xf]; }

inline std::string to_hex(const std::uint8_t* data, std::size_t n) {
  std::string s;
  s.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    s += hex_digit(data[i] >> 4);
    s += hex_digit(data[i]);
  }
  return s;
}

template <std::size_t N>
std::string to_hex(const std::array<std::uint8_t, N>& a) {
  return to_hex(a.data(), N);
}

inline std::string to_hex(const std::vector<std::uint8_t>& v) {
  return to_hex(v.data(), v.size());
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline std::optional<std::vector<std::uint8_t>> from_hex(std::string_view s) {
  if (s.size() % 2 != 0) return std::nullopt;
  std::vector<std::uint8_t> out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(s[2 * i]);
    int lo = hex_value(s[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

// 16-byte opaque identifier; the tag keeps account, meter, contract and
// offer ids from being mixed up at compile time.
template <typename Tag>
struct Id16 {
  std::array<std::uint8_t, 16> bytes{};

  auto operator<=>(const Id16&) const = default;

  bool is_zero() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }

  std::string hex() const { return to_hex(bytes); }

  static std::optional<Id16> parse(std::string_view s) {
    auto raw = from_hex(s);
    if (!raw || raw->size() != 16) return std::nullopt;
    Id16 id;
    std::copy(raw->begin(), raw->end(), id.bytes.begin());
    return id;
  }
};

struct AccountTag {};
struct MeterTag {};
struct ContractTag {};
struct OfferTag {};

using AccountId = Id16<AccountTag>;
using MeterId = Id16<MeterTag>;
using ContractId = Id16<ContractTag>;
using OfferId = Id16<OfferTag>;

// Checked multiply for settlement arithmetic; amounts stay far below the
// 64-bit range at desk scale but the guard costs nothing.
inline std::optional<std::int64_t> checked_mul(std::int64_t a, std::int64_t b) {
  __int128 p = static_cast<__int128>(a) * b;
  if (p > INT64_MAX || p < INT64_MIN) return std::nullopt;
  return static_cast<std::int64_t>(p);
}

}  // namespace umx

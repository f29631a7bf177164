#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "umx/common.hpp"

namespace umx {

// A tradable utility kind. Quantities are integral multiples of the base
// unit, so 1 kWh, 1 L, 1 GB are the smallest tradable amounts.
struct UtilityType {
  std::string name;
  std::string unit;

  bool operator==(const UtilityType&) const = default;
};

// Open registry of utility kinds. The framework itself is agnostic to what
// is traded; anything that can be metered in integral units qualifies.
class UtilityRegistry {
 public:
  UtilityRegistry() {
    add("Electricity", "kWh");
    add("Water", "L");
    add("Data", "GB");
  }

  Status add(std::string_view name, std::string_view unit) {
    if (name.empty() || unit.empty())
      return Status::fail(Err::ScenarioInvalid, "utility name and unit must be non-empty");
    if (find(name)) return Status::fail(Err::ScenarioInvalid, "duplicate utility: " + std::string(name));
    types_.push_back({std::string(name), std::string(unit)});
    return Status::success();
  }

  const UtilityType* find(std::string_view name) const {
    for (const auto& t : types_)
      if (t.name == name) return &t;
    return nullptr;
  }

  const std::vector<UtilityType>& all() const { return types_; }

 private:
  std::vector<UtilityType> types_;
};

}  // namespace umx

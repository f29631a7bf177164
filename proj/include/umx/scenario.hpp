#pragma once

#include <string>
#include <string_view>

#include "umx/common.hpp"
#include "umx/serialize.hpp"
#include "umx/simnet.hpp"

namespace umx {

namespace detail {

inline Outcome<Credits> credits_from_json(const json& v, const std::string& where) {
  if (v.is_string()) {
    auto c = Credits::parse(v.get<std::string>());
    if (!c) return {Err::ScenarioInvalid, where + ": bad credit amount " + v.dump()};
    return *c;
  }
  if (v.is_number_integer()) return Credits::from_whole(v.get<std::int64_t>());
  return {Err::ScenarioInvalid, where + ": credit amounts are strings or whole numbers"};
}

inline Outcome<Direction> scenario_direction(const std::string& s, const std::string& where) {
  if (s == "produced" || s == "Produced") return Direction::Produced;
  if (s == "consumed" || s == "Consumed") return Direction::Consumed;
  return {Err::ScenarioInvalid, where + ": direction is produced or consumed, got " + s};
}

}  // namespace detail

// Parses a scenario document into a simulation setup. Shape errors carry
// the offending entry; semantic validation (unknown accounts, missing
// meters, unpriceable listings) happens in Simulation::init.
inline Outcome<SimSetup> parse_scenario(const json& j) {
  SimSetup setup;
  try {
    if (!j.is_object()) return {Err::ScenarioInvalid, "scenario root must be an object"};
    setup.name = j.value("name", std::string("run"));
    setup.end_tick = j.value("end_tick", Tick{30});
    if (setup.end_tick < 1 || setup.end_tick > 1'000'000)
      return {Err::ScenarioInvalid, "end_tick outside 1..1000000"};
    setup.contract_window = j.value("contract_window", Tick{12});
    if (setup.contract_window < 1)
      return {Err::ScenarioInvalid, "contract_window must be positive"};
    setup.tolerance_permille = j.value("tolerance_permille", 50);
    if (setup.tolerance_permille < 0 || setup.tolerance_permille > 1000)
      return {Err::ScenarioInvalid, "tolerance_permille outside 0..1000"};
    if (j.contains("authorities"))
      for (const auto& a : j.at("authorities"))
        setup.authorities.push_back(a.get<std::string>());
    if (j.contains("utilities")) {
      for (const auto& u : j.at("utilities"))
        setup.extra_utilities.push_back(
            {u.at("name").get<std::string>(), u.at("unit").get<std::string>()});
    }
    if (j.contains("fault")) {
      auto f = parse_fault(j.at("fault").get<std::string>());
      if (!f) return {Err::ScenarioInvalid, "fault: " + f.message()};
      setup.fault = f.value();
    }

    if (!j.contains("nodes") || !j.at("nodes").is_array() || j.at("nodes").empty())
      return {Err::ScenarioInvalid, "scenario needs a non-empty nodes array"};
    std::size_t ni = 0;
    for (const auto& nj : j.at("nodes")) {
      ++ni;
      std::string where = "nodes[" + std::to_string(ni) + "]";
      NodeSetup node;
      node.name = nj.at("name").get<std::string>();
      where += " (" + node.name + ")";
      for (const auto& other : setup.nodes)
        if (other.name == node.name)
          return {Err::ScenarioInvalid, where + ": duplicate node name"};
      if (nj.contains("initial_credits")) {
        auto c = detail::credits_from_json(nj.at("initial_credits"), where);
        if (!c) return c.status();
        node.initial_credits = c.value();
      }
      if (nj.contains("low_credit_threshold")) {
        auto c = detail::credits_from_json(nj.at("low_credit_threshold"), where);
        if (!c) return c.status();
        node.low_threshold = c.value();
      }
      node.push_limit = nj.value("push_limit", std::int64_t{-1});
      if (node.push_limit < -1)
        return {Err::ScenarioInvalid, where + ": push_limit is -1, 0 or a positive cap"};
      if (nj.contains("rating")) {
        const json& r = nj.at("rating");
        node.rating.full = r.value("full", 5);
        node.rating.partial = r.value("partial", 3);
        node.rating.none = r.value("none", 1);
        for (int s : {node.rating.full, node.rating.partial, node.rating.none})
          if (s < 1 || s > 5)
            return {Err::ScenarioInvalid, where + ": rating scores must be 1..5"};
      }

      if (nj.contains("meters")) {
        std::size_t mi = 0;
        for (const auto& mj : nj.at("meters")) {
          ++mi;
          std::string mwhere = where + " meters[" + std::to_string(mi) + "]";
          MeterSetup m;
          m.alias = mj.at("name").get<std::string>();
          m.utility = mj.at("utility").get<std::string>();
          auto dir = detail::scenario_direction(mj.at("direction").get<std::string>(), mwhere);
          if (!dir) return dir.status();
          m.direction = dir.value();
          if (mj.contains("driver")) {
            const json& dj = mj.at("driver");
            m.driver = dj.at("kind").get<std::string>();
            for (const auto& [key, val] : dj.items()) {
              if (key == "kind") continue;
              if (!val.is_number_integer())
                return {Err::ScenarioInvalid,
                        mwhere + ": driver parameter " + key + " must be an integer"};
              m.driver_params[key] = val.get<std::int64_t>();
            }
          }
          node.meters.push_back(std::move(m));
        }
      }

      if (nj.contains("offers")) {
        std::size_t oi = 0;
        for (const auto& oj : nj.at("offers")) {
          ++oi;
          std::string owhere = where + " offers[" + std::to_string(oi) + "]";
          std::string utility = oj.at("utility").get<std::string>();
          if (node.offers.count(utility))
            return {Err::ScenarioInvalid, owhere + ": duplicate listing policy for " + utility};
          OfferPolicy pol;
          auto pp = pricing_policy_from(oj.value("policy", std::string("flat")));
          if (!pp) return {Err::ScenarioInvalid, owhere + ": policy is flat or dynamic"};
          pol.policy = *pp;
          auto base = detail::credits_from_json(oj.at("base"), owhere);
          if (!base) return base.status();
          pol.params.base = base.value();
          pol.params.k_milli = oj.value("k_milli", std::int64_t{500});
          pol.params.floor_milli = oj.value("floor_milli", std::int64_t{500});
          pol.params.ceil_milli = oj.value("ceil_milli", std::int64_t{2000});
          pol.params.target_stock = oj.value("target_stock", std::int64_t{0});
          pol.reserve = oj.value("reserve", std::int64_t{0});
          pol.min_lot = oj.value("min_lot", std::int64_t{1});
          pol.valid_for = oj.value("valid_for", Tick{20});
          if (pol.reserve < 0 || pol.min_lot < 1 || pol.valid_for < 1)
            return {Err::ScenarioInvalid, owhere + ": reserve/min_lot/valid_for out of range"};
          node.offers[utility] = pol;
        }
      }
      setup.nodes.push_back(std::move(node));
    }

    if (j.contains("events")) {
      std::size_t ei = 0;
      for (const auto& ej : j.at("events")) {
        ++ei;
        std::string where = "events[" + std::to_string(ei) + "]";
        ScheduledEvent ev;
        ev.tick = ej.at("tick").get<Tick>();
        std::string kind = ej.at("kind").get<std::string>();
        if (kind == "demand") {
          ev.kind = ScheduledEvent::Kind::Demand;
          ev.account = ej.at("account").get<std::string>();
          ev.utility = ej.at("utility").get<std::string>();
          ev.quantity = ej.at("quantity").get<std::int64_t>();
        } else if (kind == "transfer") {
          ev.kind = ScheduledEvent::Kind::Transfer;
          ev.account = ej.at("from").get<std::string>();
          ev.to = ej.at("to").get<std::string>();
          auto c = detail::credits_from_json(ej.at("amount"), where);
          if (!c) return c.status();
          ev.amount = c.value();
          ev.memo = ej.value("memo", std::string());
        } else if (kind == "mint") {
          ev.kind = ScheduledEvent::Kind::Mint;
          ev.to = ej.at("to").get<std::string>();
          auto c = detail::credits_from_json(ej.at("amount"), where);
          if (!c) return c.status();
          ev.amount = c.value();
        } else {
          return {Err::ScenarioInvalid, where + ": kind is demand, transfer or mint"};
        }
        setup.events.push_back(std::move(ev));
      }
    }
  } catch (const json::exception& e) {
    return {Err::ScenarioInvalid, std::string("scenario shape: ") + e.what()};
  }
  return setup;
}

inline Outcome<SimSetup> parse_scenario_text(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return {Err::ScenarioInvalid, "scenario is not valid JSON"};
  return parse_scenario(j);
}

}  // namespace umx

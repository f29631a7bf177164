// umx: scenario runner and chain inspector.
//
//   umx run       --scenario S [--out DIR] [--fault KIND:TICK] [--seed N] [--quiet]
//   umx verify    [--ledger F]
//   umx inspect   [--ledger F] [--contract HEX] [--format table|json]
//   umx balances  [--ledger F] [--format table|json]
//   umx market-ls [--offers F] [--at TICK] [--utility U] [--ledger F] [--format table|json]
//
// Exit codes: 0 success, 1 chain verification failure, 2 usage or input errors.

#include <umx/umx.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace umx;
using nlohmann::json;

namespace {

int fail_input(const std::string& what) {
  std::cerr << "error: " << what << "\n";
  return 2;
}

Outcome<std::string> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {Err::NoSuchTarget, "cannot open " + path};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Status spill(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return Status::fail(Err::NoSuchTarget, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) return Status::fail(Err::NoSuchTarget, "short write to " + path.string());
  return Status::success();
}

Outcome<std::pair<GenesisConfig, std::vector<Block>>> load_ledger(const std::string& path) {
  auto text = slurp(path);
  if (!text) return text.status();
  return import_ledger(text.value());
}

Outcome<std::vector<OfferEvent>> load_offers(const std::string& path) {
  auto text = slurp(path);
  if (!text) return text.status();
  std::vector<OfferEvent> events;
  std::istringstream in(text.value());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      return {Err::ParseError, path + ":" + std::to_string(no) + ": bad json"};
    auto ev = OfferEvent::from_json(j);
    if (!ev) return {ev.code(), path + ":" + std::to_string(no) + ": " + ev.message()};
    events.push_back(ev.take());
  }
  return events;
}

// Replays an imported chain into a live ledger, trusting nothing.
Outcome<Ledger> replay(const GenesisConfig& cfg, const std::vector<Block>& blocks) {
  auto led = Ledger::create(cfg);
  if (!led) return led;
  for (const auto& b : blocks) {
    auto st = led.value().apply_block(b);
    if (!st.ok())
      return {st.code, "block " + std::to_string(b.height) + ": " + st.message()};
  }
  return led;
}

// --- plain-text tables -------------------------------------------------------

void print_table(const std::vector<std::string>& head,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) width[c] = head[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], r[c].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      out += cells[c];
      if (c + 1 < cells.size()) out.append(width[c] - cells[c].size(), ' ');
    }
    std::cout << out << "\n";
  };
  line(head);
  std::vector<std::string> rule;
  for (std::size_t c = 0; c < head.size(); ++c) rule.push_back(std::string(width[c], '-'));
  line(rule);
  for (const auto& r : rows) line(r);
}

std::string rep_str(const ReputationIndex& r) { return Credits::from_millis(r.milli()).str(); }

// --- run ---------------------------------------------------------------------

std::string build_summary(const Simulation& sim) {
  const Ledger& led = sim.ledger();
  std::ostringstream out;
  out << "scenario: " << sim.name() << "\n";
  out << "end_tick: " << sim.end_tick() << "\n";
  out << "blocks: " << led.chain().size() << "\n";
  out << "minted: " << led.credits().minted().str() << "\n";
  out << "circulating: " << led.credits().circulating().str() << "\n";
  out << "conserved: " << (led.conserved() ? "yes" : "no") << "\n";
  out << "escrow_consistent: " << (led.escrow_consistent() ? "yes" : "no") << "\n";

  out << "\n[balances]\n";
  for (const auto& a : led.config().accounts) {
    const AccountId* id = led.account_id(a.alias);
    out << a.alias << " free=" << led.credits().free(*id).str()
        << " escrowed=" << led.credits().escrowed(*id).str() << "\n";
  }

  out << "\n[contracts]\n";
  for (const auto& [id, c] : led.contracts()) {
    out << id.hex() << " utility=" << c.terms.utility << " qty=" << c.terms.quantity
        << " price=" << c.terms.unit_price.str() << " buyer=" << led.alias(c.terms.buyer)
        << " supplier=" << led.alias(c.terms.supplier) << " deadline=" << c.terms.deadline
        << " state=" << to_string(c.state) << " delivered=" << c.delivered
        << " paid=" << c.paid.str() << " refunded=" << c.refunded.str() << " rating=";
    if (c.rated)
      out << c.rating;
    else
      out << "-";
    out << "\n";
  }

  out << "\n[demands]\n";
  for (const auto& d : sim.demand_records()) {
    out << "id=" << d.id << " tick=" << d.tick << " account=" << d.account
        << " utility=" << d.utility << " requested=" << d.requested
        << " self=" << d.self_supplied << " contracted=" << d.contracted
        << " delivered=" << d.delivered << " unmet_supply=" << d.unmet_supply
        << " unmet_credits=" << d.unmet_credits << "\n";
  }

  out << "\n[events]\n";
  for (const auto& line : sim.log()) out << line << "\n";
  return out.str();
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const std::string& fault_spec, bool quiet) {
  auto text = slurp(scenario_path);
  if (!text) return fail_input(text.message());
  auto setup = parse_scenario_text(text.value());
  if (!setup) return fail_input("scenario: " + setup.message());

  if (!fault_spec.empty()) {
    auto fault = parse_fault(fault_spec);
    if (!fault) return fail_input("fault: " + fault.message());
    setup.value().fault = fault.value();
  }

  DriverRegistry drivers;
  Simulation sim;
  auto st = sim.init(std::move(setup.value()), drivers);
  if (!st.ok()) return fail_input("scenario: " + st.message());
  st = sim.run();
  if (!st.ok()) return fail_input("run: " + st.message());

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) return fail_input("cannot create " + out_dir + ": " + ec.message());
  fs::path dir(out_dir);

  const Ledger& led = sim.ledger();
  std::string trace_text;
  for (const auto& e : sim.trace()) trace_text += format_trace_line(e) + "\n";
  std::string offers_text;
  for (const auto& ev : sim.offer_events()) offers_text += ev.to_json().dump() + "\n";

  for (auto&& [name, body] :
       std::initializer_list<std::pair<const char*, std::string>>{
           {"ledger.jsonl", export_ledger(led.config(), led.chain())},
           {"trace.log", std::move(trace_text)},
           {"offers.jsonl", std::move(offers_text)},
           {"summary.txt", build_summary(sim)}}) {
    auto ws = spill(dir / name, body);
    if (!ws.ok()) return fail_input(ws.message());
  }

  if (!quiet) {
    std::cout << "scenario '" << sim.name() << "': " << sim.end_tick() << " ticks, "
              << led.chain().size() << " blocks, " << led.contracts().size()
              << " contracts, conserved=" << (led.conserved() ? "yes" : "no") << "\n";
    for (const char* f : {"ledger.jsonl", "trace.log", "offers.jsonl", "summary.txt"})
      std::cout << "wrote " << (dir / f).string() << "\n";
  }
  return 0;
}

// --- verify ------------------------------------------------------------------

int cmd_verify(const std::string& ledger_path) {
  auto led = load_ledger(ledger_path);
  if (!led) return fail_input(led.message());
  const auto& [cfg, blocks] = led.value();
  auto verdict = verify_chain(cfg, blocks);
  if (!verdict.ok) {
    std::cout << "invalid at height " << verdict.first_bad_height << ": " << verdict.why
              << "\n";
    return 1;
  }
  std::string head = blocks.empty() ? "none" : to_hex(blocks.back().hash);
  std::cout << "ok: " << blocks.size() << " blocks, head " << head << "\n";
  return 0;
}

// --- inspect -----------------------------------------------------------------

struct ContractEvent {
  std::uint64_t height = 0;
  std::string event;
  std::string detail;
};

std::vector<ContractEvent> contract_history(Ledger& led, const std::vector<Block>& blocks,
                                            const ContractId& id) {
  std::vector<ContractEvent> out;
  ContractState prev_state = ContractState::Proposed;
  bool seen = false;
  for (const auto& b : blocks) {
    for (const auto& tx : b.txs) {
      std::ostringstream d;
      if (const auto* c = std::get_if<ContractCreateTx>(&tx.payload)) {
        if (c->terms.id != id) continue;
        d << "buyer=" << led.alias(c->terms.buyer) << " supplier=" << led.alias(c->terms.supplier)
          << " utility=" << c->terms.utility << " qty=" << c->terms.quantity
          << " price=" << c->terms.unit_price.str() << " deadline=" << c->terms.deadline;
        out.push_back({b.height, "created", d.str()});
      } else if (const auto* f = std::get_if<ContractFulfillTx>(&tx.payload)) {
        if (f->contract != id) continue;
        d << "delivered=" << f->proof.quantity << " by " << led.alias(tx.signer);
        out.push_back({b.height, "fulfilled", d.str()});
      } else if (const auto* r = std::get_if<ContractRevokeTx>(&tx.payload)) {
        if (r->contract != id) continue;
        d << "by " << led.alias(tx.signer);
        if (r->proof) d << " delivered=" << r->proof->quantity;
        out.push_back({b.height, "revoked", d.str()});
      } else if (const auto* g = std::get_if<RatingTx>(&tx.payload)) {
        if (g->contract != id) continue;
        d << "score=" << static_cast<int>(g->score) << " by " << led.alias(tx.signer);
        out.push_back({b.height, "rated", d.str()});
      }
    }
    for (const auto& fx : b.effects) {
      if (fx.contract != id) continue;
      std::ostringstream d;
      if (fx.kind == TxKind::Escrow)
        d << fx.amount.str() << " locked by " << led.alias(fx.from);
      else
        d << fx.amount.str() << " from " << led.alias(fx.from) << " to " << led.alias(fx.to);
      std::string kind = to_string(fx.kind);
      std::transform(kind.begin(), kind.end(), kind.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      out.push_back({b.height, kind, d.str()});
    }
    auto st = led.apply_block(b);
    (void)st;  // chain already verified
    const Contract* c = led.contract(id);
    if (c && (!seen || c->state != prev_state)) {
      if (seen) out.push_back({b.height, "state", to_string(c->state)});
      prev_state = c->state;
      seen = true;
    }
  }
  return out;
}

int cmd_inspect(const std::string& ledger_path, const std::string& contract_hex,
                const std::string& format) {
  auto led = load_ledger(ledger_path);
  if (!led) return fail_input(led.message());
  const auto& [cfg, blocks] = led.value();
  auto verdict = verify_chain(cfg, blocks);
  if (!verdict.ok) {
    std::cout << "invalid at height " << verdict.first_bad_height << ": " << verdict.why
              << "\n";
    return 1;
  }

  if (contract_hex.empty()) {
    auto full = replay(cfg, blocks);
    if (!full) return fail_input(full.message());
    Ledger& state = full.value();
    json jblocks = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const auto& b : blocks) {
      std::map<std::string, int> kinds;
      for (const auto& tx : b.txs) ++kinds[to_string(tx.kind())];
      std::string kind_text;
      for (const auto& [k, n] : kinds) {
        if (!kind_text.empty()) kind_text += ",";
        kind_text += k;
        if (n > 1) kind_text += ":" + std::to_string(n);
      }
      if (format == "json") {
        json j;
        j["height"] = b.height;
        j["tick"] = b.timestamp;
        j["miner"] = state.alias(b.miner);
        j["txs"] = b.txs.size();
        j["kinds"] = kinds;
        j["effects"] = b.effects.size();
        j["hash"] = to_hex(b.hash);
        jblocks.push_back(j);
      } else {
        rows.push_back({std::to_string(b.height), std::to_string(b.timestamp),
                        state.alias(b.miner), std::to_string(b.txs.size()), kind_text,
                        std::to_string(b.effects.size())});
      }
    }
    if (format == "json")
      std::cout << jblocks.dump(2) << "\n";
    else
      print_table({"height", "tick", "miner", "txs", "kinds", "effects"}, rows);
    return 0;
  }

  auto id = detail::id_from_hex<ContractId>(contract_hex);
  if (!id) return fail_input("contract id: " + id.message());
  auto base = Ledger::create(cfg);
  if (!base) return fail_input(base.message());
  auto events = contract_history(base.value(), blocks, id.value());
  const Contract* c = base.value().contract(id.value());
  if (!c) return fail_input("no such contract: " + contract_hex);

  if (format == "json") {
    json j;
    j["contract"] = id.value().hex();
    j["history"] = json::array();
    for (const auto& e : events)
      j["history"].push_back({{"height", e.height}, {"event", e.event}, {"detail", e.detail}});
    j["state"] = to_string(c->state);
    j["delivered"] = c->delivered;
    j["paid"] = c->paid.millis();
    j["refunded"] = c->refunded.millis();
    j["rating"] = c->rated ? c->rating : 0;
    std::cout << j.dump(2) << "\n";
  } else {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : events)
      rows.push_back({std::to_string(e.height), e.event, e.detail});
    print_table({"height", "event", "detail"}, rows);
    std::cout << "state=" << to_string(c->state) << " delivered=" << c->delivered
              << " paid=" << c->paid.str() << " refunded=" << c->refunded.str() << " rating=";
    if (c->rated)
      std::cout << c->rating << "\n";
    else
      std::cout << "-\n";
  }
  return 0;
}

// --- balances ----------------------------------------------------------------

int cmd_balances(const std::string& ledger_path, const std::string& format) {
  auto led = load_ledger(ledger_path);
  if (!led) return fail_input(led.message());
  const auto& [cfg, blocks] = led.value();
  auto verdict = verify_chain(cfg, blocks);
  if (!verdict.ok) {
    std::cout << "invalid at height " << verdict.first_bad_height << ": " << verdict.why
              << "\n";
    return 1;
  }
  auto full = replay(cfg, blocks);
  if (!full) return fail_input(full.message());
  const Ledger& state = full.value();

  if (format == "json") {
    json j;
    j["accounts"] = json::array();
    for (const auto& a : cfg.accounts) {
      const AccountId* id = state.account_id(a.alias);
      j["accounts"].push_back({{"alias", a.alias},
                               {"free", state.credits().free(*id).millis()},
                               {"escrowed", state.credits().escrowed(*id).millis()},
                               {"total", state.credits().total(*id).millis()}});
    }
    j["minted"] = state.credits().minted().millis();
    j["circulating"] = state.credits().circulating().millis();
    j["conserved"] = state.conserved();
    std::cout << j.dump(2) << "\n";
  } else {
    std::vector<std::vector<std::string>> rows;
    for (const auto& a : cfg.accounts) {
      const AccountId* id = state.account_id(a.alias);
      rows.push_back({a.alias, state.credits().free(*id).str(),
                      state.credits().escrowed(*id).str(), state.credits().total(*id).str()});
    }
    print_table({"account", "free", "escrowed", "total"}, rows);
    std::cout << "minted=" << state.credits().minted().str()
              << " circulating=" << state.credits().circulating().str()
              << " conserved=" << (state.conserved() ? "yes" : "no") << "\n";
  }
  return 0;
}

// --- market-ls ---------------------------------------------------------------

int cmd_market_ls(const std::string& offers_path, std::int64_t at, bool at_given,
                  const std::string& utility, const std::string& ledger_path,
                  const std::string& format) {
  auto events = load_offers(offers_path);
  if (!events) return fail_input(events.message());
  Tick when = at;
  if (!at_given) {
    when = 0;
    for (const auto& ev : events.value()) when = std::max(when, ev.tick);
  }

  // Aliases are cosmetic; without a ledger the raw account ids are shown.
  std::map<std::string, std::string> names;
  if (!ledger_path.empty()) {
    auto led = load_ledger(ledger_path);
    if (!led) return fail_input(led.message());
    auto full = replay(led.value().first, led.value().second);
    if (!full) return fail_input(full.message());
    for (const auto& [id, key] : full.value().account_keys())
      names[id.hex()] = full.value().alias(id);
  }
  auto supplier_name = [&](const AccountId& id) {
    auto it = names.find(id.hex());
    return it == names.end() ? id.hex() : it->second;
  };

  MarketBook book = replay_offers(events.value(), when);
  std::vector<Offer> offers = book.all();
  std::stable_sort(offers.begin(), offers.end(), offer_before);

  json jout = json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& o : offers) {
    if (!utility.empty() && o.utility != utility) continue;
    if (format == "json") {
      json j = offer_to_json(o);
      j["supplier_alias"] = supplier_name(o.supplier);
      jout.push_back(j);
    } else {
      rows.push_back({o.id.hex(), supplier_name(o.supplier), o.utility,
                      std::to_string(o.quantity), o.unit_price.str(), rep_str(o.reputation),
                      std::to_string(o.valid_until)});
    }
  }
  if (format == "json") {
    std::cout << jout.dump(2) << "\n";
  } else {
    std::cout << "offers at tick " << when << ":\n";
    print_table({"offer", "supplier", "utility", "qty", "price", "rep", "until"}, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peer-to-peer utility exchange: scenario runner and chain tools"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = ".", fault_spec;
  std::int64_t seed = 0;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run a scenario and write its artifacts");
  run->add_option("--scenario", scenario_path, "scenario json file")->required();
  run->add_option("--out", out_dir, "output directory (default .)");
  run->add_option("--fault", fault_spec,
                  "inject a fault, overriding the scenario: drop-offer|expire-mid-negotiation|"
                  "tamper-reading:TICK");
  run->add_option("--seed", seed, "accepted for interface stability; runs are deterministic");
  run->add_flag("--quiet", quiet, "suppress the run digest on stdout");

  std::string ledger_path = "ledger.jsonl";
  auto* verify = app.add_subcommand("verify", "verify a ledger stream end to end");
  verify->add_option("--ledger", ledger_path, "ledger jsonl file (default ledger.jsonl)");

  std::string ins_ledger = "ledger.jsonl", contract_hex, ins_format = "table";
  auto* inspect = app.add_subcommand("inspect", "show blocks, or one contract's history");
  inspect->add_option("--ledger", ins_ledger, "ledger jsonl file (default ledger.jsonl)");
  inspect->add_option("--contract", contract_hex, "contract id (32 hex chars)");
  inspect->add_option("--format", ins_format, "table|json")
      ->check(CLI::IsMember({"table", "json"}));

  std::string bal_ledger = "ledger.jsonl", bal_format = "table";
  auto* balances = app.add_subcommand("balances", "final account balances from a ledger stream");
  balances->add_option("--ledger", bal_ledger, "ledger jsonl file (default ledger.jsonl)");
  balances->add_option("--format", bal_format, "table|json")
      ->check(CLI::IsMember({"table", "json"}));

  std::string offers_path = "offers.jsonl", ls_utility, ls_ledger, ls_format = "table";
  std::int64_t at_tick = 0;
  auto* market = app.add_subcommand("market-ls", "replay the offer directory to a tick");
  market->add_option("--offers", offers_path, "offer event jsonl file (default offers.jsonl)");
  auto* at_opt = market->add_option("--at", at_tick, "tick to replay to (default: last event)");
  market->add_option("--utility", ls_utility, "only offers for this utility");
  market->add_option("--ledger", ls_ledger, "ledger jsonl, used to resolve supplier aliases");
  market->add_option("--format", ls_format, "table|json")
      ->check(CLI::IsMember({"table", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (run->parsed()) return cmd_run(scenario_path, out_dir, fault_spec, quiet);
  if (verify->parsed()) return cmd_verify(ledger_path);
  if (inspect->parsed()) return cmd_inspect(ins_ledger, contract_hex, ins_format);
  if (balances->parsed()) return cmd_balances(bal_ledger, bal_format);
  if (market->parsed())
    return cmd_market_ls(offers_path, at_tick, at_opt->count() > 0, ls_utility, ls_ledger,
                         ls_format);
  return 2;
}

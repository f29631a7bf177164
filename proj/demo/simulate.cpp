// Embedding the simulation: load a scenario, run it, and walk one trade's
// message sequence. The umx CLI wraps the same calls; this is the library
// view of it.

#include <umx/umx.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace umx;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s scenario.json\n", argv[0]);
    return 2;
  }
  std::ifstream in(argv[1], std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "cannot open %s\n", argv[1]);
    return 2;
  }
  std::ostringstream buf;
  buf << in.rdbuf();

  auto setup = parse_scenario_text(buf.str());
  if (!setup) {
    std::fprintf(stderr, "scenario: %s\n", setup.message().c_str());
    return 2;
  }

  DriverRegistry drivers;  // ships with the "scripted" production driver
  Simulation sim;
  if (auto st = sim.init(std::move(setup.value()), drivers); !st.ok()) {
    std::fprintf(stderr, "init: %s\n", st.message().c_str());
    return 2;
  }
  if (auto st = sim.run(); !st.ok()) {
    std::fprintf(stderr, "run: %s\n", st.message().c_str());
    return 2;
  }

  std::printf("%s: %zu envelopes, %zu blocks, %zu contracts\n", sim.name().c_str(),
              sim.trace().size(), sim.ledger().chain().size(),
              sim.ledger().contracts().size());

  // Every trade walks the same numbered protocol; print the first one.
  if (!sim.ledger().contracts().empty()) {
    const auto& [id, c] = *sim.ledger().contracts().begin();
    std::printf("\ntrade %s (%s, %lld x %s):\n", id.hex().substr(0, 8).c_str(),
                c.terms.utility.c_str(), static_cast<long long>(c.terms.quantity),
                c.terms.unit_price.str().c_str());
    for (const auto& e : extract_trade(sim.trace(), id))
      std::printf("  %s\n", format_trace_line(e).c_str());
  }

  std::printf("\nconserved: %s\n", sim.ledger().conserved() ? "yes" : "no");
  return 0;
}

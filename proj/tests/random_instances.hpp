// Random assignment problems small enough for the exhaustive oracle.
#pragma once

#include <algorithm>
#include <numeric>
#include <random>

#include "photofab/frag_alloc.hpp"

namespace photofab::testing {

inline AssignmentProblem random_problem(std::uint64_t seed, bool with_pins = false) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const int servers = uniform(3, 8);
  // Random spanning tree plus a few extra edges keeps the graph connected.
  std::vector<std::pair<ServerId, ServerId>> edges;
  for (int s = 1; s < servers; ++s) edges.emplace_back(uniform(0, s - 1), s);
  const int extra = uniform(0, servers);
  for (int i = 0; i < extra; ++i) {
    const int a = uniform(0, servers - 1);
    const int b = uniform(0, servers - 1);
    if (a != b) edges.emplace_back(a, b);
  }
  AssignmentProblem p;
  p.graph = ServerGraph(servers, edges, 4);
  for (EdgeId e = 0; e < p.graph.edge_count(); ++e) {
    p.graph.set_load(e, 4 * uniform(0, 1) * uniform(0, 1));
  }

  std::vector<ServerId> all(static_cast<std::size_t>(servers));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  const int free = uniform(1, std::min(servers, kOracleMaxFree));
  p.free_servers.assign(all.begin(), all.begin() + free);

  p.slots = uniform(1, std::min(free, kOracleMaxSlots));
  const int slot_edges = uniform(0, p.slots * (p.slots - 1) / 2);
  for (int i = 0; i < slot_edges && p.slots > 1; ++i) {
    const int a = uniform(0, p.slots - 1);
    const int b = uniform(0, p.slots - 1);
    if (a != b) p.slot_edges.emplace_back(a, b);
  }
  if (with_pins) {
    p.pinned.assign(static_cast<std::size_t>(p.slots), std::nullopt);
    for (int a = 0; a < p.slots; ++a) {
      if (uniform(0, 2) == 0) p.pinned[a] = uniform(0, servers - 1);
    }
  }
  p.paths_k = uniform(1, 4);
  return p;
}

}  // namespace photofab::testing

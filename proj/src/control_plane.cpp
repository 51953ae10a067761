#include "photofab/control_plane.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "photofab/frag_alloc.hpp"

namespace photofab {

PortAssignment assign_ports(int ports, const std::vector<double>& weights) {
  if (ports < 1) throw std::invalid_argument("port count must be >= 1");
  double total = 0.0;
  int positive = 0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("bandwidth requirement must be >= 0");
    total += w;
    if (w > 0.0) ++positive;
  }
  if (positive == 0) throw std::invalid_argument("all bandwidth requirements are zero");
  if (positive > ports) {
    throw std::invalid_argument(
        fmt::format("{} groups need ports but only {} exist", positive, ports));
  }

  const std::size_t n = weights.size();
  PortAssignment out;
  out.counts.assign(n, 0);
  std::vector<double> remainder(n, 0.0);
  int given = 0;
  for (std::size_t g = 0; g < n; ++g) {
    const double quota = ports * weights[g] / total;
    out.counts[g] = static_cast<int>(std::floor(quota + 1e-9));
    remainder[g] = quota - out.counts[g];
    given += out.counts[g];
  }
  std::vector<std::size_t> order(n);
  for (std::size_t g = 0; g < n; ++g) order[g] = g;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b] + 1e-12;
  });
  for (std::size_t i = 0; given < ports; i = (i + 1) % n) {
    if (weights[order[i]] > 0.0) {
      ++out.counts[order[i]];
      ++given;
    }
  }
  // A positive group rounded down to nothing borrows from the largest one.
  for (std::size_t g = 0; g < n; ++g) {
    if (weights[g] > 0.0 && out.counts[g] == 0) {
      const auto donor = std::max_element(out.counts.begin(), out.counts.end());
      --*donor;
      out.counts[g] = 1;
    }
  }
  int next = 0;
  for (int c : out.counts) {
    std::vector<int> ids;
    for (int i = 0; i < c; ++i) ids.push_back(next++);
    out.ports.push_back(std::move(ids));
  }
  return out;
}

double circuit_loss(const ClusterConfig& config, int crossings, double length_cm) {
  return crossings * config.loss_per_crossing + length_cm * config.waveguide_loss;
}

std::vector<int> link_ports(const Slice& slice, int ports_per_tpu) {
  std::vector<std::vector<int>> incident(slice.tpus.size());
  for (std::size_t l = 0; l < slice.links.size(); ++l) {
    incident[slice.links[l].a].push_back(static_cast<int>(l));
    incident[slice.links[l].b].push_back(static_cast<int>(l));
  }
  std::vector<int> out(slice.links.size(), 0);
  for (std::size_t chip = 0; chip < incident.size(); ++chip) {
    const auto& mine = incident[chip];
    if (mine.empty()) continue;
    const PortAssignment share =
        assign_ports(ports_per_tpu, std::vector<double>(mine.size(), 1.0));
    for (std::size_t i = 0; i < mine.size(); ++i) {
      if (slice.links[mine[i]].a == static_cast<int>(chip)) {
        out[mine[i]] = share.counts[i];
      }
    }
  }
  return out;
}

RealizeResult realize_slice(Cluster& cluster, SliceId id) {
  const Slice& s = cluster.slice(id);
  const ClusterConfig& config = cluster.config();
  std::vector<Circuit> out;
  if (!s.fragmented && s.mode().kind != ModeKind::kMorphLux) return out;

  const std::vector<int> ports = link_ports(s, config.ports_per_tpu);
  if (!s.fragmented) {
    for (std::size_t l = 0; l < s.links.size(); ++l) {
      const SliceLink& link = s.links[l];
      Circuit c;
      c.index = static_cast<int>(l);
      c.from = s.tpus[link.a];
      c.to = s.tpus[link.b];
      c.from_server = cluster.server_of(c.from);
      c.to_server = cluster.server_of(c.to);
      c.ports = ports[l];
      c.crossings = 1;
      c.length_cm = config.hop_length_cm;
      out.push_back(std::move(c));
    }
  } else {
    for (std::size_t i = 0; i < s.circuits.size(); ++i) {
      const SliceCircuit& sc = s.circuits[i];
      Circuit c;
      c.index = static_cast<int>(i);
      c.from_server = sc.from;
      c.to_server = sc.to;
      c.path = sc.path;
      bool first = true;
      for (std::size_t l = 0; l < s.links.size(); ++l) {
        if (s.links[l].circuit != static_cast<int>(i)) continue;
        if (first) {
          c.from = s.tpus[s.links[l].a];
          c.to = s.tpus[s.links[l].b];
          first = false;
        }
        c.ports += ports[l];
      }
      c.crossings = static_cast<int>(sc.path.size());
      c.length_cm = c.crossings * config.hop_length_cm;
      out.push_back(std::move(c));
    }
  }

  for (Circuit& c : out) {
    c.loss_db = circuit_loss(config, c.crossings, c.length_cm);
    if (c.loss_db > config.loss_budget) {
      Rejection r;
      r.kind = Rejection::Kind::kLossBudget;
      r.circuit = c.index;
      r.message = fmt::format("circuit {} loses {} dB, budget {} dB", c.index,
                              c.loss_db, config.loss_budget);
      return r;
    }
  }

  if (s.fragmented && !s.circuits_applied) {
    const ServerGraph& graph = cluster.rack_graph(s.rack);
    std::vector<int> loads = graph.loads();
    for (const SliceCircuit& sc : s.circuits) {
      for (EdgeId e : sc.path) loads[e] += config.circuit_fiber_units;
    }
    Rejection r;
    for (EdgeId e = 0; e < graph.edge_count(); ++e) {
      if (loads[e] > graph.edge(e).capacity) r.edges.push_back(e);
    }
    if (!r.edges.empty()) {
      r.kind = Rejection::Kind::kCapacity;
      r.message = fmt::format("{} fiber edges over capacity", r.edges.size());
      return r;
    }
  }
  cluster.apply_circuits(id);
  return out;
}

double reconfig_time(int changes, bool parallel, double delay) {
  if (changes < 0) throw std::invalid_argument("negative circuit change count");
  if (changes == 0) return 0.0;
  return parallel ? delay : changes * delay;
}

namespace {

int max_load(const ServerGraph& g) {
  int z = 0;
  for (const FiberEdge& e : g.edges()) z = std::max(z, e.load);
  return z;
}

}  // namespace

FailureOutcome handle_failure(Cluster& cluster, SliceId id, const TpuCoord& failed) {
  const Slice& s = cluster.slice(id);
  const auto it = std::find(s.tpus.begin(), s.tpus.end(), failed);
  if (it == s.tpus.end()) {
    throw std::invalid_argument("chip " + to_string(failed) + " is not in the slice");
  }
  const int pos = static_cast<int>(it - s.tpus.begin());

  if (!s.fragmented && s.mode().kind != ModeKind::kMorphLux) {
    MigrationReport report{failed, std::nullopt};
    for (int rack = 0; rack < cluster.rack_count() && !report.target; ++rack) {
      if (rack == s.rack) continue;
      report.target = find_block(cluster, rack, s.placed_shape, cluster.config().placement);
    }
    return report;
  }
  if (cluster.free_chips(s.rack) == 0) {
    return Unrecoverable{fmt::format("rack {} has no free chip", s.rack)};
  }

  // Slot 0 is the replacement; every other slot is a slice neighbor of the
  // failed chip, pinned to the server it already occupies.
  std::vector<int> touching;
  for (std::size_t l = 0; l < s.links.size(); ++l) {
    if (s.links[l].a == pos || s.links[l].b == pos) touching.push_back(static_cast<int>(l));
  }
  AssignmentProblem problem;
  problem.graph = cluster.rack_graph(s.rack);
  problem.slots = static_cast<int>(touching.size()) + 1;
  problem.pinned.assign(static_cast<std::size_t>(problem.slots), std::nullopt);
  for (std::size_t i = 0; i < touching.size(); ++i) {
    const SliceLink& link = s.links[touching[i]];
    const int other = link.a == pos ? link.b : link.a;
    problem.pinned[i + 1] = cluster.server_of(s.tpus[other]);
    problem.slot_edges.emplace_back(0, static_cast<int>(i) + 1);
  }
  problem.free_servers = cluster.servers_with_free_chips(s.rack);
  problem.circuit_fiber_units = cluster.config().circuit_fiber_units;
  problem.paths_k = cluster.config().paths_k;
  problem.paths = cluster.shared_paths();
  problem.normalize();

  const auto start = std::chrono::steady_clock::now();
  SolveResult result = solve_fragmented(problem);
  const double solver_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto* solution = std::get_if<AssignmentSolution>(&result);
  if (!solution) return Unrecoverable{std::get<Infeasible>(result).reason};

  PatchReport report;
  report.failed = failed;
  report.replacement_server = solution->mapping[0];
  for (const TpuCoord& c : cluster.server_chips(s.rack, report.replacement_server)) {
    if (cluster.is_free(c)) {
      report.replacement = c;
      break;
    }
  }
  report.z_before = max_load(cluster.rack_graph(s.rack));
  report.solver_seconds = solver_seconds;

  Slice patched = s;
  patched.tpus[pos] = report.replacement;
  patched.fragmented = true;
  for (std::size_t i = 0; i < touching.size(); ++i) {
    const std::pair key(0, static_cast<int>(i) + 1);
    const auto e = static_cast<std::size_t>(
        std::find(problem.slot_edges.begin(), problem.slot_edges.end(), key) -
        problem.slot_edges.begin());
    SliceLink& link = patched.links[touching[i]];
    if (solution->route_index[e] < 0) {
      link.circuit = -1;
      continue;
    }
    const int other = link.a == pos ? link.b : link.a;
    link.circuit = static_cast<int>(patched.circuits.size());
    patched.circuits.push_back({report.replacement_server,
                                cluster.server_of(s.tpus[other]), solution->routes[e]});
    ++report.new_circuits;
  }
  // Drop circuits no link rides any more.
  std::vector<int> remap(patched.circuits.size(), -1);
  std::vector<SliceCircuit> kept;
  for (const SliceLink& link : patched.links) {
    if (link.circuit >= 0 && remap[link.circuit] < 0) {
      remap[link.circuit] = static_cast<int>(kept.size());
      kept.push_back(patched.circuits[link.circuit]);
    }
  }
  for (SliceLink& link : patched.links) {
    if (link.circuit >= 0) link.circuit = remap[link.circuit];
  }
  patched.circuits = std::move(kept);

  const int rack = s.rack;
  cluster.replace_slice(std::move(patched));
  cluster.mark_failed(failed);
  const ServerGraph& graph = cluster.rack_graph(rack);
  report.z_after = max_load(graph);
  for (const FiberEdge& e : graph.edges()) {
    if (e.load > e.capacity) report.over_capacity = true;
  }
  report.reconfig_seconds =
      reconfig_time(report.new_circuits, true, cluster.config().reconfig_delay);
  return report;
}

nlohmann::json circuits_to_json(const std::vector<Circuit>& circuits) {
  auto coord = [](const TpuCoord& c) { return nlohmann::json{c.rack, c.x, c.y, c.z}; };
  nlohmann::json out = nlohmann::json::array();
  for (const Circuit& c : circuits) {
    out.push_back({{"index", c.index},
                   {"from", coord(c.from)},
                   {"to", coord(c.to)},
                   {"servers", {c.from_server, c.to_server}},
                   {"path", c.path},
                   {"ports", c.ports},
                   {"crossings", c.crossings},
                   {"length_cm", c.length_cm},
                   {"loss_db", c.loss_db}});
  }
  return out;
}

}  // namespace photofab

#include "photofab/frag_alloc.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "photofab/alloc_contiguous.hpp"

namespace photofab {

using nlohmann::json;

void AssignmentProblem::normalize() {
  if (slots < 0) throw std::invalid_argument("negative slot count");
  if (pinned.empty()) pinned.resize(static_cast<std::size_t>(slots));
  if (static_cast<int>(pinned.size()) != slots) {
    throw std::invalid_argument("pinned must list one entry per slot");
  }
  const int n = graph.server_count();
  for (const auto& pin : pinned) {
    if (pin && (*pin < 0 || *pin >= n)) {
      throw std::invalid_argument("pinned server out of range");
    }
  }
  for (auto& [a, b] : slot_edges) {
    if (a < 0 || b < 0 || a >= slots || b >= slots || a == b) {
      throw std::invalid_argument(fmt::format("bad slot edge ({}, {})", a, b));
    }
    if (a > b) std::swap(a, b);
  }
  std::sort(slot_edges.begin(), slot_edges.end(), [](const auto& l, const auto& r) {
    return std::pair(l.second, l.first) < std::pair(r.second, r.first);
  });
  slot_edges.erase(std::unique(slot_edges.begin(), slot_edges.end()),
                   slot_edges.end());
  std::sort(free_servers.begin(), free_servers.end());
  free_servers.erase(std::unique(free_servers.begin(), free_servers.end()),
                     free_servers.end());
  for (ServerId s : free_servers) {
    if (s < 0 || s >= n) throw std::invalid_argument("free server out of range");
  }
  if (circuit_fiber_units < 1) throw std::invalid_argument("fiber units must be >= 1");
  if (paths_k < 1) throw std::invalid_argument("k must be >= 1");
  if (!paths) {
    paths = std::make_shared<const PathTable>(graph, paths_k);
  } else if (paths->server_count() != n) {
    throw std::invalid_argument("path table does not match the server graph");
  }
}

int AssignmentProblem::unpinned_slots() const {
  int count = 0;
  for (int a = 0; a < slots; ++a) {
    if (a >= static_cast<int>(pinned.size()) || !pinned[a]) ++count;
  }
  return count;
}

namespace {

// Lexicographic (z, mapping, route index) order on complete solutions.
bool better(int z, const std::vector<ServerId>& mapping,
            const std::vector<int>& route, const AssignmentSolution& best) {
  if (z != best.z) return z < best.z;
  if (mapping != best.mapping) return mapping < best.mapping;
  return route < best.route_index;
}

void finish(const AssignmentProblem& p, AssignmentSolution& s) {
  s.routes.clear();
  std::vector<int> loads = p.graph.loads();
  for (std::size_t i = 0; i < p.slot_edges.size(); ++i) {
    if (s.route_index[i] < 0) {
      s.routes.emplace_back();
      continue;
    }
    const auto& [a, b] = p.slot_edges[i];
    const Path& path = p.paths->paths(s.mapping[a], s.mapping[b])[s.route_index[i]];
    for (EdgeId e : path) loads[e] += p.circuit_fiber_units;
    s.routes.push_back(path);
  }
  s.edge_loads = std::move(loads);
  s.z = 0;
  for (int l : s.edge_loads) s.z = std::max(s.z, l);
}

std::optional<Infeasible> precheck(const AssignmentProblem& p) {
  const int needed = p.unpinned_slots();
  if (static_cast<int>(p.free_servers.size()) < needed) {
    return Infeasible{fmt::format("{} slots need servers but only {} are free",
                                  needed, p.free_servers.size())};
  }
  return std::nullopt;
}

class BranchAndBound {
 public:
  explicit BranchAndBound(const AssignmentProblem& p)
      : p_(p),
        loads_(p.graph.loads()),
        mapping_(static_cast<std::size_t>(p.slots), -1),
        route_(p.slot_edges.size(), -1),
        used_(static_cast<std::size_t>(p.graph.server_count()), false),
        closing_(static_cast<std::size_t>(p.slots)),
        pending_(static_cast<std::size_t>(p.slots)) {
    for (int l : loads_) max_ = std::max(max_, l);
    for (std::size_t i = 0; i < p.slot_edges.size(); ++i) {
      const auto& [a, b] = p.slot_edges[i];
      closing_[b].push_back(static_cast<int>(i));
      // Both endpoints unpinned: injectivity forces distinct servers, so the
      // edge will add at least one circuit at each endpoint's server.
      if (!p.pinned[a] && !p.pinned[b]) pending_[a].push_back(b);
    }
  }

  std::optional<AssignmentSolution> run() {
    assign(0);
    if (!found_) return std::nullopt;
    return best_;
  }

 private:
  void assign(int k) {
    if (k == p_.slots) {
      if (!found_ || better(max_, mapping_, route_, best_)) {
        found_ = true;
        best_.z = max_;
        best_.mapping = mapping_;
        best_.route_index = route_;
      }
      return;
    }
    if (const auto& pin = p_.pinned[k]) {
      mapping_[k] = *pin;
      if (!prune(k)) route(k, 0);
      mapping_[k] = -1;
      return;
    }
    for (ServerId s : p_.free_servers) {
      if (used_[s]) continue;
      used_[s] = true;
      mapping_[k] = s;
      if (!prune(k)) route(k, 0);
      mapping_[k] = -1;
      used_[s] = false;
    }
  }

  void route(int k, std::size_t j) {
    if (j == closing_[k].size()) {
      assign(k + 1);
      return;
    }
    const int edge = closing_[k][j];
    const auto& [a, b] = p_.slot_edges[edge];
    const ServerId u = mapping_[a];
    const ServerId v = mapping_[b];
    if (u == v) {
      route_[edge] = -1;
      route(k, j + 1);
      return;
    }
    const auto& options = p_.paths->paths(u, v);
    const int saved_max = max_;
    for (std::size_t i = 0; i < options.size(); ++i) {
      for (EdgeId e : options[i]) {
        loads_[e] += p_.circuit_fiber_units;
        max_ = std::max(max_, loads_[e]);
      }
      route_[edge] = static_cast<int>(i);
      if (!prune(k)) route(k, j + 1);
      for (EdgeId e : options[i]) loads_[e] -= p_.circuit_fiber_units;
      max_ = saved_max;
    }
    route_[edge] = -1;
  }

  // Least possible max load around `server` after `circuits` more circuits
  // leave it, spreading them greedily over its incident fiber edges.
  int incident_bound(ServerId server, int circuits) {
    scratch_.clear();
    for (const auto& [n, e] : p_.graph.incident(server)) scratch_.push_back(loads_[e]);
    if (scratch_.empty()) return 0;
    for (int c = 0; c < circuits; ++c) {
      auto low = std::min_element(scratch_.begin(), scratch_.end());
      *low += p_.circuit_fiber_units;
    }
    return *std::max_element(scratch_.begin(), scratch_.end());
  }

  int lower_bound(int k) {
    int bound = max_;
    for (int a = 0; a <= k; ++a) {
      int open = 0;
      for (int b : pending_[a]) {
        if (b > k) ++open;
      }
      if (open > 0) bound = std::max(bound, incident_bound(mapping_[a], open));
    }
    return bound;
  }

  bool prune(int k) {
    if (!found_) return false;
    if (max_ > best_.z) return true;
    const int bound = lower_bound(k);
    if (bound > best_.z) return true;
    if (bound < best_.z) return false;
    // Equal bound: only a smaller mapping can still win the tie-break.
    for (int a = 0; a <= k; ++a) {
      if (mapping_[a] != best_.mapping[a]) return mapping_[a] > best_.mapping[a];
    }
    return false;
  }

  const AssignmentProblem& p_;
  std::vector<int> loads_;
  int max_ = 0;
  std::vector<ServerId> mapping_;
  std::vector<int> route_;
  std::vector<bool> used_;
  std::vector<std::vector<int>> closing_;
  std::vector<std::vector<int>> pending_;
  std::vector<int> scratch_;
  bool found_ = false;
  AssignmentSolution best_;
};

}  // namespace

SolveResult solve_fragmented(AssignmentProblem problem) {
  problem.normalize();
  if (auto bad = precheck(problem)) return *bad;
  auto best = BranchAndBound(problem).run();
  if (!best) return Infeasible{"no mapping connects every slice edge"};
  finish(problem, *best);
  return *best;
}

SolveResult brute_force_oracle(AssignmentProblem problem) {
  if (problem.slots > kOracleMaxSlots ||
      static_cast<int>(problem.free_servers.size()) > kOracleMaxFree) {
    throw std::invalid_argument(
        fmt::format("oracle refuses instances above {} slots / {} free servers",
                    kOracleMaxSlots, kOracleMaxFree));
  }
  problem.normalize();
  if (auto bad = precheck(problem)) return *bad;

  const AssignmentProblem& p = problem;
  std::vector<ServerId> mapping(static_cast<std::size_t>(p.slots), -1);
  std::vector<bool> used(static_cast<std::size_t>(p.graph.server_count()), false);
  std::optional<AssignmentSolution> best;

  auto evaluate_routes = [&]() {
    std::vector<const std::vector<Path>*> options;
    for (const auto& [a, b] : p.slot_edges) {
      if (mapping[a] == mapping[b]) {
        options.push_back(nullptr);
        continue;
      }
      const auto& set = p.paths->paths(mapping[a], mapping[b]);
      if (set.empty()) return;
      options.push_back(&set);
    }
    std::vector<int> route(options.size(), 0);
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (!options[i]) route[i] = -1;
    }
    while (true) {
      std::vector<int> loads = p.graph.loads();
      for (std::size_t i = 0; i < options.size(); ++i) {
        if (route[i] < 0) continue;
        for (EdgeId e : (*options[i])[route[i]]) loads[e] += p.circuit_fiber_units;
      }
      int z = 0;
      for (int l : loads) z = std::max(z, l);
      if (!best || better(z, mapping, route, *best)) {
        best = AssignmentSolution{mapping, route, {}, {}, z};
      }
      // Odometer step, last edge fastest.
      int i = static_cast<int>(options.size()) - 1;
      for (; i >= 0; --i) {
        if (!options[i]) continue;
        if (++route[i] < static_cast<int>(options[i]->size())) break;
        route[i] = 0;
      }
      if (i < 0) return;
    }
  };

  auto place = [&](auto&& self, int k) -> void {
    if (k == p.slots) {
      evaluate_routes();
      return;
    }
    if (p.pinned[k]) {
      mapping[k] = *p.pinned[k];
      self(self, k + 1);
      return;
    }
    for (ServerId s : p.free_servers) {
      if (used[s]) continue;
      used[s] = true;
      mapping[k] = s;
      self(self, k + 1);
      used[s] = false;
    }
  };
  place(place, 0);

  if (!best) return Infeasible{"no mapping connects every slice edge"};
  finish(p, *best);
  return *best;
}

CapacityReport check_capacity(const AssignmentSolution& solution, int capacity) {
  CapacityReport out;
  for (std::size_t e = 0; e < solution.edge_loads.size(); ++e) {
    if (solution.edge_loads[e] > capacity) {
      out.over_capacity.push_back(static_cast<EdgeId>(e));
    }
  }
  out.ok = out.over_capacity.empty();
  return out;
}

AssignmentProblem problem_from_json(const json& doc) {
  for (const char* key : {"servers", "edges", "free", "slots", "slot_edges"}) {
    if (!doc.contains(key)) {
      throw std::invalid_argument(fmt::format("problem is missing '{}'", key));
    }
  }
  const int servers = doc.at("servers").get<int>();
  const int capacity = doc.value("capacity", 4);
  std::vector<std::pair<ServerId, ServerId>> edges;
  for (const auto& e : doc.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());

  AssignmentProblem p;
  p.graph = ServerGraph(servers, edges, capacity);
  if (doc.contains("loads")) {
    const auto& loads = doc.at("loads");
    if (static_cast<int>(loads.size()) != p.graph.edge_count()) {
      throw std::invalid_argument("'loads' must give one value per distinct edge");
    }
    for (int e = 0; e < p.graph.edge_count(); ++e) p.graph.set_load(e, loads.at(e).get<int>());
  }
  p.slots = doc.at("slots").get<int>();
  for (const auto& e : doc.at("slot_edges")) {
    p.slot_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  }
  p.free_servers = doc.at("free").get<std::vector<ServerId>>();
  if (doc.contains("pinned")) {
    for (const auto& pin : doc.at("pinned")) {
      p.pinned.push_back(pin.is_null() ? std::nullopt
                                       : std::optional<ServerId>(pin.get<int>()));
    }
  }
  p.circuit_fiber_units = doc.value("fiber_units", 4);
  p.paths_k = doc.value("k", 4);
  if (doc.contains("paths")) {
    auto table = std::make_shared<PathTable>(servers, p.paths_k);
    for (const auto& entry : doc.at("paths")) {
      std::vector<Path> set = entry.at("paths").get<std::vector<Path>>();
      const ServerId u = entry.at("u").get<int>();
      for (const Path& path : set) {
        for (EdgeId e : path) {
          if (e < 0 || e >= p.graph.edge_count()) {
            throw std::invalid_argument("path uses an unknown edge");
          }
        }
        path_servers(p.graph, u, path);  // throws on a broken walk
      }
      table->set(u, entry.at("v").get<int>(), std::move(set));
    }
    p.paths = std::move(table);
  }
  p.normalize();
  return p;
}

json to_json(const AssignmentProblem& p) {
  json doc;
  doc["servers"] = p.graph.server_count();
  json edges = json::array();
  json loads = json::array();
  for (const FiberEdge& e : p.graph.edges()) {
    edges.push_back({e.u, e.v});
    loads.push_back(e.load);
  }
  doc["edges"] = edges;
  doc["loads"] = loads;
  doc["capacity"] = p.graph.edge_count() > 0 ? p.graph.edge(0).capacity : 4;
  doc["free"] = p.free_servers;
  doc["slots"] = p.slots;
  json slot_edges = json::array();
  for (const auto& [a, b] : p.slot_edges) slot_edges.push_back({a, b});
  doc["slot_edges"] = slot_edges;
  json pinned = json::array();
  for (const auto& pin : p.pinned) pinned.push_back(pin ? json(*pin) : json(nullptr));
  doc["pinned"] = pinned;
  doc["fiber_units"] = p.circuit_fiber_units;
  doc["k"] = p.paths_k;
  return doc;
}

json to_json(const AssignmentSolution& s, const AssignmentProblem& p) {
  json doc;
  doc["z"] = s.z;
  doc["mapping"] = s.mapping;
  json routes = json::array();
  for (std::size_t i = 0; i < s.route_index.size(); ++i) {
    const auto& [a, b] = p.slot_edges[i];
    routes.push_back({{"slots", {a, b}},
                      {"servers", {s.mapping[a], s.mapping[b]}},
                      {"index", s.route_index[i]},
                      {"path", s.routes[i]}});
  }
  doc["routes"] = routes;
  doc["edge_loads"] = s.edge_loads;
  return doc;
}

std::optional<std::pair<Extent3, Extent3>> server_aligned_orientation(
    const Extent3& shape, const Extent3& server_dims) {
  for (const Extent3& e : orientations(shape)) {
    if (e.x % server_dims.x == 0 && e.y % server_dims.y == 0 &&
        e.z % server_dims.z == 0) {
      return std::pair(e, Extent3{e.x / server_dims.x, e.y / server_dims.y,
                                  e.z / server_dims.z});
    }
  }
  return std::nullopt;
}

std::vector<std::pair<int, int>> slot_ring_edges(int slots) {
  std::vector<std::pair<int, int>> out;
  for (int k = 0; k + 1 < slots; ++k) out.emplace_back(k, k + 1);
  if (slots > 2) out.emplace_back(0, slots - 1);
  return out;
}

AssignmentProblem make_rack_problem(const Cluster& cluster, int rack,
                                    const Extent3& slot_grid) {
  const ClusterConfig& config = cluster.config();
  AssignmentProblem p;
  p.graph = cluster.rack_graph(rack);
  p.slots = slot_grid.volume();
  p.slot_edges = slot_ring_edges(p.slots);
  p.free_servers = cluster.free_servers(rack);
  p.circuit_fiber_units = config.circuit_fiber_units;
  p.paths_k = config.paths_k;
  p.paths = cluster.shared_paths();
  p.normalize();
  return p;
}

Slice make_fragmented_slice(const Cluster& cluster, SliceId id,
                            const SliceRequest& request, int rack,
                            const Extent3& oriented, const Extent3& slot_grid,
                            const AssignmentProblem& problem,
                            const AssignmentSolution& solution) {
  const Extent3& unit = cluster.config().server_dims;
  Slice s;
  s.id = id;
  s.request = request;
  s.placed_shape = oriented;
  s.rack = rack;
  s.fragmented = true;
  s.tpus.resize(static_cast<std::size_t>(oriented.volume()));

  // Walk the slots in ring order and each server block in its own snake
  // order; the concatenation is the chip ring the circuits close.
  const std::vector<int> slot_cells = snake_order(slot_grid);
  const std::vector<int> unit_walk = snake_order(unit);
  std::vector<int> ring;
  std::vector<int> ring_slot;
  for (std::size_t k = 0; k < slot_cells.size(); ++k) {
    const auto cell = logical_position(slot_grid, slot_cells[k]);
    const auto chips = cluster.server_chips(rack, solution.mapping[k]);
    for (int offset : unit_walk) {
      const auto o = logical_position(unit, offset);
      const int index = logical_index(oriented, cell[0] * unit.x + o[0],
                                      cell[1] * unit.y + o[1], cell[2] * unit.z + o[2]);
      s.tpus[index] = chips[offset];
      ring.push_back(index);
      ring_slot.push_back(static_cast<int>(k));
    }
  }
  s.anchor = s.tpus.front();

  std::vector<int> circuit_of(problem.slot_edges.size(), -1);
  for (std::size_t e = 0; e < problem.slot_edges.size(); ++e) {
    if (solution.route_index[e] < 0) continue;
    const auto& [a, b] = problem.slot_edges[e];
    circuit_of[e] = static_cast<int>(s.circuits.size());
    s.circuits.push_back({solution.mapping[a], solution.mapping[b], solution.routes[e]});
  }
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (n < 2 || (n == 2 && i == 1)) break;
    const std::size_t j = (i + 1) % n;
    SliceLink link{ring[i], ring[j], Dim::X, -1};
    const auto pa = logical_position(oriented, ring[i]);
    const auto pb = logical_position(oriented, ring[j]);
    for (int d = kNumDims - 1; d >= 0; --d) {
      if (pa[d] != pb[d]) link.dim = static_cast<Dim>(d);
    }
    if (ring_slot[i] != ring_slot[j]) {
      const std::pair key(std::min(ring_slot[i], ring_slot[j]),
                          std::max(ring_slot[i], ring_slot[j]));
      const auto it = std::find(problem.slot_edges.begin(), problem.slot_edges.end(), key);
      link.circuit = circuit_of[it - problem.slot_edges.begin()];
    }
    s.links.push_back(link);
  }
  CommGroup all;
  for (int i = 0; i < s.size(); ++i) all.members.push_back(i);
  s.comm_groups.push_back(std::move(all));
  return s;
}

std::optional<FragmentedPlacement> allocate_fragmented_in_rack(
    Cluster& cluster, const SliceRequest& request, int rack) {
  const auto aligned =
      server_aligned_orientation(request.shape, cluster.config().server_dims);
  if (!aligned) return std::nullopt;
  const auto& [oriented, grid] = *aligned;
  if (cluster.free_chips(rack) < oriented.volume()) return std::nullopt;
  AssignmentProblem problem = make_rack_problem(cluster, rack, grid);
  if (static_cast<int>(problem.free_servers.size()) < problem.slots) return std::nullopt;
  SolveResult result = solve_fragmented(problem);
  auto* solution = std::get_if<AssignmentSolution>(&result);
  if (!solution) return std::nullopt;
  const SliceId id = cluster.next_slice_id();
  cluster.claim(make_fragmented_slice(cluster, id, request, rack, oriented, grid,
                                      problem, *solution));
  return FragmentedPlacement{id, std::move(*solution)};
}

}  // namespace photofab

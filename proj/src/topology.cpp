#include "photofab/topology.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fmt/format.h>

namespace photofab {

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::X:
      return "X";
    case Dim::Y:
      return "Y";
    case Dim::Z:
      return "Z";
  }
  return "?";
}

std::string to_string(const Extent3& e) {
  return fmt::format("{}x{}x{}", e.x, e.y, e.z);
}

Extent3 parse_extent(const std::string& text) {
  Extent3 out;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int d = 0; d < kNumDims; ++d) {
    int value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc{} || value < 1) {
      throw ConfigError("malformed extent '" + text + "'");
    }
    out[d] = value;
    p = next;
    if (d + 1 < kNumDims) {
      if (p == end || (*p != 'x' && *p != 'X')) {
        throw ConfigError("malformed extent '" + text + "'");
      }
      ++p;
    }
  }
  if (p != end) throw ConfigError("malformed extent '" + text + "'");
  return out;
}

std::string to_string(const TpuCoord& c) {
  return fmt::format("r{}({},{},{})", c.rack, c.x, c.y, c.z);
}

void ClusterConfig::validate() const {
  if (racks_count < 1) throw ConfigError("racks_count must be >= 1");
  for (int d = 0; d < kNumDims; ++d) {
    if (rack_dims[d] < 1 || server_dims[d] < 1) {
      throw ConfigError("rack and server extents must be >= 1");
    }
    if (rack_dims[d] % server_dims[d] != 0) {
      throw ConfigError(fmt::format("server_dims {} do not divide rack_dims {}",
                                    to_string(server_dims),
                                    to_string(rack_dims)));
    }
  }
  if (ports_per_tpu < kNumDims || ports_per_tpu % kNumDims != 0) {
    throw ConfigError("ports_per_tpu must be a positive multiple of 3");
  }
  if (fibers_per_adjacent_server_pair < 1) {
    throw ConfigError("fibers_per_adjacent_server_pair must be >= 1");
  }
  if (circuit_fiber_units < 1) throw ConfigError("circuit_fiber_units must be >= 1");
  if (paths_k < 1) throw ConfigError("paths_k must be >= 1");
  if (!(link_bandwidth > 0) || !(alpha >= 0) || !(reconfig_delay >= 0)) {
    throw ConfigError("bandwidth must be positive and delays non-negative");
  }
  if (!(loss_per_crossing >= 0) || !(waveguide_loss >= 0) ||
      !(loss_budget >= 0) || !(hop_length_cm >= 0)) {
    throw ConfigError("loss parameters must be non-negative");
  }
}

ServerGraph::ServerGraph(int servers,
                         std::vector<std::pair<ServerId, ServerId>> edges,
                         int capacity)
    : servers_(servers), adjacency_(static_cast<std::size_t>(servers)) {
  for (auto& [a, b] : edges) {
    if (a == b || a < 0 || b < 0 || a >= servers || b >= servers) {
      throw std::invalid_argument("bad fiber edge");
    }
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    const EdgeId id = static_cast<EdgeId>(edges_.size());
    edges_.push_back({a, b, capacity, 0});
    adjacency_[a].emplace_back(b, id);
    adjacency_[b].emplace_back(a, id);
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(),
              [](const auto& l, const auto& r) { return l.second < r.second; });
  }
}

std::optional<EdgeId> ServerGraph::find_edge(ServerId a, ServerId b) const {
  for (const auto& [n, e] : adjacency_.at(a)) {
    if (n == b) return e;
  }
  return std::nullopt;
}

void ServerGraph::set_load(EdgeId e, int load) {
  if (load < 0) throw std::invalid_argument("negative fiber load");
  edges_.at(e).load = load;
}

void ServerGraph::add_load(EdgeId e, int delta) {
  set_load(e, edges_.at(e).load + delta);
}

std::vector<int> ServerGraph::loads() const {
  std::vector<int> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) out.push_back(e.load);
  return out;
}

namespace {

std::vector<int> bfs_distances(const ServerGraph& g, ServerId from) {
  std::vector<int> dist(static_cast<std::size_t>(g.server_count()), -1);
  std::deque<ServerId> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const ServerId s = queue.front();
    queue.pop_front();
    for (const auto& [n, e] : g.incident(s)) {
      if (dist[n] < 0) {
        dist[n] = dist[s] + 1;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

// Depth-first walk over incident edges in id order emits equal-length paths
// in lexicographic edge order.
class PathCollector {
 public:
  PathCollector(const ServerGraph& g, ServerId target, std::vector<int> dist,
                int k)
      : g_(g),
        target_(target),
        dist_(std::move(dist)),
        k_(k),
        visited_(static_cast<std::size_t>(g.server_count()), false) {}

  void collect(ServerId from, int hops, std::vector<Path>& out) {
    out_ = &out;
    visited_[from] = true;
    walk(from, hops);
    visited_[from] = false;
  }

 private:
  void walk(ServerId node, int remaining) {
    if (static_cast<int>(out_->size()) >= k_) return;
    if (node == target_) {
      if (remaining == 0) out_->push_back(current_);
      return;
    }
    for (const auto& [n, e] : g_.incident(node)) {
      if (visited_[n] || dist_[n] < 0 || dist_[n] > remaining - 1) continue;
      visited_[n] = true;
      current_.push_back(e);
      walk(n, remaining - 1);
      current_.pop_back();
      visited_[n] = false;
    }
  }

  const ServerGraph& g_;
  ServerId target_;
  std::vector<int> dist_;
  int k_;
  std::vector<bool> visited_;
  Path current_;
  std::vector<Path>* out_ = nullptr;
};

}  // namespace

std::vector<Path> enumerate_paths(const ServerGraph& graph, ServerId u,
                                  ServerId v, int k) {
  if (u == v) throw std::invalid_argument("enumerate_paths requires u != v");
  if (k < 1) throw std::invalid_argument("enumerate_paths requires k >= 1");
  std::vector<int> dist = bfs_distances(graph, v);
  std::vector<Path> out;
  if (dist[u] < 0) return out;
  PathCollector collector(graph, v, std::move(dist), k);
  const int longest = graph.server_count() - 1;
  for (int hops = bfs_distances(graph, u)[v];
       hops <= longest && static_cast<int>(out.size()) < k; ++hops) {
    collector.collect(u, hops, out);
  }
  return out;
}

std::vector<ServerId> path_servers(const ServerGraph& graph, ServerId from,
                                   const Path& path) {
  std::vector<ServerId> out{from};
  ServerId at = from;
  for (EdgeId e : path) {
    const FiberEdge& edge = graph.edge(e);
    if (edge.u == at) {
      at = edge.v;
    } else if (edge.v == at) {
      at = edge.u;
    } else {
      throw std::invalid_argument("path is not contiguous");
    }
    out.push_back(at);
  }
  return out;
}

ServerGraph build_rack_server_graph(const ClusterConfig& config) {
  const Extent3 grid = config.server_grid();
  auto id = [&](int x, int y, int z) { return (x * grid.y + y) * grid.z + z; };
  std::vector<std::pair<ServerId, ServerId>> edges;
  for (int x = 0; x < grid.x; ++x) {
    for (int y = 0; y < grid.y; ++y) {
      for (int z = 0; z < grid.z; ++z) {
        const std::array<int, 3> at{x, y, z};
        for (int d = 0; d < kNumDims; ++d) {
          if (grid[d] < 2) continue;
          auto next = at;
          next[d] = (at[d] + 1) % grid[d];
          edges.emplace_back(id(x, y, z), id(next[0], next[1], next[2]));
        }
      }
    }
  }
  return ServerGraph(grid.volume(), std::move(edges),
                     config.fibers_per_adjacent_server_pair);
}

PathTable::PathTable(const ServerGraph& graph, int k)
    : servers_(graph.server_count()),
      k_(k),
      table_(static_cast<std::size_t>(servers_ * servers_)) {
  for (ServerId u = 0; u < servers_; ++u) {
    for (ServerId v = u + 1; v < servers_; ++v) {
      table_[u * servers_ + v] = enumerate_paths(graph, u, v, k);
    }
  }
}

PathTable::PathTable(int servers, int k)
    : servers_(servers),
      k_(k),
      table_(static_cast<std::size_t>(servers * servers)) {}

void PathTable::set(ServerId u, ServerId v, std::vector<Path> paths) {
  if (u > v) std::swap(u, v);
  if (u == v || u < 0 || v >= servers_) {
    throw std::out_of_range("no path set for server pair");
  }
  table_[u * servers_ + v] = std::move(paths);
}

const std::vector<Path>& PathTable::paths(ServerId u, ServerId v) const {
  if (u > v) std::swap(u, v);
  if (u == v || u < 0 || v >= servers_) {
    throw std::out_of_range("no path set for server pair");
  }
  return table_[u * servers_ + v];
}

}  // namespace photofab

// Physical fabric model: racks of chips arranged as 3D tori, grouped into
// servers that are joined by inter-server fiber bundles.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace photofab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Dim : std::uint8_t { X = 0, Y = 1, Z = 2 };
inline constexpr int kNumDims = 3;

const char* dim_name(Dim d);

// Chip-count extents along X, Y and Z.
struct Extent3 {
  int x = 1;
  int y = 1;
  int z = 1;

  int operator[](int d) const { return d == 0 ? x : (d == 1 ? y : z); }
  int& operator[](int d) { return d == 0 ? x : (d == 1 ? y : z); }
  int volume() const { return x * y * z; }
  friend bool operator==(const Extent3&, const Extent3&) = default;
  friend auto operator<=>(const Extent3&, const Extent3&) = default;
};

std::string to_string(const Extent3& e);
// Parses "4x2x1". Throws ConfigError on malformed input.
Extent3 parse_extent(const std::string& text);

// How the contiguous allocator may anchor blocks inside a rack.
enum class Placement : std::uint8_t {
  kChip,    // any chip anchor
  kServer,  // blocks must be unions of whole servers
};

struct ClusterConfig {
  int racks_count = 64;
  Extent3 rack_dims{4, 4, 4};
  Extent3 server_dims{2, 2, 1};
  int ports_per_tpu = 6;
  int fibers_per_adjacent_server_pair = 4;
  int circuit_fiber_units = 4;  // fiber footprint of one circuit per edge
  int paths_k = 4;
  double link_bandwidth = 50e9;  // bytes/s per link
  double alpha = 1e-6;           // seconds per ring step
  double reconfig_delay = 3.7e-6;
  double loss_per_crossing = 0.25;  // dB
  double waveguide_loss = 0.4;      // dB/cm
  double loss_budget = 10.0;        // dB
  double hop_length_cm = 1.0;
  Placement placement = Placement::kChip;

  // Throws ConfigError when an invariant does not hold.
  void validate() const;

  Extent3 server_grid() const {
    return {rack_dims.x / server_dims.x, rack_dims.y / server_dims.y,
            rack_dims.z / server_dims.z};
  }
  int chips_per_rack() const { return rack_dims.volume(); }
  int chips_per_server() const { return server_dims.volume(); }
  int servers_per_rack() const { return server_grid().volume(); }
  int ports_per_dim() const { return ports_per_tpu / kNumDims; }
};

struct TpuCoord {
  int rack = 0;
  int x = 0;
  int y = 0;
  int z = 0;

  int operator[](int d) const { return d == 0 ? x : (d == 1 ? y : z); }
  int& operator[](int d) { return d == 0 ? x : (d == 1 ? y : z); }
  friend bool operator==(const TpuCoord&, const TpuCoord&) = default;
  friend auto operator<=>(const TpuCoord&, const TpuCoord&) = default;
};

std::string to_string(const TpuCoord& c);

// A chip-level link. For extent-2 dimensions the +1 and -1 neighbors are the
// same chip; such links carry multiplicity 2 and describe the +1 step.
struct LinkEdge {
  TpuCoord from;
  TpuCoord to;
  Dim dim = Dim::X;
  bool wraparound = false;
  int multiplicity = 1;

  bool doubled() const { return multiplicity == 2; }
  friend bool operator==(const LinkEdge&, const LinkEdge&) = default;
};

using ServerId = int;
using EdgeId = int;
// A fiber path: edge ids in traversal order.
using Path = std::vector<EdgeId>;

struct FiberEdge {
  ServerId u = 0;  // u < v
  ServerId v = 0;
  int capacity = 4;
  int load = 0;  // existing circuits, in fiber units
};

// Undirected graph of servers joined by fiber bundles. Edge ids follow the
// sorted (u, v) order of the edges passed at construction.
class ServerGraph {
 public:
  ServerGraph() = default;
  ServerGraph(int servers, std::vector<std::pair<ServerId, ServerId>> edges,
              int capacity);

  int server_count() const { return servers_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const FiberEdge& edge(EdgeId e) const { return edges_.at(e); }
  const std::vector<FiberEdge>& edges() const { return edges_; }
  // Incident (neighbor, edge id) pairs sorted by edge id.
  const std::vector<std::pair<ServerId, EdgeId>>& incident(ServerId s) const {
    return adjacency_.at(s);
  }
  std::optional<EdgeId> find_edge(ServerId a, ServerId b) const;

  void set_load(EdgeId e, int load);
  void add_load(EdgeId e, int delta);
  std::vector<int> loads() const;

 private:
  int servers_ = 0;
  std::vector<FiberEdge> edges_;
  std::vector<std::vector<std::pair<ServerId, EdgeId>>> adjacency_;
};

// Up to k loop-free paths from u to v, shortest first, ties broken by the
// lexicographic order of edge-id sequences. Empty when u and v are
// disconnected. Requires u != v and k >= 1.
std::vector<Path> enumerate_paths(const ServerGraph& graph, ServerId u,
                                  ServerId v, int k);

// Server ids visited by `path` starting from `from`.
std::vector<ServerId> path_servers(const ServerGraph& graph, ServerId from,
                                   const Path& path);

// Server quotient of one rack's chip torus.
ServerGraph build_rack_server_graph(const ClusterConfig& config);

// Precomputed k-path sets for every unordered server pair (u < v).
class PathTable {
 public:
  PathTable() = default;
  // Empty table; fill with set().
  PathTable(int servers, int k);
  PathTable(const ServerGraph& graph, int k);

  int k() const { return k_; }
  int server_count() const { return servers_; }
  const std::vector<Path>& paths(ServerId u, ServerId v) const;
  void set(ServerId u, ServerId v, std::vector<Path> paths);

 private:
  int servers_ = 0;
  int k_ = 0;
  std::vector<std::vector<Path>> table_;
};

inline constexpr std::int32_t kFreeChip = -1;
inline constexpr std::int32_t kFailedChip = -2;

}  // namespace photofab

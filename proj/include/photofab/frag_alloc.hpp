// Exact placement of a slice's server-sized slots onto non-contiguous free
// servers, with fiber path selection minimizing the worst edge load.
//
// For every fiber edge e the load is
//     fiber_units * (selected paths crossing e) + b(e)
// and the objective z is the maximum load over all edges. Among optimal
// solutions the lexicographically smallest slot -> server mapping wins, then
// the smallest path indices in canonical slot-edge order.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "photofab/cluster.hpp"

namespace photofab {

struct AssignmentProblem {
  ServerGraph graph;  // edge loads are the existing b(e)
  int slots = 0;
  std::vector<std::pair<int, int>> slot_edges;
  std::vector<ServerId> free_servers;
  // Optional per-slot pin. Pinned slots sit on their server without
  // consuming it; unpinned slots map injectively onto free_servers.
  std::vector<std::optional<ServerId>> pinned;
  int circuit_fiber_units = 4;
  int paths_k = 4;
  std::shared_ptr<const PathTable> paths;  // computed on demand when null

  // Sorts and dedups free servers, orders slot edges as (a < b) by (b, a),
  // and fills missing path sets. Throws std::invalid_argument on malformed
  // input.
  void normalize();
  int unpinned_slots() const;
};

struct AssignmentSolution {
  std::vector<ServerId> mapping;  // slot -> server
  // Per canonical slot edge: index into P(u, v), -1 when both endpoints sit
  // on one server.
  std::vector<int> route_index;
  std::vector<Path> routes;
  std::vector<int> edge_loads;  // final load per fiber edge
  int z = 0;
};

struct Infeasible {
  std::string reason;
};

using SolveResult = std::variant<AssignmentSolution, Infeasible>;

SolveResult solve_fragmented(AssignmentProblem problem);

inline constexpr int kOracleMaxSlots = 5;
inline constexpr int kOracleMaxFree = 8;

// Exhaustive search over every injective mapping and path combination.
// Throws std::invalid_argument above the tractability guard.
SolveResult brute_force_oracle(AssignmentProblem problem);

struct CapacityReport {
  bool ok = true;
  std::vector<EdgeId> over_capacity;  // edges whose load exceeds capacity
};

CapacityReport check_capacity(const AssignmentSolution& solution,
                              int capacity = 4);

// JSON problem format:
//   {"servers": 4, "edges": [[0,1],[1,2]], "capacity": 4,
//    "loads": [0,0], "free": [0,2], "slots": 2, "slot_edges": [[0,1]],
//    "pinned": [null, 3], "fiber_units": 4, "k": 4,
//    "paths": [{"u":0,"v":2,"paths":[[0,1]]}]}
// Only servers, edges, free, slots and slot_edges are required.
AssignmentProblem problem_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const AssignmentProblem& problem);
nlohmann::json to_json(const AssignmentSolution& solution,
                       const AssignmentProblem& problem);

// Slot grid of `shape` for the first orientation whose extents the server
// extents divide; nullopt when no orientation aligns.
std::optional<std::pair<Extent3, Extent3>> server_aligned_orientation(
    const Extent3& shape, const Extent3& server_dims);

// Request graph of a fragmented slice: slots form one ring, in snake order
// through the slot grid. Two slots share one edge; one slot has none.
std::vector<std::pair<int, int>> slot_ring_edges(int slots);

// Problem for placing `slot_grid` onto the whole free servers of `rack`.
// Slot k is the k-th server block along the grid's snake order.
AssignmentProblem make_rack_problem(const Cluster& cluster, int rack,
                                    const Extent3& slot_grid);

struct FragmentedPlacement {
  SliceId id = -1;
  AssignmentSolution solution;
};

// Solves the rack problem and, when a solution exists, claims the mapped
// servers as a fragmented slice. Fiber loads are left to the control plane.
std::optional<FragmentedPlacement> allocate_fragmented_in_rack(
    Cluster& cluster, const SliceRequest& request, int rack);

// Builds the slice record for a solved rack problem.
Slice make_fragmented_slice(const Cluster& cluster, SliceId id,
                            const SliceRequest& request, int rack,
                            const Extent3& oriented, const Extent3& slot_grid,
                            const AssignmentProblem& problem,
                            const AssignmentSolution& solution);

}  // namespace photofab

// Turns allocated slices into physical configuration: SerDes port shares,
// optical circuits with fiber and loss accounting, switch timing, and
// single-chip failure patching.

#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "photofab/alloc_contiguous.hpp"
#include "photofab/cluster.hpp"

namespace photofab {

struct PortAssignment {
  std::vector<int> counts;              // ports per group, summing to M
  std::vector<std::vector<int>> ports;  // port ids per group, consecutive
};

// Largest-remainder apportionment of `ports` over non-negative weights.
// Ties on the remainder go to the lower group index. Throws
// std::invalid_argument for negative weights, all-zero weights, or more
// positive groups than ports.
PortAssignment assign_ports(int ports, const std::vector<double>& weights);

struct Circuit {
  int index = 0;  // slice circuit (fragmented) or slice link (contiguous)
  TpuCoord from;
  TpuCoord to;
  ServerId from_server = 0;
  ServerId to_server = 0;
  Path path;  // fiber edges; empty for on-wafer circuits
  int ports = 0;
  int crossings = 0;
  double length_cm = 0.0;
  double loss_db = 0.0;
};

double circuit_loss(const ClusterConfig& config, int crossings, double length_cm);

// Port share of every slice link at its first endpoint, splitting M evenly
// over that chip's slice links.
std::vector<int> link_ports(const Slice& slice, int ports_per_tpu);

struct Rejection {
  enum class Kind { kLossBudget, kCapacity };
  Kind kind = Kind::kCapacity;
  int circuit = -1;              // offending circuit for loss rejections
  std::vector<EdgeId> edges;     // saturated edges for capacity rejections
  std::string message;
};

using RealizeResult = std::variant<std::vector<Circuit>, Rejection>;

// Baseline and ICI slices keep their electrical links and yield no circuits.
// Contiguous MorphLux slices get one on-wafer circuit per slice link.
// Fragmented slices get one circuit per inter-server slice edge along its
// chosen fiber path; on acceptance the fiber loads are applied. A rejection
// leaves the cluster untouched.
RealizeResult realize_slice(Cluster& cluster, SliceId id);

// Seconds to program `changes` circuits. Throws std::invalid_argument for
// negative counts.
double reconfig_time(int changes, bool parallel, double delay);

struct PatchReport {
  TpuCoord failed;
  TpuCoord replacement;
  ServerId replacement_server = 0;
  int new_circuits = 0;
  int z_before = 0;  // rack max fiber load
  int z_after = 0;
  bool over_capacity = false;
  double solver_seconds = 0.0;
  double reconfig_seconds = 0.0;
  double recovery_seconds() const { return solver_seconds + reconfig_seconds; }
};

struct MigrationReport {
  TpuCoord failed;
  std::optional<BlockPlacement> target;  // nullopt: no free block elsewhere
};

struct Unrecoverable {
  std::string reason;
};

using FailureOutcome = std::variant<PatchReport, MigrationReport, Unrecoverable>;

// Baseline slices are not patched; the report names where the whole slice
// could migrate. Other slices get the failed chip swapped for a free chip in
// the same rack, chosen by a one-slot fragmented solve with the chip's slice
// neighbors pinned. Throws std::invalid_argument if `failed` is not in the
// slice.
FailureOutcome handle_failure(Cluster& cluster, SliceId id, const TpuCoord& failed);

nlohmann::json circuits_to_json(const std::vector<Circuit>& circuits);

}  // namespace photofab

// Slice requests, realized slices and the dimension-contention model.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "photofab/topology.hpp"

namespace photofab {

using SliceId = std::int32_t;

enum class ModeKind : std::uint8_t { kBaseline, kMorphLux, kIci };

// Bandwidth regime of a slice. ICI routes over every port at a reduced
// per-port bandwidth `ici_fraction`.
struct Mode {
  ModeKind kind = ModeKind::kBaseline;
  double ici_fraction = 1.0;

  static Mode baseline() { return {ModeKind::kBaseline, 1.0}; }
  static Mode morphlux() { return {ModeKind::kMorphLux, 1.0}; }
  static Mode ici(double fraction);

  friend bool operator==(const Mode&, const Mode&) = default;
};

// "baseline", "morphlux", "ici0.5" / "ici:0.5".
Mode parse_mode(const std::string& text);
std::string to_string(const Mode& mode);

struct SliceRequest {
  Extent3 shape;
  Mode mode;
};

// "4x2x1:morphlux"; the mode suffix defaults to baseline.
SliceRequest parse_slice_request(const std::string& text);
std::string to_string(const SliceRequest& request);

enum class Collective : std::uint8_t { kReduceScatter, kAllGather, kAllReduce };

struct CommGroup {
  std::vector<int> members;  // logical positions within the slice
  double bandwidth_requirement = 1.0;
  Collective collective = Collective::kAllReduce;
};

// A logical link between two slice positions. `circuit` indexes
// Slice::circuits when the link rides an inter-server fiber circuit.
struct SliceLink {
  int a = 0;
  int b = 0;
  Dim dim = Dim::X;
  int circuit = -1;
};

struct SliceCircuit {
  ServerId from = 0;
  ServerId to = 0;
  Path path;
};

struct Slice {
  SliceId id = -1;
  SliceRequest request;
  Extent3 placed_shape;  // request shape after orientation
  int rack = 0;
  TpuCoord anchor;  // contiguous slices only
  // Chips by logical position ((lx * sy) + ly) * sz + lz.
  std::vector<TpuCoord> tpus;
  std::vector<SliceLink> links;
  std::vector<CommGroup> comm_groups;
  std::vector<SliceCircuit> circuits;
  bool fragmented = false;
  bool circuits_applied = false;

  int size() const { return static_cast<int>(tpus.size()); }
  const Mode& mode() const { return request.mode; }
};

int logical_index(const Extent3& shape, int lx, int ly, int lz);
std::array<int, 3> logical_position(const Extent3& shape, int index);

// Torus edges over a logical shape. Dimensions listed in `closed` get their
// wraparound edge when extent > 2; extent-2 dimensions yield one edge per
// pair and extent-1 dimensions none.
std::vector<SliceLink> logical_links(const Extent3& shape,
                                     const std::array<bool, 3>& closed);

// Boustrophedon walk over every logical position; consecutive entries are
// torus neighbors.
std::vector<int> snake_order(const Extent3& shape);

struct UsableDims {
  std::vector<Dim> dims;  // contention-free dimension rings
  bool snake = false;     // no private dimension ring; one snake ring instead
  double fraction = 0.0;  // share of full egress bandwidth
};

// Throws std::invalid_argument when `shape` exceeds `rack`.
UsableDims usable_dims(const Extent3& shape, const Extent3& rack,
                       const Mode& mode);

double port_utilization(const Extent3& shape, const Extent3& rack,
                        const Mode& mode, int ports_per_tpu);
double port_utilization(const Slice& slice, const ClusterConfig& config);

}  // namespace photofab

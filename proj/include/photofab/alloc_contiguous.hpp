// First-fit allocation of contiguous torus-shaped blocks, deallocation and
// the per-rack fragmentation index.

#pragma once

#include <optional>
#include <vector>

#include "photofab/cluster.hpp"

namespace photofab {

struct BlockPlacement {
  int rack = 0;
  TpuCoord anchor;
  Extent3 oriented;
};

// The distinct axis permutations of `shape`, identity first, then
// (x,z,y), (y,x,z), (y,z,x), (z,x,y), (z,y,x).
std::vector<Extent3> orientations(const Extent3& shape);

// True when the block at `anchor` with extents `shape` is free and obeys the
// anchoring rules: no wrapping unless the extent covers the whole dimension,
// and whole-server alignment under Placement::kServer.
bool block_fits(const Cluster& cluster, int rack, const TpuCoord& anchor,
                const Extent3& shape, Placement placement);

// First fitting block in `rack`: anchors in (x, y, z) lexicographic order,
// orientations tried per anchor.
std::optional<BlockPlacement> find_block(const Cluster& cluster, int rack,
                                         const Extent3& shape,
                                         Placement placement);

// Builds the slice record for a block (chips, intra-slice links, one
// all-reduce group). Does not touch the cluster.
Slice make_contiguous_slice(const Cluster& cluster, SliceId id,
                            const SliceRequest& request,
                            const BlockPlacement& placement);

// Scans racks in ascending id. Returns the new slice id, or nullopt when no
// rack holds a free block.
std::optional<SliceId> allocate_contiguous(Cluster& cluster,
                                           const SliceRequest& request);
std::optional<SliceId> allocate_contiguous_in_rack(Cluster& cluster,
                                                   const SliceRequest& request,
                                                   int rack);

// Throws std::out_of_range for unknown or already retired ids.
void deallocate(Cluster& cluster, SliceId id);

struct Fragmentation {
  int free_chips = 0;     // T
  int largest_block = 0;  // S
  double index = 0.0;     // 1 - S/T, 0 when T = 0
};

Fragmentation fragmentation_index(const Cluster& cluster, int rack);

}  // namespace photofab

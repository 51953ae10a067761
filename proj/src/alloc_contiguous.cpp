#include "photofab/alloc_contiguous.hpp"

#include <algorithm>
#include <array>

namespace photofab {

std::vector<Extent3> orientations(const Extent3& shape) {
  static constexpr std::array<std::array<int, 3>, 6> kOrders{{
      {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<Extent3> out;
  for (const auto& order : kOrders) {
    const Extent3 e{shape[order[0]], shape[order[1]], shape[order[2]]};
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  }
  return out;
}

namespace {

bool anchor_allowed(const ClusterConfig& config, const TpuCoord& anchor,
                    const Extent3& shape, Placement placement) {
  for (int d = 0; d < kNumDims; ++d) {
    const int rack = config.rack_dims[d];
    if (shape[d] < 1 || shape[d] > rack) return false;
    if (shape[d] == rack) {
      if (anchor[d] != 0) return false;
    } else if (anchor[d] < 0 || anchor[d] + shape[d] > rack) {
      return false;
    }
    if (placement == Placement::kServer) {
      const int unit = config.server_dims[d];
      if (anchor[d] % unit != 0 || shape[d] % unit != 0) return false;
    }
  }
  return true;
}

bool block_free(const Cluster& cluster, int rack, const TpuCoord& anchor,
                const Extent3& shape) {
  const auto owners = cluster.rack_owners(rack);
  const Extent3& r = cluster.config().rack_dims;
  for (int x = anchor.x; x < anchor.x + shape.x; ++x) {
    for (int y = anchor.y; y < anchor.y + shape.y; ++y) {
      for (int z = anchor.z; z < anchor.z + shape.z; ++z) {
        if (owners[(x * r.y + y) * r.z + z] != kFreeChip) return false;
      }
    }
  }
  return true;
}

}  // namespace

bool block_fits(const Cluster& cluster, int rack, const TpuCoord& anchor,
                const Extent3& shape, Placement placement) {
  return anchor_allowed(cluster.config(), anchor, shape, placement) &&
         block_free(cluster, rack, anchor, shape);
}

std::optional<BlockPlacement> find_block(const Cluster& cluster, int rack,
                                         const Extent3& shape,
                                         Placement placement) {
  if (cluster.free_chips(rack) < shape.volume()) return std::nullopt;
  const Extent3& r = cluster.config().rack_dims;
  const std::vector<Extent3> shapes = orientations(shape);
  for (int x = 0; x < r.x; ++x) {
    for (int y = 0; y < r.y; ++y) {
      for (int z = 0; z < r.z; ++z) {
        const TpuCoord anchor{rack, x, y, z};
        for (const Extent3& e : shapes) {
          if (block_fits(cluster, rack, anchor, e, placement)) {
            return BlockPlacement{rack, anchor, e};
          }
        }
      }
    }
  }
  return std::nullopt;
}

Slice make_contiguous_slice(const Cluster& cluster, SliceId id,
                            const SliceRequest& request,
                            const BlockPlacement& placement) {
  Slice s;
  s.id = id;
  s.request = request;
  s.placed_shape = placement.oriented;
  s.rack = placement.rack;
  s.anchor = placement.anchor;
  const Extent3& e = placement.oriented;
  s.tpus.reserve(static_cast<std::size_t>(e.volume()));
  for (int lx = 0; lx < e.x; ++lx) {
    for (int ly = 0; ly < e.y; ++ly) {
      for (int lz = 0; lz < e.z; ++lz) {
        s.tpus.push_back({placement.rack, placement.anchor.x + lx,
                          placement.anchor.y + ly, placement.anchor.z + lz});
      }
    }
  }
  const Extent3& r = cluster.config().rack_dims;
  s.links = logical_links(e, {e.x == r.x, e.y == r.y, e.z == r.z});
  CommGroup all;
  all.members.resize(s.tpus.size());
  for (std::size_t i = 0; i < all.members.size(); ++i) all.members[i] = static_cast<int>(i);
  s.comm_groups.push_back(std::move(all));
  return s;
}

std::optional<SliceId> allocate_contiguous_in_rack(Cluster& cluster,
                                                   const SliceRequest& request,
                                                   int rack) {
  const auto placement =
      find_block(cluster, rack, request.shape, cluster.config().placement);
  if (!placement) return std::nullopt;
  const SliceId id = cluster.next_slice_id();
  cluster.claim(make_contiguous_slice(cluster, id, request, *placement));
  return id;
}

std::optional<SliceId> allocate_contiguous(Cluster& cluster,
                                           const SliceRequest& request) {
  for (int rack = 0; rack < cluster.rack_count(); ++rack) {
    if (auto id = allocate_contiguous_in_rack(cluster, request, rack)) return id;
  }
  return std::nullopt;
}

void deallocate(Cluster& cluster, SliceId id) { cluster.release(id); }

Fragmentation fragmentation_index(const Cluster& cluster, int rack) {
  Fragmentation out;
  out.free_chips = cluster.free_chips(rack);
  if (out.free_chips == 0) return out;
  const Extent3& r = cluster.config().rack_dims;
  std::vector<Extent3> shapes;
  for (int x = 1; x <= r.x; ++x) {
    for (int y = 1; y <= r.y; ++y) {
      for (int z = 1; z <= r.z; ++z) {
        if (x * y * z <= out.free_chips) shapes.push_back({x, y, z});
      }
    }
  }
  std::stable_sort(shapes.begin(), shapes.end(), [](const Extent3& a, const Extent3& b) {
    return a.volume() > b.volume();
  });
  auto fits_somewhere = [&](const Extent3& e) {
    for (int x = 0; x < r.x; ++x) {
      for (int y = 0; y < r.y; ++y) {
        for (int z = 0; z < r.z; ++z) {
          if (block_fits(cluster, rack, {rack, x, y, z}, e, Placement::kChip)) {
            return true;
          }
        }
      }
    }
    return false;
  };
  for (const Extent3& e : shapes) {
    if (fits_somewhere(e)) {
      out.largest_block = e.volume();
      break;
    }
  }
  out.index = 1.0 - static_cast<double>(out.largest_block) / out.free_chips;
  return out;
}

}  // namespace photofab

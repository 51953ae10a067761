// Mutable fabric state: chip ownership, live slices and fiber loads.

#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "photofab/slice.hpp"
#include "photofab/topology.hpp"

namespace photofab {

class Cluster {
 public:
  // Validates `config`; throws ConfigError.
  explicit Cluster(const ClusterConfig& config);

  const ClusterConfig& config() const { return config_; }
  int rack_count() const { return config_.racks_count; }
  int total_chips() const { return rack_count() * config_.chips_per_rack(); }

  bool contains(const TpuCoord& c) const;
  int chip_index(const TpuCoord& c) const;
  TpuCoord chip_at(int rack, int index) const;
  ServerId server_of(const TpuCoord& c) const;
  // Chips of `server` in ascending chip index.
  std::vector<TpuCoord> server_chips(int rack, ServerId server) const;

  std::int32_t owner(const TpuCoord& c) const;
  bool is_free(const TpuCoord& c) const { return owner(c) == kFreeChip; }
  std::span<const std::int32_t> rack_owners(int rack) const;
  int free_chips(int rack) const;
  int free_chips() const;
  int allocated_chips() const;
  // Servers whose chips are all free.
  std::vector<ServerId> free_servers(int rack) const;
  // Servers with at least one free chip.
  std::vector<ServerId> servers_with_free_chips(int rack) const;

  const ServerGraph& rack_graph(int rack) const { return graphs_.at(rack); }
  const PathTable& paths() const { return *paths_; }
  std::shared_ptr<const PathTable> shared_paths() const { return paths_; }

  const std::map<SliceId, Slice>& slices() const { return slices_; }
  bool has_slice(SliceId id) const { return slices_.contains(id); }
  const Slice& slice(SliceId id) const;

  // Reserves a fresh id; ids are never reused.
  SliceId next_slice_id() { return next_id_++; }
  // Marks the slice's chips as owned. Throws std::logic_error if any chip is
  // not free.
  void claim(Slice slice);
  // Frees the slice's chips and releases its applied fiber load. Throws
  // std::out_of_range for unknown ids.
  Slice release(SliceId id);

  // Adds `delta` fiber units to every edge of `path`.
  void add_path_load(int rack, const Path& path, int delta);
  // Applies the slice's circuits to the fiber loads.
  void apply_circuits(SliceId id);
  void replace_slice(Slice slice);

  void mark_failed(const TpuCoord& c);

  // Ownership and fiber loads; live slice ids.
  friend bool same_state(const Cluster& a, const Cluster& b);

 private:
  ClusterConfig config_;
  std::vector<std::vector<std::int32_t>> owners_;
  std::vector<int> free_counts_;
  std::vector<ServerGraph> graphs_;
  std::shared_ptr<const PathTable> paths_;
  std::map<SliceId, Slice> slices_;
  SliceId next_id_ = 0;
};

Cluster build_cluster(const ClusterConfig& config);

// Neighbors of `c` within its rack torus, X then Y then Z, +1 step first.
// Extent-2 dimensions contribute one doubled link; extent-1 none.
std::vector<std::pair<TpuCoord, LinkEdge>> neighbors(const ClusterConfig& config,
                                                     const TpuCoord& c);
std::vector<std::pair<TpuCoord, LinkEdge>> neighbors(const Cluster& cluster,
                                                     const TpuCoord& c);

}  // namespace photofab

#include "photofab/cluster.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <stdexcept>

namespace photofab {

Cluster::Cluster(const ClusterConfig& config) : config_(config) {
  config_.validate();
  const auto racks = static_cast<std::size_t>(config_.racks_count);
  owners_.assign(racks, std::vector<std::int32_t>(
                            static_cast<std::size_t>(config_.chips_per_rack()),
                            kFreeChip));
  free_counts_.assign(racks, config_.chips_per_rack());
  const ServerGraph graph = build_rack_server_graph(config_);
  graphs_.assign(racks, graph);
  paths_ = std::make_shared<const PathTable>(graph, config_.paths_k);
}

Cluster build_cluster(const ClusterConfig& config) { return Cluster(config); }

bool Cluster::contains(const TpuCoord& c) const {
  const Extent3& r = config_.rack_dims;
  return c.rack >= 0 && c.rack < config_.racks_count && c.x >= 0 && c.x < r.x &&
         c.y >= 0 && c.y < r.y && c.z >= 0 && c.z < r.z;
}

int Cluster::chip_index(const TpuCoord& c) const {
  if (!contains(c)) throw std::out_of_range("chip " + to_string(c) + " not in cluster");
  const Extent3& r = config_.rack_dims;
  return (c.x * r.y + c.y) * r.z + c.z;
}

TpuCoord Cluster::chip_at(int rack, int index) const {
  const Extent3& r = config_.rack_dims;
  return {rack, index / (r.y * r.z), (index / r.z) % r.y, index % r.z};
}

ServerId Cluster::server_of(const TpuCoord& c) const {
  const Extent3& s = config_.server_dims;
  const Extent3 grid = config_.server_grid();
  return ((c.x / s.x) * grid.y + c.y / s.y) * grid.z + c.z / s.z;
}

std::vector<TpuCoord> Cluster::server_chips(int rack, ServerId server) const {
  const Extent3& s = config_.server_dims;
  const Extent3 grid = config_.server_grid();
  const int gx = server / (grid.y * grid.z);
  const int gy = (server / grid.z) % grid.y;
  const int gz = server % grid.z;
  std::vector<TpuCoord> out;
  out.reserve(static_cast<std::size_t>(s.volume()));
  for (int x = 0; x < s.x; ++x) {
    for (int y = 0; y < s.y; ++y) {
      for (int z = 0; z < s.z; ++z) {
        out.push_back({rack, gx * s.x + x, gy * s.y + y, gz * s.z + z});
      }
    }
  }
  return out;
}

std::int32_t Cluster::owner(const TpuCoord& c) const {
  return owners_[c.rack][chip_index(c)];
}

std::span<const std::int32_t> Cluster::rack_owners(int rack) const {
  return owners_.at(rack);
}

int Cluster::free_chips(int rack) const { return free_counts_.at(rack); }

int Cluster::free_chips() const {
  int total = 0;
  for (int f : free_counts_) total += f;
  return total;
}

int Cluster::allocated_chips() const {
  int total = 0;
  for (const auto& [id, s] : slices_) total += s.size();
  return total;
}

std::vector<ServerId> Cluster::free_servers(int rack) const {
  std::vector<ServerId> out;
  for (ServerId s = 0; s < config_.servers_per_rack(); ++s) {
    const auto chips = server_chips(rack, s);
    if (std::all_of(chips.begin(), chips.end(),
                    [&](const TpuCoord& c) { return is_free(c); })) {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<ServerId> Cluster::servers_with_free_chips(int rack) const {
  std::vector<ServerId> out;
  for (ServerId s = 0; s < config_.servers_per_rack(); ++s) {
    const auto chips = server_chips(rack, s);
    if (std::any_of(chips.begin(), chips.end(),
                    [&](const TpuCoord& c) { return is_free(c); })) {
      out.push_back(s);
    }
  }
  return out;
}

const Slice& Cluster::slice(SliceId id) const {
  auto it = slices_.find(id);
  if (it == slices_.end()) {
    throw std::out_of_range(fmt::format("unknown slice id {}", id));
  }
  return it->second;
}

void Cluster::claim(Slice slice) {
  if (slices_.contains(slice.id)) {
    throw std::logic_error(fmt::format("slice id {} already live", slice.id));
  }
  for (const TpuCoord& c : slice.tpus) {
    if (c.rack != slice.rack || !is_free(c)) {
      throw std::logic_error("chip " + to_string(c) + " is not free");
    }
  }
  std::vector<int> indices;
  for (const TpuCoord& c : slice.tpus) indices.push_back(chip_index(c));
  std::sort(indices.begin(), indices.end());
  if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
    throw std::logic_error("slice lists a chip twice");
  }
  for (int i : indices) owners_[slice.rack][i] = slice.id;
  free_counts_[slice.rack] -= static_cast<int>(indices.size());
  slice.circuits_applied = false;
  slices_.emplace(slice.id, std::move(slice));
}

Slice Cluster::release(SliceId id) {
  auto it = slices_.find(id);
  if (it == slices_.end()) {
    throw std::out_of_range(fmt::format("unknown slice id {}", id));
  }
  Slice slice = std::move(it->second);
  slices_.erase(it);
  for (const TpuCoord& c : slice.tpus) owners_[slice.rack][chip_index(c)] = kFreeChip;
  free_counts_[slice.rack] += slice.size();
  if (slice.circuits_applied) {
    for (const SliceCircuit& circuit : slice.circuits) {
      add_path_load(slice.rack, circuit.path, -config_.circuit_fiber_units);
    }
    slice.circuits_applied = false;
  }
  return slice;
}

void Cluster::add_path_load(int rack, const Path& path, int delta) {
  for (EdgeId e : path) graphs_.at(rack).add_load(e, delta);
}

void Cluster::apply_circuits(SliceId id) {
  Slice& s = slices_.at(id);
  if (s.circuits_applied) return;
  for (const SliceCircuit& circuit : s.circuits) {
    add_path_load(s.rack, circuit.path, config_.circuit_fiber_units);
  }
  s.circuits_applied = true;
}

void Cluster::replace_slice(Slice slice) {
  Slice& current = slices_.at(slice.id);
  if (current.circuits_applied) {
    for (const SliceCircuit& circuit : current.circuits) {
      add_path_load(current.rack, circuit.path, -config_.circuit_fiber_units);
    }
  }
  for (const TpuCoord& c : current.tpus) {
    if (owners_[c.rack][chip_index(c)] == current.id) {
      owners_[c.rack][chip_index(c)] = kFreeChip;
      ++free_counts_[c.rack];
    }
  }
  for (const TpuCoord& c : slice.tpus) {
    if (!is_free(c)) throw std::logic_error("chip " + to_string(c) + " is not free");
    owners_[c.rack][chip_index(c)] = slice.id;
    --free_counts_[c.rack];
  }
  const bool applied = slice.circuits_applied;
  slice.circuits_applied = false;
  current = std::move(slice);
  if (applied) apply_circuits(current.id);
}

void Cluster::mark_failed(const TpuCoord& c) {
  std::int32_t& o = owners_[c.rack][chip_index(c)];
  if (o == kFreeChip) --free_counts_[c.rack];
  o = kFailedChip;
}

bool same_state(const Cluster& a, const Cluster& b) {
  if (a.owners_ != b.owners_ || a.free_counts_ != b.free_counts_) return false;
  for (std::size_t r = 0; r < a.graphs_.size(); ++r) {
    if (a.graphs_[r].loads() != b.graphs_[r].loads()) return false;
  }
  if (a.slices_.size() != b.slices_.size()) return false;
  return std::equal(a.slices_.begin(), a.slices_.end(), b.slices_.begin(),
                    [](const auto& l, const auto& r) { return l.first == r.first; });
}

std::vector<std::pair<TpuCoord, LinkEdge>> neighbors(const ClusterConfig& config,
                                                     const TpuCoord& c) {
  std::vector<std::pair<TpuCoord, LinkEdge>> out;
  for (int d = 0; d < kNumDims; ++d) {
    const int extent = config.rack_dims[d];
    if (extent < 2) continue;
    TpuCoord up = c;
    up[d] = (c[d] + 1) % extent;
    const bool wrap_up = c[d] + 1 == extent;
    if (extent == 2) {
      out.push_back({up, LinkEdge{c, up, static_cast<Dim>(d), wrap_up, 2}});
      continue;
    }
    TpuCoord down = c;
    down[d] = (c[d] + extent - 1) % extent;
    out.push_back({up, LinkEdge{c, up, static_cast<Dim>(d), wrap_up, 1}});
    out.push_back({down, LinkEdge{c, down, static_cast<Dim>(d), c[d] == 0, 1}});
  }
  return out;
}

std::vector<std::pair<TpuCoord, LinkEdge>> neighbors(const Cluster& cluster,
                                                     const TpuCoord& c) {
  if (!cluster.contains(c)) throw std::out_of_range("chip not in cluster");
  return neighbors(cluster.config(), c);
}

}  // namespace photofab

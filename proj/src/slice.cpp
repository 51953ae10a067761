#include "photofab/slice.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fmt/format.h>
#include <stdexcept>

#include "photofab/cluster.hpp"

namespace photofab {

Mode Mode::ici(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("ICI fraction must lie in (0, 1]");
  }
  return {ModeKind::kIci, fraction};
}

Mode parse_mode(const std::string& raw) {
  std::string text = raw;
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (text == "baseline" || text == "tpu") return Mode::baseline();
  if (text == "morphlux") return Mode::morphlux();
  if (text.rfind("ici", 0) == 0) {
    std::string rest = text.substr(3);
    if (!rest.empty() && (rest[0] == ':' || rest[0] == '-')) rest.erase(0, 1);
    double value = 0.0;
    auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
    if (ec != std::errc{} || p != rest.data() + rest.size()) {
      throw ConfigError("malformed ICI mode '" + raw + "'");
    }
    try {
      return Mode::ici(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("unknown mode '" + raw + "'");
}

std::string to_string(const Mode& mode) {
  switch (mode.kind) {
    case ModeKind::kBaseline:
      return "baseline";
    case ModeKind::kMorphLux:
      return "morphlux";
    case ModeKind::kIci:
      return fmt::format("ici{}", mode.ici_fraction);
  }
  return "?";
}

SliceRequest parse_slice_request(const std::string& text) {
  const auto colon = text.find(':');
  SliceRequest out;
  out.shape = parse_extent(text.substr(0, colon));
  out.mode = colon == std::string::npos ? Mode::baseline()
                                        : parse_mode(text.substr(colon + 1));
  return out;
}

std::string to_string(const SliceRequest& request) {
  return to_string(request.shape) + ":" + to_string(request.mode);
}

int logical_index(const Extent3& shape, int lx, int ly, int lz) {
  return (lx * shape.y + ly) * shape.z + lz;
}

std::array<int, 3> logical_position(const Extent3& shape, int index) {
  return {index / (shape.y * shape.z), (index / shape.z) % shape.y,
          index % shape.z};
}

std::vector<SliceLink> logical_links(const Extent3& shape,
                                     const std::array<bool, 3>& closed) {
  std::vector<SliceLink> out;
  for (int i = 0; i < shape.volume(); ++i) {
    const auto pos = logical_position(shape, i);
    for (int d = 0; d < kNumDims; ++d) {
      const int extent = shape[d];
      if (extent < 2) continue;
      const bool last = pos[d] == extent - 1;
      if (last && (extent == 2 || !closed[d])) continue;
      auto next = pos;
      next[d] = (pos[d] + 1) % extent;
      out.push_back({i, logical_index(shape, next[0], next[1], next[2]),
                     static_cast<Dim>(d), -1});
    }
  }
  return out;
}

std::vector<int> snake_order(const Extent3& shape) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(shape.volume()));
  int row = 0;
  for (int x = 0; x < shape.x; ++x) {
    for (int j = 0; j < shape.y; ++j) {
      const int y = x % 2 == 0 ? j : shape.y - 1 - j;
      for (int k = 0; k < shape.z; ++k) {
        const int z = row % 2 == 0 ? k : shape.z - 1 - k;
        out.push_back(logical_index(shape, x, y, z));
      }
      ++row;
    }
  }
  return out;
}

UsableDims usable_dims(const Extent3& shape, const Extent3& rack,
                       const Mode& mode) {
  for (int d = 0; d < kNumDims; ++d) {
    if (shape[d] < 1 || shape[d] > rack[d]) {
      throw std::invalid_argument(fmt::format(
          "slice shape {} exceeds rack {}", to_string(shape), to_string(rack)));
    }
  }
  UsableDims out;
  const bool multi_chip = shape.volume() > 1;
  if (mode.kind != ModeKind::kBaseline) {
    for (int d = 0; d < kNumDims; ++d) {
      if (shape[d] > 1) out.dims.push_back(static_cast<Dim>(d));
    }
    out.fraction = mode.kind == ModeKind::kMorphLux ? 1.0 : mode.ici_fraction;
    return out;
  }
  // A dimension ring is private only when it closes through the wraparound
  // link inside the slice; shorter rings cross chips of other slices.
  for (int d = 0; d < kNumDims; ++d) {
    if (shape[d] == rack[d] && shape[d] > 1) out.dims.push_back(static_cast<Dim>(d));
  }
  if (!multi_chip) return out;
  out.snake = out.dims.empty();
  const auto rings = std::max<std::size_t>(out.dims.size(), 1);
  out.fraction = static_cast<double>(rings) / kNumDims;
  return out;
}

double port_utilization(const Extent3& shape, const Extent3& rack,
                        const Mode& mode, int ports_per_tpu) {
  const UsableDims usable = usable_dims(shape, rack, mode);
  if (mode.kind != ModeKind::kBaseline) return 1.0;
  if (shape.volume() < 2) return 0.0;
  const int per_dim = ports_per_tpu / kNumDims;
  const auto rings = std::max<std::size_t>(usable.dims.size(), 1);
  return static_cast<double>(per_dim * static_cast<int>(rings)) / ports_per_tpu;
}

double port_utilization(const Slice& slice, const ClusterConfig& config) {
  return port_utilization(slice.placed_shape, config.rack_dims, slice.mode(),
                          config.ports_per_tpu);
}

}  // namespace photofab

#include "photofab/cost_model.hpp"

#include <stdexcept>

namespace photofab {

CostParams CostParams::from_config(const ClusterConfig& config) {
  return {config.alpha, 1.0 / (config.ports_per_tpu * config.link_bandwidth),
          config.reconfig_delay};
}

namespace {

void check_ring(int n, double bytes, double fraction) {
  if (n < 1) throw std::invalid_argument("ring needs at least one node");
  if (!(bytes >= 0.0)) throw std::invalid_argument("byte count must be >= 0");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("bandwidth fraction must lie in (0, 1]");
  }
}

}  // namespace

CollectiveCost ring_reduce_scatter(int n, double bytes, double fraction) {
  check_ring(n, bytes, fraction);
  CollectiveCost c;
  if (n == 1) return c;
  c.alpha_steps = n - 1;
  c.beta_bytes = bytes * (n - 1) / n / fraction;
  return c;
}

CollectiveCost ring_all_gather(int n, double bytes, double fraction) {
  return ring_reduce_scatter(n, bytes, fraction);
}

CollectiveCost bucket_allreduce(const std::vector<int>& dims, double bytes,
                                const std::vector<double>& fractions) {
  if (dims.size() != fractions.size()) {
    throw std::invalid_argument("one fraction per dimension required");
  }
  CollectiveCost total;
  std::vector<double> stage_bytes;
  double buffer = bytes;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    stage_bytes.push_back(buffer);
    total += ring_reduce_scatter(dims[i], buffer, fractions[i]);
    buffer /= dims[i];
  }
  for (std::size_t i = dims.size(); i-- > 0;) {
    total += ring_all_gather(dims[i], stage_bytes[i], fractions[i]);
  }
  return total;
}

CollectiveCost bucket_allreduce(const std::vector<int>& dims, double bytes,
                                double fraction) {
  return bucket_allreduce(dims, bytes, std::vector<double>(dims.size(), fraction));
}

IterTime train_iter_time(double grad_bytes, double compute_seconds,
                         const Extent3& shape, const Extent3& rack,
                         const Mode& mode, const CostParams& params) {
  if (!(compute_seconds >= 0.0)) throw std::invalid_argument("compute time must be >= 0");
  IterTime t;
  t.compute_seconds = compute_seconds;
  if (shape.volume() > 1) {
    const UsableDims usable = usable_dims(shape, rack, mode);
    if (mode.kind == ModeKind::kMorphLux) {
      t.comm = bucket_allreduce({shape.volume()}, grad_bytes, 1.0);
    } else {
      std::vector<int> rings;
      for (int d = 0; d < kNumDims; ++d) {
        if (shape[d] > 1) rings.push_back(shape[d]);
      }
      t.comm = bucket_allreduce(rings, grad_bytes, usable.fraction);
    }
  }
  t.comm_seconds = t.comm.total_seconds(params);
  t.seconds = t.compute_seconds + t.comm_seconds;
  return t;
}

}  // namespace photofab

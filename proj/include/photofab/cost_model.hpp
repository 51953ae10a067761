// Alpha-beta cost of ring and multi-dimensional bucket collectives, and a
// two-term training iteration model built on them.

#pragma once

#include <vector>

#include "photofab/slice.hpp"

namespace photofab {

struct CostParams {
  double alpha = 1e-6;             // seconds per ring step
  double beta_unit = 1 / 300e9;    // seconds per byte at full egress bandwidth
  double reconfig = 3.7e-6;        // seconds per reconfiguration

  // beta_unit = 1 / (ports_per_tpu * link_bandwidth).
  static CostParams from_config(const ClusterConfig& config);
};

struct CollectiveCost {
  long long alpha_steps = 0;
  double beta_bytes = 0.0;  // already divided by the bandwidth fraction
  int reconfigs = 0;

  double total_seconds(const CostParams& p) const {
    return alpha_steps * p.alpha + beta_bytes * p.beta_unit + reconfigs * p.reconfig;
  }
  CollectiveCost& operator+=(const CollectiveCost& o) {
    alpha_steps += o.alpha_steps;
    beta_bytes += o.beta_bytes;
    reconfigs += o.reconfigs;
    return *this;
  }
  friend CollectiveCost operator+(CollectiveCost a, const CollectiveCost& b) {
    return a += b;
  }
};

// n - 1 steps moving N (n - 1) / n bytes at `fraction` of full bandwidth.
// Throws std::invalid_argument for n < 1, N < 0 or fraction outside (0, 1].
CollectiveCost ring_reduce_scatter(int n, double bytes, double fraction);
CollectiveCost ring_all_gather(int n, double bytes, double fraction);

// Reduce-scatter over dims in order with a shrinking buffer, then all-gather
// in reverse order.
CollectiveCost bucket_allreduce(const std::vector<int>& dims, double bytes,
                                double fraction);
CollectiveCost bucket_allreduce(const std::vector<int>& dims, double bytes,
                                const std::vector<double>& fractions);

struct IterTime {
  double compute_seconds = 0.0;
  CollectiveCost comm;
  double comm_seconds = 0.0;
  double seconds = 0.0;
};

// compute + all-reduce of `grad_bytes` over the slice's ring structure:
// Baseline runs a bucket over the non-trivial dims at its usable fraction,
// MorphLux one ring over every chip at full bandwidth, ICI(f) a bucket at f.
IterTime train_iter_time(double grad_bytes, double compute_seconds,
                         const Extent3& shape, const Extent3& rack,
                         const Mode& mode, const CostParams& params);

}  // namespace photofab
